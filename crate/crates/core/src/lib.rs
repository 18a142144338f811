//! Complex-baseband simulation of hardware-impaired RF transmitter chains,
//! plus a from-scratch CNN that classifies transmitters from raw IQ frames.
//!
//! The pipeline runs entirely at complex baseband: ideal modulated waveforms
//! ([`baseband`]) pass through a per-device impairment chain ([`impairments`]),
//! an AWGN channel and a bandwidth-selective receiver capture ([`channel`]),
//! and are sliced into labeled 2x1024 IQ frames ([`dataset`]). Spectral
//! verification tools live in [`spectral`], the classifier in [`nn`].

pub mod baseband;
pub mod channel;
pub mod dataset;
pub mod error;
pub mod impairments;
pub mod nn;
pub mod seeds;
pub mod spectral;

pub use error::{Error, Result};

use num_complex::Complex64;

/// One complex-baseband sample. Both components are dimensionless amplitudes
/// on a unit-power normalized scale.
pub type ComplexSample = Complex64;

/// A complex-baseband sample sequence tagged with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<ComplexSample>,
    pub sample_rate_hz: f64,
}

impl Waveform {
    /// Create a waveform, validating the type invariants.
    pub fn new(samples: Vec<ComplexSample>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(Error::InvalidWaveform("sample rate must be positive and finite".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidWaveform("waveform must contain at least one sample".into()));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean per-sample power `E[|s|^2]`.
    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Scale every sample so the mean power becomes exactly `target_power`.
    pub fn normalize_power(&mut self, target_power: f64) {
        let p = self.mean_power();
        if p > 0.0 {
            let g = (target_power / p).sqrt();
            for s in &mut self.samples {
                *s *= g;
            }
        }
    }

    /// True if every component of every sample is finite.
    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|s| s.re.is_finite() && s.im.is_finite())
    }
}
