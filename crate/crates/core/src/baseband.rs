//! Ideal (pre-impairment) complex-baseband waveform generation.
//!
//! Bits map onto Gray-coded constellations, symbols are pulse-shaped at the
//! internal oversampling rate, and helper tones support the spectral tests.
//! All constellations are normalized to unit average symbol power.

use crate::{ComplexSample, Error, Result, Waveform};
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};

/// Modulation schemes supported by the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModulationScheme {
    Bpsk,
    /// Continuous-phase binary FSK; `tone_separation_hz` is the spacing
    /// between the two tones (they sit at +/- separation/2).
    Bfsk { tone_separation_hz: f64 },
    Psk8,
    Qam16,
}

impl ModulationScheme {
    pub fn bits_per_symbol(&self) -> usize {
        match self {
            ModulationScheme::Bpsk | ModulationScheme::Bfsk { .. } => 1,
            ModulationScheme::Psk8 => 3,
            ModulationScheme::Qam16 => 4,
        }
    }
}

/// Pulse shaping filter selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseKind {
    /// Root-raised-cosine with unit-energy taps.
    RootRaisedCosine,
    /// Zero-order hold of each symbol over the symbol period.
    RectangularHold,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseShapeConfig {
    pub kind: PulseKind,
    pub rolloff: f64,
    pub span_symbols: usize,
    pub samples_per_symbol: usize,
}

impl PulseShapeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(Error::InvalidWaveform(format!("rolloff {} outside [0,1]", self.rolloff)));
        }
        if self.span_symbols == 0 || self.samples_per_symbol < 2 {
            return Err(Error::InvalidWaveform("span must be >= 1 symbol and sps >= 2".into()));
        }
        Ok(())
    }
}

impl Default for PulseShapeConfig {
    fn default() -> Self {
        Self {
            kind: PulseKind::RootRaisedCosine,
            rolloff: 0.35,
            span_symbols: 10,
            samples_per_symbol: 2,
        }
    }
}

/// Gray-coded 2-bit index -> amplitude level index in {0,1,2,3}.
fn gray2_level(g: usize) -> usize {
    [0, 1, 3, 2][g & 3]
}

/// The 16QAM constellation point for a 4-bit word (I bits high, Q bits low),
/// Gray-coded per axis and scaled by 1/sqrt(10) for unit average power.
fn qam16_point(word: usize) -> Complex64 {
    let levels = [-3.0, -1.0, 1.0, 3.0];
    let scale = 0.1f64.sqrt();
    let i = levels[gray2_level(word >> 2)] * scale;
    let q = levels[gray2_level(word & 3)] * scale;
    Complex64::new(i, q)
}

/// The 8PSK constellation point for a 3-bit word, Gray-coded around the circle.
fn psk8_point(word: usize) -> Complex64 {
    // binary-reflected Gray order: position k on the circle carries code k^(k>>1)
    let gray = [0usize, 1, 3, 2, 6, 7, 5, 4];
    let pos = gray.iter().position(|&g| g == word).unwrap();
    Complex64::from_polar(1.0, TAU * pos as f64 / 8.0)
}

/// Map a bit sequence onto constellation symbols.
///
/// For BFSK the "symbols" are the antipodal tone selectors -1/+1; the actual
/// frequency modulation happens in [`modulate`].
pub fn map_symbols(bits: &[u8], scheme: ModulationScheme) -> Result<Vec<ComplexSample>> {
    let bps = scheme.bits_per_symbol();
    if bits.len() % bps != 0 {
        return Err(Error::BitLengthMismatch { bits: bits.len(), bits_per_symbol: bps });
    }
    let symbols = bits
        .chunks(bps)
        .map(|chunk| {
            let word = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
            match scheme {
                ModulationScheme::Bpsk | ModulationScheme::Bfsk { .. } => {
                    Complex64::new(if word == 0 { -1.0 } else { 1.0 }, 0.0)
                }
                ModulationScheme::Psk8 => psk8_point(word),
                ModulationScheme::Qam16 => qam16_point(word),
            }
        })
        .collect();
    Ok(symbols)
}

/// Unit-energy root-raised-cosine taps (length `span*sps + 1`).
pub fn rrc_taps(sps: usize, span: usize, rolloff: f64) -> Vec<f64> {
    let n = span * sps + 1;
    let mid = (n - 1) as f64 / 2.0;
    let beta = rolloff;
    let mut taps: Vec<f64> = (0..n)
        .map(|k| {
            let t = (k as f64 - mid) / sps as f64;
            if t.abs() < 1e-12 {
                1.0 - beta + 4.0 * beta / PI
            } else if beta > 0.0 && (t.abs() - 1.0 / (4.0 * beta)).abs() < 1e-9 {
                (beta / 2.0f64.sqrt())
                    * ((1.0 + 2.0 / PI) * (PI / (4.0 * beta)).sin()
                        + (1.0 - 2.0 / PI) * (PI / (4.0 * beta)).cos())
            } else {
                let num = (PI * t * (1.0 - beta)).sin()
                    + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
                let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
                num / den
            }
        })
        .collect();
    let energy: f64 = taps.iter().map(|h| h * h).sum();
    let norm = energy.sqrt();
    for h in &mut taps {
        *h /= norm;
    }
    taps
}

/// Pulse-shape a symbol sequence to `sample_rate_hz = symbol_rate * sps`.
///
/// Output length is exactly `symbols.len() * sps`; the filter transient is
/// split evenly and trimmed (the shaper is applied with its group delay
/// removed). RectangularHold holds each symbol value for a symbol period.
pub fn pulse_shape(
    symbols: &[ComplexSample],
    cfg: &PulseShapeConfig,
    sample_rate_hz: f64,
) -> Result<Waveform> {
    cfg.validate()?;
    if symbols.is_empty() {
        return Err(Error::InvalidWaveform("no symbols to shape".into()));
    }
    let sps = cfg.samples_per_symbol;
    let n_out = symbols.len() * sps;
    let samples = match cfg.kind {
        PulseKind::RectangularHold => {
            let mut out = Vec::with_capacity(n_out);
            for s in symbols {
                out.extend(std::iter::repeat(*s).take(sps));
            }
            out
        }
        PulseKind::RootRaisedCosine => {
            let taps = rrc_taps(sps, cfg.span_symbols, cfg.rolloff);
            let delay = (taps.len() - 1) / 2;
            let mut out = vec![Complex64::new(0.0, 0.0); n_out];
            // polyphase: out[k] = sum_m sym[m] * h[k + delay - m*sps]
            for (k, o) in out.iter_mut().enumerate() {
                let kk = k + delay;
                let m_hi = (kk / sps).min(symbols.len() - 1);
                let m_lo = kk.saturating_sub(taps.len() - 1).div_ceil(sps);
                let mut acc = Complex64::new(0.0, 0.0);
                for m in m_lo..=m_hi {
                    acc += symbols[m] * taps[kk - m * sps];
                }
                *o = acc;
            }
            out
        }
    };
    Waveform::new(samples, sample_rate_hz)
}

/// Synthesize a modulated waveform from bits at `sample_rate_hz`.
///
/// Linear schemes go through [`map_symbols`] + [`pulse_shape`]; BFSK uses
/// continuous-phase synthesis holding each tone for a symbol period.
pub fn modulate(
    bits: &[u8],
    scheme: ModulationScheme,
    cfg: &PulseShapeConfig,
    sample_rate_hz: f64,
) -> Result<Waveform> {
    let symbols = map_symbols(bits, scheme)?;
    match scheme {
        ModulationScheme::Bfsk { tone_separation_hz } => {
            cfg.validate()?;
            let sps = cfg.samples_per_symbol;
            let mut out = Vec::with_capacity(symbols.len() * sps);
            let mut phase = 0.0f64;
            for s in &symbols {
                let freq = 0.5 * tone_separation_hz * s.re;
                let dphi = TAU * freq / sample_rate_hz;
                for _ in 0..sps {
                    out.push(Complex64::from_polar(1.0, phase));
                    phase += dphi;
                    phase %= TAU;
                }
            }
            Waveform::new(out, sample_rate_hz)
        }
        _ => pulse_shape(&symbols, cfg, sample_rate_hz),
    }
}

/// Complex exponential tone: `samples[k] = exp(j 2 pi f k / rate)`.
pub fn generate_tone(freq_hz: f64, rate_hz: f64, n: usize) -> Result<Waveform> {
    if freq_hz.abs() >= rate_hz / 2.0 {
        return Err(Error::Aliasing { freq_hz, rate_hz });
    }
    let step = TAU * freq_hz / rate_hz;
    let samples = (0..n)
        .map(|k| Complex64::from_polar(1.0, step * k as f64))
        .collect();
    Waveform::new(samples, rate_hz)
}
