//! Power spectral density estimation and out-of-band metrics.
//!
//! [`welch_psd`] produces two-sided PSDs on the unit-power convention: the
//! integral of a unit-amplitude tone's PSD is 0 dB. Band powers, ACPR, DC
//! spurs and phase-noise mask deviations are all computed from a
//! [`PsdEstimate`].

use crate::{Error, Result, Waveform};
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Numerical floor for log-power values, in dB.
pub const POWER_FLOOR_DB: f64 = -300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hann,
    Rectangular,
}

impl WindowKind {
    fn coefficient(&self, i: usize, n: usize) -> f64 {
        match self {
            WindowKind::Rectangular => 1.0,
            WindowKind::Hann => {
                let x = std::f64::consts::TAU * i as f64 / n as f64;
                0.5 * (1.0 - x.cos())
            }
        }
    }
}

/// Two-sided power spectral density with an ascending frequency axis.
///
/// `power_db` is in dB of power per Hz; integrating linear power over the
/// axis recovers the signal's mean power (0 dB total for a unit tone). The
/// Nyquist bin is dropped so the axis is symmetric about 0.
#[derive(Debug, Clone)]
pub struct PsdEstimate {
    pub freqs_hz: Vec<f64>,
    pub power_db: Vec<f64>,
    pub resolution_hz: f64,
}

impl PsdEstimate {
    fn bin_width(&self) -> f64 {
        self.resolution_hz
    }

    /// Linear power integrated over `[f_lo, f_hi)` using half-open bin
    /// membership, so adjacent bands sum exactly to their union.
    fn linear_band_power(&self, f_lo: f64, f_hi: f64) -> Result<f64> {
        // the dropped Nyquist bin leaves one bin of slack on each edge
        let span_lo = self.freqs_hz[0] - self.bin_width();
        let span_hi = self.freqs_hz[self.freqs_hz.len() - 1] + self.bin_width();
        if !(f_lo < f_hi) || f_lo < span_lo - 1e-9 || f_hi > span_hi + 1e-9 {
            return Err(Error::BandOutOfSpan { lo: f_lo, hi: f_hi });
        }
        let mut acc = 0.0;
        for (f, p) in self.freqs_hz.iter().zip(&self.power_db) {
            if *f >= f_lo && *f < f_hi {
                acc += 10f64.powf(p / 10.0) * self.bin_width();
            }
        }
        Ok(acc)
    }

    /// Total integrated power in dB.
    pub fn total_power_db(&self) -> f64 {
        let total: f64 = self
            .power_db
            .iter()
            .map(|p| 10f64.powf(p / 10.0) * self.bin_width())
            .sum();
        10.0 * total.max(1e-30).log10()
    }
}

/// Averaged modified periodogram (Welch's method) of a complex waveform.
pub fn welch_psd(
    w: &Waveform,
    segment_len: usize,
    overlap_frac: f64,
    window: WindowKind,
) -> Result<PsdEstimate> {
    if segment_len == 0 || w.len() < segment_len {
        return Err(Error::ShortInput { need: segment_len, got: w.len() });
    }
    if !(0.0..1.0).contains(&overlap_frac) {
        return Err(Error::InvalidWaveform(format!("overlap {overlap_frac} outside [0,1)")));
    }
    let n = segment_len;
    let overlap = (n as f64 * overlap_frac) as usize;
    let hop = (n - overlap).max(1);
    let n_segments = (w.len() - n) / hop + 1;

    let win: Vec<f64> = (0..n).map(|i| window.coefficient(i, n)).collect();
    let win_energy: f64 = win.iter().map(|v| v * v).sum();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut acc = vec![0.0f64; n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for seg in 0..n_segments {
        let start = seg * hop;
        for i in 0..n {
            buf[i] = w.samples[start + i] * win[i];
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }

    // normalize to power per Hz: divide by fs * window energy * segments
    let fs = w.sample_rate_hz;
    let scale = 1.0 / (fs * win_energy * n_segments as f64);
    let df = fs / n as f64;

    // fftshift and drop the Nyquist bin so freqs are symmetric about 0
    let half = n / 2;
    let kept = if n % 2 == 0 { n - 1 } else { n };
    let mut freqs = Vec::with_capacity(kept);
    let mut power = Vec::with_capacity(kept);
    let first_bin = if n % 2 == 0 { half + 1 } else { half + 1 };
    for i in 0..kept {
        let bin = (first_bin + i) % n;
        let k_signed = if bin <= half && !(n % 2 == 0 && bin == half) {
            bin as isize
        } else {
            bin as isize - n as isize
        };
        freqs.push(k_signed as f64 * df);
        power.push(10.0 * (acc[bin] * scale).max(1e-30).log10());
    }
    debug_assert!(freqs.windows(2).all(|p| p[0] < p[1]));

    Ok(PsdEstimate { freqs_hz: freqs, power_db: power, resolution_hz: df })
}

/// Integrated power over a band, in dB.
pub fn band_power(psd: &PsdEstimate, f_lo: f64, f_hi: f64) -> Result<f64> {
    Ok(10.0 * psd.linear_band_power(f_lo, f_hi)?.max(1e-30).log10())
}

/// Adjacent-channel power ratio: adjacent band power minus main band power.
pub fn acpr(
    psd: &PsdEstimate,
    main: (f64, f64),
    adjacent: (f64, f64),
) -> Result<f64> {
    let disjoint = main.1 <= adjacent.0 || adjacent.1 <= main.0;
    if !disjoint {
        return Err(Error::OverlappingBands {
            main_lo: main.0,
            main_hi: main.1,
            adj_lo: adjacent.0,
            adj_hi: adjacent.1,
        });
    }
    Ok(band_power(psd, adjacent.0, adjacent.1)? - band_power(psd, main.0, main.1)?)
}

/// Power in the resolution band centered at 0 Hz, in dB.
///
/// The band spans +/-1.5 resolution bins, wide enough to hold the windowed
/// main lobe of a DC line.
pub fn dc_spur_db(psd: &PsdEstimate) -> f64 {
    let half = 1.5 * psd.resolution_hz;
    band_power(psd, -half, half).unwrap_or(POWER_FLOOR_DB)
}

/// Deviation of measured phase-noise sidebands from a target mask.
///
/// For each offset the single-sideband density is measured on both sides of
/// the carrier and folded (summed), matching the one-sided PSD convention of
/// the synthesis mask, then normalized by the total (carrier) power and the
/// window's noise-equivalent resolution. Returns measured-minus-target in dB.
pub fn mask_deviation(
    psd: &PsdEstimate,
    offsets_hz: &[f64],
    levels_dbchz: &[f64],
) -> Result<Vec<f64>> {
    if offsets_hz.len() != levels_dbchz.len() {
        return Err(Error::InvalidMask("offsets/levels length mismatch".into()));
    }
    let carrier_db = psd.total_power_db();
    let mut deviations = Vec::with_capacity(offsets_hz.len());
    for (&f, &level) in offsets_hz.iter().zip(levels_dbchz) {
        let span_hi = psd.freqs_hz[psd.freqs_hz.len() - 1];
        if f <= 0.0 || f > span_hi {
            return Err(Error::BandOutOfSpan { lo: f, hi: f });
        }
        // average density over a few bins on each sideband, then fold
        let half = 2.0 * psd.resolution_hz;
        let upper = psd.linear_band_power(f - half, f + half)?;
        let lower = psd.linear_band_power(-f - half, -f + half)?;
        let width = 2.0 * half;
        let folded_density = (upper + lower) / width;
        let measured_dbchz = 10.0 * folded_density.max(1e-30).log10() - carrier_db;
        deviations.push(measured_dbchz - level);
    }
    Ok(deviations)
}

/// Write a PSD as a two-column text file: `# freq_hz power_db` header then
/// one full-precision pair per line.
pub fn write_psd(psd: &PsdEstimate, path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# freq_hz power_db")?;
    for (freq, p) in psd.freqs_hz.iter().zip(&psd.power_db) {
        writeln!(f, "{:e} {:e}", freq, p)?;
    }
    Ok(())
}
