//! AWGN channel and the receiver capture model.
//!
//! The receiver realizes the in-band versus in-band+out-of-band comparison:
//! both capture modes low-pass filter the internal-rate waveform and decimate
//! to their capture bandwidth, emitting frames of the same sample count that
//! span different slices of spectrum (and time).

use crate::seeds;
use crate::{Error, Result, Waveform};
use num_complex::Complex64;

/// Ratio of the internal simulation rate to the message bandwidth.
pub const INTERNAL_OVERSAMPLE: usize = 16;
/// Capture bandwidth of the wideband mode, in message bandwidths.
pub const OOB_CAPTURE_FACTOR: usize = 8;
/// Common warmup offset (internal samples) skipped by both capture modes so
/// their outputs are aligned to the same input time origin.
const CAPTURE_WARMUP: usize = 1024;

/// Receiver capture bandwidth selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptureMode {
    /// Capture only the message bandwidth.
    InBandOnly,
    /// Capture 8x the message bandwidth, spanning the out-of-band domain.
    WithOob,
}

impl CaptureMode {
    /// Decimation factor from the internal rate to the capture rate.
    pub fn decimation(&self) -> usize {
        match self {
            CaptureMode::InBandOnly => INTERNAL_OVERSAMPLE,
            CaptureMode::WithOob => INTERNAL_OVERSAMPLE / OOB_CAPTURE_FACTOR,
        }
    }

    /// Capture bandwidth in units of the message bandwidth.
    pub fn bandwidth_factor(&self) -> usize {
        match self {
            CaptureMode::InBandOnly => 1,
            CaptureMode::WithOob => OOB_CAPTURE_FACTOR,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CaptureMode::InBandOnly => "in-band",
            CaptureMode::WithOob => "with-oob",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "in-band" => Ok(CaptureMode::InBandOnly),
            "with-oob" => Ok(CaptureMode::WithOob),
            other => Err(Error::Dataset(format!("unknown capture mode '{other}'"))),
        }
    }
}

/// AWGN channel parameters. `snr_db` is the per-sample complex SNR at the
/// internal rate; values of +300 or more mean a noiseless channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub snr_db: f64,
    pub seed: u64,
}

/// Sentinel SNR above which the channel adds no noise at all.
pub const NOISELESS_SNR_DB: f64 = 300.0;

/// Add complex white Gaussian noise at the configured SNR.
///
/// Noise variance is `P/10^(snr/10)` with `P` the measured mean power of the
/// input; the realization is fixed by the config seed.
pub fn add_awgn(w: &Waveform, cfg: &ChannelConfig) -> Waveform {
    if cfg.snr_db >= NOISELESS_SNR_DB {
        return w.clone();
    }
    let p = w.mean_power();
    let sigma = (p / 10f64.powf(cfg.snr_db / 10.0) / 2.0).sqrt();
    let mut rng = seeds::rng(&[cfg.seed]);
    let samples = w
        .samples
        .iter()
        .map(|s| {
            let (a, b) = seeds::gaussian_pair(&mut rng);
            s + Complex64::new(sigma * a, sigma * b)
        })
        .collect();
    Waveform { samples, sample_rate_hz: w.sample_rate_hz }
}

/// Blackman-windowed-sinc lowpass taps, unity DC gain.
///
/// `cutoff` is in cycles per sample. Stopband rejection is around -74 dB.
pub fn lowpass_taps(cutoff: f64, ntaps: usize) -> Vec<f64> {
    assert!(ntaps % 2 == 1, "use an odd tap count for integer group delay");
    let mid = (ntaps - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = (0..ntaps)
        .map(|i| {
            let x = i as f64 - mid;
            let sinc = if x == 0.0 {
                2.0 * cutoff
            } else {
                (std::f64::consts::TAU * cutoff * x).sin() / (std::f64::consts::PI * x)
            };
            let w = 0.42
                - 0.5 * (std::f64::consts::TAU * i as f64 / (ntaps - 1) as f64).cos()
                + 0.08 * (2.0 * std::f64::consts::TAU * i as f64 / (ntaps - 1) as f64).cos();
            sinc * w
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

fn capture_taps(mode: CaptureMode) -> Vec<f64> {
    match mode {
        // narrow transition so the message band survives the 16x decimation
        CaptureMode::InBandOnly => lowpass_taps(0.5 / INTERNAL_OVERSAMPLE as f64, 551),
        CaptureMode::WithOob => {
            lowpass_taps(0.5 * OOB_CAPTURE_FACTOR as f64 / INTERNAL_OVERSAMPLE as f64, 127)
        }
    }
}

/// Number of internal samples needed to capture `n_out` output samples.
pub fn required_input_len(mode: CaptureMode, n_out: usize) -> usize {
    let m = mode.decimation();
    let taps = match mode {
        CaptureMode::InBandOnly => 551,
        CaptureMode::WithOob => 127,
    };
    CAPTURE_WARMUP + n_out * m + taps
}

/// Filter to the capture bandwidth and decimate to the capture rate.
///
/// The filter is linear-phase; its group delay is removed so output sample
/// `m` corresponds to input time `(CAPTURE_WARMUP + m*M) / rate` in both
/// modes. Only fully-supported outputs are emitted (no zero-padded edges).
pub fn capture(w: &Waveform, mode: CaptureMode) -> Result<Waveform> {
    let m = mode.decimation();
    let taps = capture_taps(mode);
    let delay = (taps.len() - 1) / 2;
    debug_assert!(CAPTURE_WARMUP >= delay);

    // y[k] = sum_t h[t] x[k + delay - t], emitted at k = warmup + j*M
    let first = CAPTURE_WARMUP;
    if w.len() < first + taps.len() - delay {
        return Err(Error::ShortInput { need: first + taps.len() - delay, got: w.len() });
    }
    let n_out = (w.len() - 1 - delay - first) / m + 1;
    let mut out = Vec::with_capacity(n_out);
    for j in 0..n_out {
        let k = first + j * m;
        let base = k + delay;
        let mut acc = Complex64::new(0.0, 0.0);
        for (t, h) in taps.iter().enumerate() {
            acc += *h * w.samples[base - t];
        }
        out.push(acc);
    }
    if out.is_empty() {
        return Err(Error::ShortInput { need: first + delay + 1, got: w.len() });
    }
    Waveform::new(out, w.sample_rate_hz / m as f64)
}

/// A labeled 2x1024 real-valued IQ tensor, the classifier's input unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// Row-major 2 x `frame_len` values: row 0 holds I, row 1 holds Q.
    pub data: Vec<f32>,
    pub label: u8,
}

impl Frame {
    pub fn frame_len(&self) -> usize {
        self.data.len() / 2
    }
}

/// Slice a waveform into consecutive non-overlapping frames.
///
/// Each frame is `frame_len` complex samples emitted as a 2 x frame_len real
/// tensor. With `normalize` set, every frame is scaled to unit mean complex
/// power (a constant 1+1j frame becomes all 1/sqrt(2) entries).
pub fn frame_slice(w: &Waveform, frame_len: usize, normalize: bool) -> Result<Vec<Frame>> {
    if w.len() < frame_len {
        return Err(Error::ShortInput { need: frame_len, got: w.len() });
    }
    let mut frames = Vec::with_capacity(w.len() / frame_len);
    for chunk in w.samples.chunks_exact(frame_len) {
        let mut data = vec![0f32; 2 * frame_len];
        let mut power = 0.0f64;
        for (i, s) in chunk.iter().enumerate() {
            data[i] = s.re as f32;
            data[frame_len + i] = s.im as f32;
            power += s.norm_sqr();
        }
        if normalize {
            let rms = (power / frame_len as f64).sqrt();
            if rms > 0.0 {
                let g = (1.0 / rms) as f32;
                for v in &mut data {
                    *v *= g;
                }
            }
        }
        frames.push(Frame { data, label: 0 });
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseband::generate_tone;
    use crate::spectral::{band_power, welch_psd, WindowKind};

    const RATE: f64 = 16.0e5;
    const BMSG: f64 = RATE / INTERNAL_OVERSAMPLE as f64;

    #[test]
    fn awgn_noiseless_sentinel_is_identity() {
        let w = generate_tone(0.1 * BMSG, RATE, 256).unwrap();
        let out = add_awgn(&w, &ChannelConfig { snr_db: 300.0, seed: 1 });
        assert_eq!(out.samples, w.samples);
    }

    #[test]
    fn awgn_power_matches_configured_snr() {
        let w = generate_tone(0.1 * BMSG, RATE, 1_000_000).unwrap();
        let out = add_awgn(&w, &ChannelConfig { snr_db: 10.0, seed: 3 });
        let noise_power: f64 = out
            .samples
            .iter()
            .zip(&w.samples)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / w.len() as f64;
        assert!((noise_power - 0.1).abs() < 0.001, "noise power {noise_power}");
    }

    #[test]
    fn awgn_is_seed_deterministic() {
        let w = generate_tone(0.1 * BMSG, RATE, 512).unwrap();
        let a = add_awgn(&w, &ChannelConfig { snr_db: 20.0, seed: 9 });
        let b = add_awgn(&w, &ChannelConfig { snr_db: 20.0, seed: 9 });
        assert_eq!(a.samples, b.samples);
        let c = add_awgn(&w, &ChannelConfig { snr_db: 20.0, seed: 10 });
        assert_ne!(a.samples, c.samples);
    }

    fn tone_capture_power(freq: f64, mode: CaptureMode) -> f64 {
        let n = required_input_len(mode, 4096);
        let w = generate_tone(freq, RATE, n).unwrap();
        let cap = capture(&w, mode).unwrap();
        let trimmed = Waveform::new(cap.samples[..4096].to_vec(), cap.sample_rate_hz).unwrap();
        let psd = welch_psd(&trimmed, 1024, 0.5, WindowKind::Hann).unwrap();
        let lo = (freq - 8.0 * psd.resolution_hz).max(psd.freqs_hz[0]);
        let hi = freq + 8.0 * psd.resolution_hz;
        band_power(&psd, lo, hi).unwrap()
    }

    #[test]
    fn in_band_tone_passes_both_modes_equally() {
        let f = 0.3 * BMSG;
        let p_ib = tone_capture_power(f, CaptureMode::InBandOnly);
        let p_oob = tone_capture_power(f, CaptureMode::WithOob);
        assert!((p_ib - p_oob).abs() < 0.1, "ib {p_ib} dB vs oob {p_oob} dB");
        assert!(p_ib.abs() < 0.1, "in-band tone should keep unit power, got {p_ib} dB");
    }

    #[test]
    fn oob_tone_rejected_in_band_kept_wideband() {
        let f = 2.5 * BMSG;
        let p_oob = tone_capture_power(f, CaptureMode::WithOob);
        assert!(p_oob.abs() < 0.1, "oob capture should keep the tone, got {p_oob} dB");

        // in-band capture: the tone aliases after decimation; total output
        // power bounds the leakage regardless of where it lands
        let n = required_input_len(CaptureMode::InBandOnly, 4096);
        let w = generate_tone(f, RATE, n).unwrap();
        let cap = capture(&w, CaptureMode::InBandOnly).unwrap();
        let p = cap.mean_power();
        assert!(
            10.0 * p.log10() <= -60.0,
            "in-band capture leaves {} dB of an OOB tone",
            10.0 * p.log10()
        );
    }

    #[test]
    fn dc_passes_unchanged_in_both_modes() {
        let c = Complex64::new(0.7, -0.3);
        for mode in [CaptureMode::InBandOnly, CaptureMode::WithOob] {
            let n = required_input_len(mode, 64);
            let w = Waveform::new(vec![c; n], RATE).unwrap();
            let cap = capture(&w, mode).unwrap();
            for s in &cap.samples[..64] {
                assert!((s - c).norm() < 1e-12, "mode {mode:?}");
            }
        }
    }

    #[test]
    fn capture_energy_nonincreasing() {
        let mut w = generate_tone(0.4 * BMSG, RATE, required_input_len(CaptureMode::WithOob, 1024)).unwrap();
        // add some wideband content
        let mut rng = crate::seeds::rng(&[5]);
        for s in &mut w.samples {
            let (a, b) = crate::seeds::gaussian_pair(&mut rng);
            *s += Complex64::new(0.3 * a, 0.3 * b);
        }
        let energy_in: f64 = w.samples.iter().map(|s| s.norm_sqr()).sum();
        for mode in [CaptureMode::InBandOnly, CaptureMode::WithOob] {
            let cap = capture(&w, mode).unwrap();
            let energy_out: f64 = cap.samples.iter().map(|s| s.norm_sqr()).sum();
            assert!(energy_out <= energy_in, "mode {mode:?}");
        }
    }

    #[test]
    fn capture_rejects_short_input() {
        let w = generate_tone(0.0, RATE, 64).unwrap();
        assert!(matches!(capture(&w, CaptureMode::WithOob), Err(Error::ShortInput { .. })));
    }

    #[test]
    fn frame_slice_counts_and_layout() {
        let samples: Vec<Complex64> = (0..2048)
            .map(|k| Complex64::new(k as f64, -(k as f64)))
            .collect();
        let w = Waveform::new(samples, 1.0).unwrap();
        let frames = frame_slice(&w, 1024, false).unwrap();
        assert_eq!(frames.len(), 2);
        for (i, f) in frames.iter().enumerate() {
            assert_eq!(f.frame_len(), 1024);
            for k in 0..1024 {
                assert_eq!(f.data[k], (i * 1024 + k) as f32);
                assert_eq!(f.data[1024 + k], -((i * 1024 + k) as f32));
            }
        }
    }

    #[test]
    fn frame_slice_normalization() {
        let w = Waveform::new(vec![Complex64::new(1.0, 1.0); 1024], 1.0).unwrap();
        let frames = frame_slice(&w, 1024, true).unwrap();
        let expect = 1.0 / 2.0f32.sqrt();
        for v in &frames[0].data {
            assert!((v - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn frame_slice_is_lossless_without_normalization() {
        let samples: Vec<Complex64> = (0..3000)
            .map(|k| Complex64::new((k as f64 * 0.1).sin(), (k as f64 * 0.07).cos()))
            .collect();
        let w = Waveform::new(samples.clone(), 1.0).unwrap();
        let frames = frame_slice(&w, 1000, false).unwrap();
        assert_eq!(frames.len(), 3);
        for (i, f) in frames.iter().enumerate() {
            for k in 0..1000 {
                let orig = samples[i * 1000 + k];
                assert_eq!(f.data[k], orig.re as f32);
                assert_eq!(f.data[1000 + k], orig.im as f32);
            }
        }
    }

    #[test]
    fn frame_slice_short_input() {
        let w = Waveform::new(vec![Complex64::new(0.0, 0.0); 10], 1.0).unwrap();
        assert!(matches!(frame_slice(&w, 1024, false), Err(Error::ShortInput { .. })));
    }
}
