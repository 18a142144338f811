//! Device-specific transmitter impairments, applied in physical chain order:
//! DAC -> IQ imbalance -> DC offset -> mixer nonlinearity -> LO phase noise
//! -> power amplifier -> carrier frequency offset.
//!
//! Everything is modeled at complex baseband: passband terms at multiples of
//! the carrier are dropped, as they would be removed by receiver filtering.
//! Each operation with its neutral parameters is the exact identity, so a
//! default profile passes waveforms through bit-unchanged.

use crate::seeds;
use crate::{Error, Result, Waveform};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::TAU;

/// Power amplifier selection for a device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PaConfig {
    /// Unity-gain linear amplifier (the neutral sentinel).
    Linear,
    /// Saleh model: `A(r) = aa*r/(1+ba*r^2)`, `phi(r) = ap*r^2/(1+bp*r^2)`.
    Saleh { aa: f64, ba: f64, ap: f64, bp: f64 },
}

/// DAC distortion parameters: vertical quantization (VQ), zero-order-hold
/// horizontal quantization (HQ) and periodic clock modulation (CM).
#[derive(Debug, Clone, PartialEq)]
pub struct DacConfig {
    /// Vertical resolution; `None` disables quantization and INL.
    pub bits: Option<u32>,
    /// Internal samples per DAC generation period (1 = generate at the
    /// internal rate, i.e. no staircase).
    pub gen_oversample: usize,
    /// Integral nonlinearity polynomial `T(x) = c0 + c1 x + c2 x^2 + ...`
    /// added to the quantized level.
    pub inl_coeffs: Vec<f64>,
    /// Amplitude of the periodic generation-period deviation, as a fraction
    /// of the generation period. Must stay below 0.5.
    pub clock_mod_depth: f64,
    /// Frequency of the clock modulation in Hz.
    pub clock_mod_freq_hz: f64,
}

impl DacConfig {
    /// Configuration under which `apply_dac` is the identity.
    pub fn disabled() -> Self {
        Self {
            bits: None,
            gen_oversample: 1,
            inl_coeffs: Vec::new(),
            clock_mod_depth: 0.0,
            clock_mod_freq_hz: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(b) = self.bits {
            if b == 0 {
                return Err(Error::InvalidProfile("dac bits must be >= 1".into()));
            }
        }
        if self.gen_oversample == 0 {
            return Err(Error::InvalidProfile("dac gen_oversample must be >= 1".into()));
        }
        if !(0.0..0.5).contains(&self.clock_mod_depth) {
            return Err(Error::InvalidProfile("dac clock_mod_depth must be in [0, 0.5)".into()));
        }
        Ok(())
    }
}

/// All per-device impairment parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    pub name: String,
    /// Amplitude mismatch in dB, applied as attenuation of the I branch.
    pub iq_amp_db: f64,
    /// Quadrature phase deviation in degrees.
    pub iq_phase_deg: f64,
    pub dc_i: f64,
    pub dc_q: f64,
    pub pa: PaConfig,
    /// Phase-noise mask levels in dBc/Hz; empty disables phase noise.
    pub pn_levels_dbchz: Vec<f64>,
    /// Mask frequency offsets in Hz, strictly increasing, paired with levels.
    pub pn_offsets_hz: Vec<f64>,
    pub dac: Option<DacConfig>,
    pub mixer_alpha1: f64,
    pub mixer_alpha2: f64,
    pub cfo_hz: f64,
    /// Per-device noise seed for phase-noise synthesis.
    pub seed: u64,
}

impl DeviceProfile {
    /// The all-neutral profile: passes waveforms through unchanged.
    pub fn neutral(name: &str) -> Self {
        Self {
            name: name.to_string(),
            iq_amp_db: 0.0,
            iq_phase_deg: 0.0,
            dc_i: 0.0,
            dc_q: 0.0,
            pa: PaConfig::Linear,
            pn_levels_dbchz: Vec::new(),
            pn_offsets_hz: Vec::new(),
            dac: None,
            mixer_alpha1: 1.0,
            mixer_alpha2: 0.0,
            cfo_hz: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pn_levels_dbchz.len() != self.pn_offsets_hz.len() {
            return Err(Error::InvalidProfile("phase-noise level/offset vectors differ in length".into()));
        }
        if !self.pn_offsets_hz.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidProfile("phase-noise offsets must be strictly increasing".into()));
        }
        if self.pn_offsets_hz.iter().any(|&f| f <= 0.0) {
            return Err(Error::InvalidProfile("phase-noise offsets must be positive".into()));
        }
        if let PaConfig::Saleh { ba, bp, .. } = self.pa {
            if ba <= 0.0 || bp <= 0.0 {
                return Err(Error::InvalidProfile("saleh beta values must be positive".into()));
            }
        }
        if let Some(dac) = &self.dac {
            dac.validate()?;
        }
        Ok(())
    }

    pub fn has_phase_noise(&self) -> bool {
        !self.pn_levels_dbchz.is_empty()
    }
}

/// Clip/quantization bookkeeping from a DAC pass.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DacReport {
    /// Number of real components that exceeded full scale and saturated.
    pub clipped_samples: u64,
}

fn dac_component(x: &[f64], cfg: &DacConfig, fs: f64, clipped: &mut u64) -> Vec<f64> {
    let g = cfg.gen_oversample;
    let n_periods = x.len().div_ceil(g);

    // sample-and-process one level per generation period
    let mut levels = Vec::with_capacity(n_periods);
    for p in 0..n_periods {
        let mut v = x[p * g];
        if v.abs() > 1.0 {
            *clipped += 1;
            v = v.clamp(-1.0, 1.0);
        }
        if let Some(bits) = cfg.bits {
            // uniform levels spanning [-1, 1] inclusive
            let nlv = (1u64 << bits) as f64 - 1.0;
            v = ((v + 1.0) / 2.0 * nlv).round() / nlv * 2.0 - 1.0;
        }
        if !cfg.inl_coeffs.is_empty() {
            let mut t = 0.0;
            for &c in cfg.inl_coeffs.iter().rev() {
                t = t * v + c;
            }
            v += t;
        }
        levels.push(v);
    }

    // zero-order-hold reconstruction onto the (possibly jittered) grid
    let tg = g as f64;
    let edge = |p: usize| -> f64 {
        let ideal = p as f64 * tg;
        if cfg.clock_mod_depth == 0.0 {
            ideal
        } else {
            ideal + cfg.clock_mod_depth * tg * (TAU * cfg.clock_mod_freq_hz * ideal / fs).sin()
        }
    };
    let mut out = Vec::with_capacity(x.len());
    let mut p = 0usize;
    let mut next_edge = edge(1);
    for k in 0..x.len() {
        while p + 1 < n_periods && next_edge <= k as f64 {
            p += 1;
            next_edge = edge(p + 1);
        }
        out.push(levels[p]);
    }
    out
}

/// DAC distortion on the I and Q paths independently.
///
/// Values beyond full scale (+/-1 per component) saturate and are counted in
/// the report. With `DacConfig::disabled()` the output equals the input.
pub fn apply_dac(w: &Waveform, cfg: &DacConfig) -> Result<(Waveform, DacReport)> {
    cfg.validate()?;
    let mut report = DacReport::default();
    let re: Vec<f64> = w.samples.iter().map(|s| s.re).collect();
    let im: Vec<f64> = w.samples.iter().map(|s| s.im).collect();
    let re_out = dac_component(&re, cfg, w.sample_rate_hz, &mut report.clipped_samples);
    let im_out = dac_component(&im, cfg, w.sample_rate_hz, &mut report.clipped_samples);
    let samples = re_out
        .into_iter()
        .zip(im_out)
        .map(|(r, i)| Complex64::new(r, i))
        .collect();
    Ok((Waveform { samples, sample_rate_hz: w.sample_rate_hz }, report))
}

/// Amplitude/phase mismatch between the upconversion branches.
///
/// Baseband equivalent of attenuating the I branch by `g = 10^(-amp_db/20)`
/// and skewing the Q-branch carrier by `phase_deg`:
/// `I' = g I - Q sin(dtheta)`, `Q' = Q cos(dtheta)`.
pub fn apply_iq_imbalance(w: &Waveform, iq_amp_db: f64, iq_phase_deg: f64) -> Waveform {
    let g = 10f64.powf(-iq_amp_db / 20.0);
    let (sin_t, cos_t) = iq_phase_deg.to_radians().sin_cos();
    let samples = w
        .samples
        .iter()
        .map(|s| Complex64::new(g * s.re - s.im * sin_t, s.im * cos_t))
        .collect();
    Waveform { samples, sample_rate_hz: w.sample_rate_hz }
}

/// LO leakage as a constant complex shift.
pub fn apply_dc_offset(w: &Waveform, dc_i: f64, dc_q: f64) -> Waveform {
    let dc = Complex64::new(dc_i, dc_q);
    let samples = w.samples.iter().map(|s| s + dc).collect();
    Waveform { samples, sample_rate_hz: w.sample_rate_hz }
}

/// Second-order mixer nonlinearity, baseband equivalent
/// `out = a1 s + (a2/2) |s|^2` (the envelope-squared term lands on the real
/// axis; components at twice the carrier are dropped).
pub fn apply_mixer_second_order(w: &Waveform, alpha1: f64, alpha2: f64) -> Waveform {
    let samples = w
        .samples
        .iter()
        .map(|s| alpha1 * s + Complex64::new(0.5 * alpha2 * s.norm_sqr(), 0.0))
        .collect();
    Waveform { samples, sample_rate_hz: w.sample_rate_hz }
}

/// Synthesize a phase-noise sequence matching a dBc/Hz spectral mask.
///
/// The mask gives the one-sided PSD of the phase process at each offset;
/// between points it is interpolated linearly in (log10 f, dB) and held flat
/// below the first and above the last offset. Synthesis shapes a complex
/// Gaussian spectrum by the mask and inverse-transforms, so a Welch estimate
/// of a long realization reproduces the mask at the specified offsets.
pub fn synthesize_phase_noise(
    n: usize,
    rate_hz: f64,
    levels_dbchz: &[f64],
    offsets_hz: &[f64],
    seed: u64,
) -> Result<Vec<f64>> {
    if levels_dbchz.is_empty() || levels_dbchz.len() != offsets_hz.len() {
        return Err(Error::InvalidMask("need equal, nonzero numbers of levels and offsets".into()));
    }
    if !offsets_hz.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidMask("offsets must be strictly increasing".into()));
    }
    if offsets_hz[0] <= 0.0 {
        return Err(Error::InvalidMask("offsets must be positive".into()));
    }
    if *offsets_hz.last().unwrap() >= rate_hz / 2.0 {
        return Err(Error::InvalidMask(format!(
            "max offset {} Hz must stay below Nyquist {}",
            offsets_hz.last().unwrap(),
            rate_hz / 2.0
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    let log_f: Vec<f64> = offsets_hz.iter().map(|f| f.log10()).collect();
    let mask_db = |f: f64| -> f64 {
        let lf = f.log10();
        if lf <= log_f[0] {
            levels_dbchz[0]
        } else if lf >= *log_f.last().unwrap() {
            *levels_dbchz.last().unwrap()
        } else {
            let i = log_f.partition_point(|&x| x < lf).max(1);
            let (x0, x1) = (log_f[i - 1], log_f[i]);
            let (y0, y1) = (levels_dbchz[i - 1], levels_dbchz[i]);
            y0 + (y1 - y0) * (lf - x0) / (x1 - x0)
        }
    };

    let mut rng = seeds::rng(&[seed]);
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    let df = rate_hz / n as f64;
    let half = n / 2;
    for k in 1..=half {
        let psd = 10f64.powf(mask_db(k as f64 * df) / 10.0);
        // conjugate-pair amplitude giving one-sided PSD `psd` in the output
        let scale = (psd * rate_hz * n as f64 / 2.0).sqrt();
        let (ga, gb) = seeds::gaussian_pair(&mut rng);
        if 2 * k == n {
            // self-conjugate Nyquist bin must stay real
            spectrum[k] = Complex64::new(ga * scale, 0.0);
        } else {
            let v = Complex64::new(ga, gb) * std::f64::consts::FRAC_1_SQRT_2 * scale;
            spectrum[k] = v;
            spectrum[n - k] = v.conj();
        }
    }

    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(n);
    ifft.process(&mut spectrum);
    let inv_n = 1.0 / n as f64;
    Ok(spectrum.iter().map(|s| s.re * inv_n).collect())
}

/// Rotate each sample by its phase-noise angle: `out[k] = w[k] exp(j theta[k])`.
pub fn apply_phase_noise(w: &Waveform, theta: &[f64]) -> Result<Waveform> {
    if theta.len() != w.len() {
        return Err(Error::LengthMismatch { expected: w.len(), got: theta.len() });
    }
    let samples = w
        .samples
        .iter()
        .zip(theta)
        .map(|(s, &t)| s * Complex64::from_polar(1.0, t))
        .collect();
    Ok(Waveform { samples, sample_rate_hz: w.sample_rate_hz })
}

/// Saleh-model power amplifier (memoryless AM-AM and AM-PM distortion).
pub fn apply_pa_saleh(w: &Waveform, aa: f64, ba: f64, ap: f64, bp: f64) -> Result<Waveform> {
    if ba <= 0.0 || bp <= 0.0 {
        return Err(Error::InvalidProfile("saleh beta values must be positive".into()));
    }
    let samples = w
        .samples
        .iter()
        .map(|s| {
            let r2 = s.norm_sqr();
            let gain = aa / (1.0 + ba * r2);
            let phase = ap * r2 / (1.0 + bp * r2);
            s * gain * Complex64::from_polar(1.0, phase)
        })
        .collect();
    Ok(Waveform { samples, sample_rate_hz: w.sample_rate_hz })
}

/// Odd-order polynomial power amplifier.
///
/// `coeffs[n]` is the complex coefficient of order `2n+1`; the baseband
/// equivalent of the odd-order passband series is
/// `out = sum_n coeffs[n]/4^n * C(2n+1, n+1) * |s|^(2n) * s`.
pub fn apply_pa_polynomial(w: &Waveform, coeffs: &[Complex64]) -> Result<Waveform> {
    if coeffs.is_empty() {
        return Err(Error::InvalidProfile("polynomial PA needs at least one coefficient".into()));
    }
    // binomial C(2n+1, n+1) scaled by 4^-n
    let weights: Vec<Complex64> = coeffs
        .iter()
        .enumerate()
        .map(|(n, &c)| {
            let mut binom = 1.0f64;
            for i in 0..n {
                binom = binom * (n + 2 + i) as f64 / (i + 1) as f64;
            }
            c * binom / 4f64.powi(n as i32)
        })
        .collect();
    let samples = w
        .samples
        .iter()
        .map(|s| {
            let r2 = s.norm_sqr();
            let mut acc = Complex64::new(0.0, 0.0);
            let mut pow = 1.0;
            for wgt in &weights {
                acc += wgt * pow;
                pow *= r2;
            }
            acc * s
        })
        .collect();
    Ok(Waveform { samples, sample_rate_hz: w.sample_rate_hz })
}

/// Constant carrier frequency offset.
pub fn apply_cfo(w: &Waveform, cfo_hz: f64) -> Result<Waveform> {
    if cfo_hz.abs() >= w.sample_rate_hz / 2.0 {
        return Err(Error::Aliasing { freq_hz: cfo_hz, rate_hz: w.sample_rate_hz });
    }
    if cfo_hz == 0.0 {
        return Ok(w.clone());
    }
    let step = TAU * cfo_hz / w.sample_rate_hz;
    let samples = w
        .samples
        .iter()
        .enumerate()
        .map(|(k, s)| s * Complex64::from_polar(1.0, step * k as f64))
        .collect();
    Ok(Waveform { samples, sample_rate_hz: w.sample_rate_hz })
}

/// Run the full impairment chain in transmitter order.
///
/// `call` is the caller-supplied stream counter; together with the profile
/// seed it fixes the phase-noise realization, so the chain is a pure
/// function of `(waveform, profile, call)`.
pub fn apply_chain(w: &Waveform, profile: &DeviceProfile, call: u64) -> Result<Waveform> {
    profile.validate()?;
    let mut out = match &profile.dac {
        Some(cfg) => apply_dac(w, cfg)?.0,
        None => w.clone(),
    };
    if profile.iq_amp_db != 0.0 || profile.iq_phase_deg != 0.0 {
        out = apply_iq_imbalance(&out, profile.iq_amp_db, profile.iq_phase_deg);
    }
    if profile.dc_i != 0.0 || profile.dc_q != 0.0 {
        out = apply_dc_offset(&out, profile.dc_i, profile.dc_q);
    }
    if profile.mixer_alpha1 != 1.0 || profile.mixer_alpha2 != 0.0 {
        out = apply_mixer_second_order(&out, profile.mixer_alpha1, profile.mixer_alpha2);
    }
    if profile.has_phase_noise() {
        let theta = synthesize_phase_noise(
            out.len(),
            out.sample_rate_hz,
            &profile.pn_levels_dbchz,
            &profile.pn_offsets_hz,
            seeds::derive(&[profile.seed, call]),
        )?;
        out = apply_phase_noise(&out, &theta)?;
    }
    if let PaConfig::Saleh { aa, ba, ap, bp } = profile.pa {
        out = apply_pa_saleh(&out, aa, ba, ap, bp)?;
    }
    if profile.cfo_hz != 0.0 {
        out = apply_cfo(&out, profile.cfo_hz)?;
    }
    Ok(out)
}

/// The five device profiles used throughout the experiments.
pub fn table1_profiles() -> Vec<DeviceProfile> {
    let dev = |name: &str,
               iq_amp: f64,
               iq_phase: f64,
               dc_i: f64,
               dc_q: f64,
               amam: (f64, f64),
               ampm: (f64, f64),
               pn_levels: [f64; 2],
               pn_offsets: [f64; 2],
               seed: u64| DeviceProfile {
        name: name.to_string(),
        iq_amp_db: iq_amp,
        iq_phase_deg: iq_phase,
        dc_i,
        dc_q,
        pa: PaConfig::Saleh { aa: amam.0, ba: amam.1, ap: ampm.0, bp: ampm.1 },
        pn_levels_dbchz: pn_levels.to_vec(),
        pn_offsets_hz: pn_offsets.to_vec(),
        dac: None,
        mixer_alpha1: 1.0,
        mixer_alpha2: 0.0,
        cfo_hz: 0.0,
        seed,
    };
    vec![
        dev("dev1", 0.08, 0.1, 0.1, 0.15, (2.178, 1.12157), (4.0893, 9.2040), [-60.0, -80.0], [20.0, 200.0], 101),
        dev("dev2", 0.1, 0.09, 0.109, 0.1, (2.197, 1.16157), (4.13, 9.2540), [-60.0, -80.0], [20.0, 200.0], 102),
        dev("dev3", 0.09, 0.09, 0.1, 0.1, (2.16, 1.10157), (4.0933, 9.2840), [-59.9, -80.0], [20.0, 200.9], 103),
        dev("dev4", 0.109, 0.108, 0.1, 0.1, (2.17, 1.12157), (4.113, 9.2040), [-60.0, -80.1], [20.0, 200.0], 104),
        dev("dev5", 0.1, 0.099, 0.099, 0.1, (2.1587, 1.15157), (4.133, 9.2040), [-60.0, -80.0], [20.1, 200.0], 105),
    ]
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// Serialize profiles to the key-value configuration format.
pub fn serialize_profiles(profiles: &[DeviceProfile]) -> String {
    let mut out = String::new();
    for p in profiles {
        out.push_str(&format!("[device {}]\n", p.name));
        out.push_str(&format!("iq_amp_db = {}\n", p.iq_amp_db));
        out.push_str(&format!("iq_phase_deg = {}\n", p.iq_phase_deg));
        out.push_str(&format!("dc_i = {}\n", p.dc_i));
        out.push_str(&format!("dc_q = {}\n", p.dc_q));
        match p.pa {
            PaConfig::Linear => out.push_str("pa = linear\n"),
            PaConfig::Saleh { aa, ba, ap, bp } => {
                out.push_str(&format!("saleh_amam = {}, {}\n", aa, ba));
                out.push_str(&format!("saleh_ampm = {}, {}\n", ap, bp));
            }
        }
        if p.has_phase_noise() {
            out.push_str(&format!("pn_levels_dbchz = {}\n", fmt_vec(&p.pn_levels_dbchz)));
            out.push_str(&format!("pn_offsets_hz = {}\n", fmt_vec(&p.pn_offsets_hz)));
        }
        out.push_str(&format!("mixer_alpha1 = {}\n", p.mixer_alpha1));
        out.push_str(&format!("mixer_alpha2 = {}\n", p.mixer_alpha2));
        out.push_str(&format!("cfo_hz = {}\n", p.cfo_hz));
        if let Some(d) = &p.dac {
            if let Some(b) = d.bits {
                out.push_str(&format!("dac_bits = {}\n", b));
            }
            out.push_str(&format!("dac_gen_oversample = {}\n", d.gen_oversample));
            if !d.inl_coeffs.is_empty() {
                out.push_str(&format!("dac_inl_coeffs = {}\n", fmt_vec(&d.inl_coeffs)));
            }
            out.push_str(&format!("dac_clock_mod_depth = {}\n", d.clock_mod_depth));
            out.push_str(&format!("dac_clock_mod_freq_hz = {}\n", d.clock_mod_freq_hz));
        }
        out.push_str(&format!("seed = {}\n\n", p.seed));
    }
    out
}

/// Parse profiles from the key-value configuration format.
///
/// One `[device <name>]` section per profile; `key = value` lines; vectors
/// as comma-separated lists; `#` starts a comment.
pub fn parse_profiles(text: &str) -> Result<Vec<DeviceProfile>> {
    let mut profiles: Vec<DeviceProfile> = Vec::new();
    let perr = |line: usize, msg: String| Error::Parse { file: "profiles".into(), line, msg };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('[') {
            let header = header
                .strip_suffix(']')
                .ok_or_else(|| perr(lineno, "unterminated section header".into()))?;
            let name = header
                .strip_prefix("device")
                .ok_or_else(|| perr(lineno, format!("unknown section '{header}'")))?
                .trim();
            if name.is_empty() {
                return Err(perr(lineno, "device section needs a name".into()));
            }
            let mut p = DeviceProfile::neutral(name);
            // phase noise comes from the file, not the neutral default
            p.pn_levels_dbchz.clear();
            p.pn_offsets_hz.clear();
            profiles.push(p);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| perr(lineno, format!("expected 'key = value', got '{line}'")))?;
        let key = key.trim();
        let value = value.trim();
        let profile = profiles
            .last_mut()
            .ok_or_else(|| perr(lineno, "key outside of a [device] section".into()))?;

        let scalar = |v: &str| -> Result<f64> {
            v.parse::<f64>().map_err(|_| perr(lineno, format!("bad number '{v}'")))
        };
        let vector = |v: &str| -> Result<Vec<f64>> {
            v.split(',').map(|s| scalar(s.trim())).collect()
        };
        let pair = |v: &str| -> Result<(f64, f64)> {
            let vs = vector(v)?;
            if vs.len() != 2 {
                return Err(perr(lineno, format!("expected two values, got {}", vs.len())));
            }
            Ok((vs[0], vs[1]))
        };

        match key {
            "iq_amp_db" => profile.iq_amp_db = scalar(value)?,
            "iq_phase_deg" => profile.iq_phase_deg = scalar(value)?,
            "dc_i" => profile.dc_i = scalar(value)?,
            "dc_q" => profile.dc_q = scalar(value)?,
            "pa" => {
                if value != "linear" {
                    return Err(perr(lineno, format!("unknown pa '{value}'")));
                }
                profile.pa = PaConfig::Linear;
            }
            "saleh_amam" => {
                let (aa, ba) = pair(value)?;
                profile.pa = match profile.pa {
                    PaConfig::Saleh { ap, bp, .. } => PaConfig::Saleh { aa, ba, ap, bp },
                    _ => PaConfig::Saleh { aa, ba, ap: 0.0, bp: 1.0 },
                };
            }
            "saleh_ampm" => {
                let (ap, bp) = pair(value)?;
                profile.pa = match profile.pa {
                    PaConfig::Saleh { aa, ba, .. } => PaConfig::Saleh { aa, ba, ap, bp },
                    _ => PaConfig::Saleh { aa: 1.0, ba: 1.0, ap, bp },
                };
            }
            "pn_levels_dbchz" => profile.pn_levels_dbchz = vector(value)?,
            "pn_offsets_hz" => profile.pn_offsets_hz = vector(value)?,
            "mixer_alpha1" => profile.mixer_alpha1 = scalar(value)?,
            "mixer_alpha2" => profile.mixer_alpha2 = scalar(value)?,
            "cfo_hz" => profile.cfo_hz = scalar(value)?,
            "seed" => {
                profile.seed = value
                    .parse::<u64>()
                    .map_err(|_| perr(lineno, format!("bad seed '{value}'")))?;
            }
            "dac_bits" | "dac_gen_oversample" | "dac_inl_coeffs" | "dac_clock_mod_depth"
            | "dac_clock_mod_freq_hz" => {
                let dac = profile.dac.get_or_insert_with(DacConfig::disabled);
                match key {
                    "dac_bits" => {
                        dac.bits = Some(value.parse::<u32>().map_err(|_| {
                            perr(lineno, format!("bad dac_bits '{value}'"))
                        })?);
                    }
                    "dac_gen_oversample" => {
                        dac.gen_oversample = value.parse::<usize>().map_err(|_| {
                            perr(lineno, format!("bad dac_gen_oversample '{value}'"))
                        })?;
                    }
                    "dac_inl_coeffs" => dac.inl_coeffs = vector(value)?,
                    "dac_clock_mod_depth" => dac.clock_mod_depth = scalar(value)?,
                    _ => dac.clock_mod_freq_hz = scalar(value)?,
                }
            }
            _ => return Err(perr(lineno, format!("unknown key '{key}'"))),
        }
    }

    if profiles.is_empty() {
        return Err(Error::InvalidProfile("no [device] sections found".into()));
    }
    for p in &profiles {
        p.validate()?;
    }
    Ok(profiles)
}
