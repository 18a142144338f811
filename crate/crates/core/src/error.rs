//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),

    #[error("bit count {bits} is not divisible by {bits_per_symbol} bits per symbol")]
    BitLengthMismatch { bits: usize, bits_per_symbol: usize },

    #[error("tone frequency {freq_hz} Hz aliases at sample rate {rate_hz} Hz")]
    Aliasing { freq_hz: f64, rate_hz: f64 },

    #[error("invalid phase-noise mask: {0}")]
    InvalidMask(String),

    #[error("sequence length {got} does not match waveform length {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid device profile: {0}")]
    InvalidProfile(String),

    #[error("internal rate {rate_hz} Hz is not an integer multiple of capture rate {capture_hz} Hz")]
    IncompatibleRate { rate_hz: f64, capture_hz: f64 },

    #[error("input too short: need at least {need} samples, got {got}")]
    ShortInput { need: usize, got: usize },

    #[error("frequency band [{lo}, {hi}] outside PSD span or empty")]
    BandOutOfSpan { lo: f64, hi: f64 },

    #[error("bands overlap: main [{main_lo}, {main_hi}] vs adjacent [{adj_lo}, {adj_hi}]")]
    OverlappingBands { main_lo: f64, main_hi: f64, adj_lo: f64, adj_hi: f64 },

    #[error("split fractions must sum to 1, got {0}")]
    FractionSum(f64),

    #[error("empty split")]
    EmptySplit,

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate batch: {0}")]
    DegenerateBatch(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),

    #[error("parse error in {file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
