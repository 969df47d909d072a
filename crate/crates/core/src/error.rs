//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`CoreError`] with enough
//! context to point at the offending field or dimension, so callers can relay
//! the message to a user without re-deriving what went wrong.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// A configuration field is out of its valid range. The message names the
    /// field and the constraint that failed.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Two containers that must agree in size do not.
    #[error("dimension mismatch in {context}: {left} vs {right}")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    /// An input that must be non-empty is empty.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// PRBS seed state must be a nonzero 19-bit value.
    #[error("PRBS seed must be nonzero and fit in 19 bits (got {0:#x})")]
    BadSeed(u32),

    /// A bit value outside {0, 1} was passed where a bit was expected.
    #[error("bit stream contains non-bit value {value} at index {index}")]
    NotABit { index: usize, value: u8 },

    /// A waveform or weight buffer contains NaN or infinity.
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    /// SSFM step larger than the requested propagation length.
    #[error("SSFM step {step_km} km exceeds propagation length {length_km} km")]
    StepExceedsLength { step_km: f64, length_km: f64 },

    /// WDM placement would alias: a channel edge falls outside Nyquist.
    #[error(
        "WDM channel at {offset_hz:.3e} Hz does not fit: needs {needed_hz:.3e} Hz, \
         Nyquist is {nyquist_hz:.3e} Hz"
    )]
    Aliasing {
        offset_hz: f64,
        needed_hz: f64,
        nyquist_hz: f64,
    },

    /// Waveform length is not compatible with the requested operation
    /// (integer resampling factor, whole OFDM symbols, ...).
    #[error("incompatible length in {context}: {len} is not divisible by {quantum}")]
    BadLength {
        context: &'static str,
        len: usize,
        quantum: usize,
    },

    /// Channel estimation needs nonzero reference symbols.
    #[error("channel estimation reference has zero magnitude at subcarrier {0}")]
    ZeroReference(usize),

    /// Training cost became non-finite.
    #[error("training diverged at epoch {epoch}: cost is non-finite")]
    TrainingDiverged { epoch: usize },

    /// Serialized blob does not carry the expected magic/version.
    #[error("unsupported serialized format: {0}")]
    UnsupportedFormat(String),

    /// Serialized blob ended early.
    #[error("truncated serialized data: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
