//! Coherent optical OFDM over nonlinear fiber: modem, split-step channel,
//! equalizers (one-tap, digital backpropagation, complex neural nets) and
//! link quality metrics.
//!
//! Everything stochastic draws from caller-supplied seeded generators, so
//! any simulation is reproducible from its configuration alone.

pub mod constellation;
pub mod equalizer;
pub mod error;
pub mod fiber;
pub mod metrics;
pub mod modem;
pub mod prbs;
pub mod waveform;

pub use error::{CoreError, Result};
