//! Experiment harness for the CO-OFDM stack: scenario configs, the
//! end-to-end pipeline, sweeps, CSV/SVG reporting and waveform traces.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod sweep;
pub mod trace;

pub use config::ScenarioConfig;
pub use error::{HarnessError, Result};
