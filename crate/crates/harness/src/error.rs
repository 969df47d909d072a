//! Harness error type. Every failure carries one of three categories that
//! map to fixed exit codes and a machine-parseable `error[category]:` prefix
//! on stderr: config (2) for anything wrong with the scenario description,
//! io (3) for filesystem trouble, runtime (4) for numeric failures inside an
//! otherwise valid run.

use coofdm_core::CoreError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("error[config]: {0}")]
    Config(String),
    #[error("error[io]: {0}")]
    Io(String),
    #[error("error[runtime]: {0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Io(_) => 3,
            HarnessError::Runtime(_) => 4,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::Io(_) => "io",
            HarnessError::Runtime(_) => "runtime",
        }
    }

    pub fn io(context: &str, e: std::io::Error) -> Self {
        HarnessError::Io(format!("{context}: {e}"))
    }
}

impl From<CoreError> for HarnessError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Io(inner) => HarnessError::Io(inner.to_string()),
            CoreError::TrainingDiverged { .. } | CoreError::NonFinite(_) => {
                HarnessError::Runtime(e.to_string())
            }
            other => HarnessError::Config(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categories_and_codes() {
        let c = HarnessError::Config("x".into());
        assert_eq!(c.exit_code(), 2);
        assert_eq!(format!("{c}"), "error[config]: x");
        let r: HarnessError = CoreError::TrainingDiverged { epoch: 3 }.into();
        assert_eq!(r.exit_code(), 4);
        let i: HarnessError =
            CoreError::Io(std::io::Error::new(std::io::ErrorKind::NotFound, "gone")).into();
        assert_eq!(i.exit_code(), 3);
    }
}
