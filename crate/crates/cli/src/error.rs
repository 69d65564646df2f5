use std::path::PathBuf;

use posterior_lab::LabError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Lab(#[from] LabError),

    #[error("tolerance check failed: {0}")]
    Tolerance(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration and input problems, 3 for numerical guards,
    /// 4 for failed tolerance checks.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input { .. } | CliError::Io { .. } => 2,
            CliError::Tolerance(_) => 4,
            CliError::Lab(e) => match e {
                LabError::InvalidParameter { .. }
                | LabError::DimensionMismatch { .. }
                | LabError::TooFewPoints { .. }
                | LabError::WrongKind { .. } => 2,
                LabError::CrossCheck { .. } | LabError::CovarianceMismatch { .. } => 4,
                LabError::Indefinite { .. }
                | LabError::NotSpd { .. }
                | LabError::Overflow { .. }
                | LabError::QuadratureFailure { .. }
                | LabError::TruncationSensitivity { .. } => 3,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
