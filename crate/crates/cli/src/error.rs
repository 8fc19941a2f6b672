use std::path::PathBuf;

use mpflex_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: field `{field}`: {message}")]
    Field {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("best response did not converge within {0} rounds")]
    BestResponseStalled(usize),
}

impl CliError {
    /// Process exit status: 2 infeasible, 3 not converged, 4 bad input.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(CoreError::Infeasible { .. }) => 2,
            CliError::Core(CoreError::NotConverged(_)) | CliError::BestResponseStalled(_) => 3,
            CliError::Parse { .. } | CliError::Field { .. } | CliError::Usage(_) => 4,
            CliError::Core(CoreError::InvalidInstance(_) | CoreError::Disconnected(_)) => 4,
            _ => 1,
        }
    }

    /// Stable machine-readable reason.
    pub fn reason(&self) -> &'static str {
        match self.exit_code() {
            2 => "infeasible",
            3 => "not-converged",
            4 => "invalid-input",
            _ => match self {
                CliError::Io { .. } => "io",
                _ => "internal",
            },
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
