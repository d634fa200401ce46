use std::process::ExitCode;

use sentcorr_core::Error;

/// Process exit status. The numeric values are stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Usage = 1,
    InputFormat = 2,
    Numerical = 3,
    Io = 4,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        self as u8
    }
}

impl From<ExitStatus> for ExitCode {
    fn from(s: ExitStatus) -> Self {
        ExitCode::from(s.code())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// Training or checking finished but the numbers are unusable.
    #[error("{0}")]
    Numerical(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Usage(_) => ExitStatus::Usage,
            CliError::Numerical(_) => ExitStatus::Numerical,
            CliError::Core(e) => match e {
                Error::Config(_) => ExitStatus::Usage,
                Error::NonFinite(_) => ExitStatus::Numerical,
                Error::Io { .. } => ExitStatus::Io,
                Error::Shape { .. }
                | Error::IdOutOfRange { .. }
                | Error::Format { .. }
                | Error::Input(_)
                | Error::CheckpointMagic { .. }
                | Error::CheckpointVersion { .. }
                | Error::CheckpointDigest { .. }
                | Error::CheckpointTruncated { .. }
                | Error::CheckpointHeader { .. } => ExitStatus::InputFormat,
            },
        }
    }
}
