use thiserror::Error;

use voxsource::eval::{EvalError, FoldError, GridError, ManifestError};
use voxsource::model_file::ModelFileError;
use voxsource::sim::{ChannelError, SimError};
use voxsource::{ClassifierError, PcaError, StoreError};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, bad input files, or data that violates a precondition.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

pub(crate) fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::TooFewSpeakers(_) | SimError::Invalid(_) | SimError::Channel(_) => usage(e),
            _ => internal(e),
        }
    }
}

impl From<ChannelError> for CliError {
    fn from(e: ChannelError) -> Self {
        usage(e)
    }
}

impl From<ManifestError> for CliError {
    fn from(e: ManifestError) -> Self {
        usage(e)
    }
}

impl From<FoldError> for CliError {
    fn from(e: FoldError) -> Self {
        usage(e)
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        match e {
            GridError::AllCellsFailed => internal(e),
            _ => usage(e),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::MissingFeature(_) | EvalError::EmptySplit | EvalError::DimensionMismatch { .. } => usage(e),
            _ => internal(e),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io(_) => internal(e),
            _ => usage(e),
        }
    }
}

impl From<ModelFileError> for CliError {
    fn from(e: ModelFileError) -> Self {
        match e {
            ModelFileError::Io(_) => internal(e),
            _ => usage(e),
        }
    }
}

impl From<PcaError> for CliError {
    fn from(e: PcaError) -> Self {
        usage(e)
    }
}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> Self {
        internal(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        internal(e)
    }
}
