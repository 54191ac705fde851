use std::path::Path;

use onet_core::baselines::BaselineError;
use onet_core::dataset::DatasetError;
use onet_core::deeponet::DeepONetError;
use onet_core::eval::EvalError;
use onet_core::nn::NnError;
use thiserror::Error;

/// Failure of a subcommand, classified by exit code:
/// 1 usage, 2 numeric or divergence, 3 I/O.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        let msg = e.to_string();
        match e {
            DatasetError::Io { .. }
            | DatasetError::Manifest(_)
            | DatasetError::Truncated { .. }
            | DatasetError::Checksum { .. } => CliError::Io(msg),
            DatasetError::Capacity { .. } | DatasetError::Invalid(_) => CliError::Usage(msg),
            DatasetError::Solver(_) | DatasetError::Grf(_) => CliError::Numeric(msg),
        }
    }
}

fn from_nn(e: &NnError, msg: String) -> CliError {
    match e {
        NnError::Io(_) | NnError::Checkpoint(_) => CliError::Io(msg),
        NnError::Shape(_) => CliError::Usage(msg),
        NnError::NonFinite { .. } => CliError::Numeric(msg),
    }
}

impl From<DeepONetError> for CliError {
    fn from(e: DeepONetError) -> Self {
        let msg = e.to_string();
        match &e {
            DeepONetError::Shape(_) | DeepONetError::EmptyInput => CliError::Usage(msg),
            DeepONetError::DegenerateTarget { .. } | DeepONetError::Divergence { .. } => {
                CliError::Numeric(msg)
            }
            DeepONetError::Nn(n) => from_nn(n, msg),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        let msg = e.to_string();
        match &e {
            BaselineError::Empty | BaselineError::Dimension { .. } => CliError::Usage(msg),
            BaselineError::Divergence { .. } => CliError::Numeric(msg),
            BaselineError::Nn(n) => from_nn(n, msg),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        let msg = e.to_string();
        match e {
            EvalError::Io { .. } | EvalError::Format(_) => CliError::Io(msg),
            _ => CliError::Numeric(msg),
        }
    }
}
