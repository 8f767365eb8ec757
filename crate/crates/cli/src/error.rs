use hatgae::centrality::CentralityError;
use hatgae::eval::EvalError;
use hatgae::gat::{CheckpointError, GatError};
use hatgae::graph::GraphError;
use hatgae::masking::MaskingError;
use hatgae::training::TrainError;
use std::process::ExitCode;

/// Every failure maps to one of three exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::InvalidSbm(_) => CliError::Config(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<CentralityError> for CliError {
    fn from(e: CentralityError) -> Self {
        match e {
            CentralityError::NonConvergence(_) | CentralityError::ZeroVector => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<MaskingError> for CliError {
    fn from(e: MaskingError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<GatError> for CliError {
    fn from(e: GatError) -> Self {
        match e {
            GatError::Autodiff(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Centrality(c) => c.into(),
            TrainError::Gat(g) => g.into(),
            TrainError::Diverged { .. }
            | TrainError::ZeroNorm
            | TrainError::Optimizer(_)
            | TrainError::Autodiff(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io(_) | EvalError::Parse { .. } => CliError::Io(e.to_string()),
            EvalError::NonFinite => CliError::Numerical(e.to_string()),
            EvalError::Gat(g) => g.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}
