use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical accuracy: {0}")]
    Numerical(String),

    #[error("fidelity {fidelity:.6} is below the required {required}")]
    Threshold { fidelity: f64, required: f64 },

    #[error(transparent)]
    Engine(cavnet::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Threshold { .. } => 4,
            CliError::Engine(_) | CliError::Io { .. } => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<cavnet::Error> for CliError {
    fn from(e: cavnet::Error) -> Self {
        use cavnet::Error as E;
        match e {
            E::IntegrationAccuracy(_) => CliError::Numerical(e.to_string()),
            E::InvalidSize(_)
            | E::InvalidEdge(..)
            | E::Disconnected { .. }
            | E::LabelOutOfRange { .. }
            | E::BasisMismatch { .. }
            | E::InvalidParams(_)
            | E::TimeOutOfRange { .. }
            | E::NotAdjacent(..)
            | E::InvalidProtocol(_)
            | E::InvalidTarget(_)
            | E::Optimizer(_) => CliError::Config(e.to_string()),
            _ => CliError::Engine(e),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
