use star_nls::dynamics::DynamicsError;
use star_nls::graph::GraphError;
use star_nls::operators::OperatorError;
use star_nls::shooting::ShootingError;
use star_nls::stationary::StationaryError;
use thiserror::Error;

/// Exit codes: 1 configuration or output, 2 failed assertion, 3 numerical failure.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("assertion failed: {0}")]
    Assertion(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Output(_) => 1,
            CliError::Assertion(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<StationaryError> for CliError {
    fn from(e: StationaryError) -> Self {
        match e {
            StationaryError::Graph(g) => g.into(),
            e => CliError::Config(e.to_string()),
        }
    }
}

impl From<ShootingError> for CliError {
    fn from(e: ShootingError) -> Self {
        match e {
            ShootingError::WindowInvalid { .. } | ShootingError::PatternLength { .. } => {
                CliError::Config(e.to_string())
            }
            e => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<OperatorError> for CliError {
    fn from(e: OperatorError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::InvalidParameter(_)
            | DynamicsError::SupercriticalP(_)
            | DynamicsError::ContinuityViolatedAtInput(_)
            | DynamicsError::GridMismatch(_) => CliError::Config(e.to_string()),
            DynamicsError::Graph(g) => g.into(),
            DynamicsError::Stationary(s) => s.into(),
            e => CliError::Numerical(e.to_string()),
        }
    }
}
