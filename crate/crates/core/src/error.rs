use thiserror::Error;

/// Validation failure; lists every offending field.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("invalid configuration:\n  {}", issues.join("\n  "))]
pub struct ConfigError {
    pub issues: Vec<String>,
}

impl ConfigError {
    pub fn single(msg: impl Into<String>) -> Self {
        ConfigError {
            issues: vec![msg.into()],
        }
    }
}

/// Run-halting state-health failures.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum HealthError {
    #[error("chart lost diffeomorphism: min J = {min_j:.6e} < c0 = {c0} at (y index {i}, z index {j})")]
    Diffeomorphism { min_j: f64, c0: f64, i: usize, j: usize },
    #[error("density {value:.6e} outside health band [{lo}, {hi}] at (y index {i}, z index {j})")]
    DensityBand { value: f64, lo: f64, hi: f64, i: usize, j: usize },
    #[error("non-finite value in {what}")]
    NonFinite { what: String },
    #[error("nonpositive density {value:.6e} at (y index {i}, z index {j})")]
    NonpositiveDensity { value: f64, i: usize, j: usize },
    #[error("Euler closure needs p_e - sigma H > 0, got {value:.6e} at y index {i}")]
    Physical { value: f64, i: usize },
    #[error("viscous boundary closure did not converge (residual {residual:.3e})")]
    Closure { residual: f64 },
}

/// Caller broke an operation precondition.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("contract violation: {0}")]
pub struct ContractError(pub String);

#[derive(Debug, Error)]
pub enum FscnError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Health(#[from] HealthError),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
}

impl FscnError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            FscnError::Config(_) => 2,
            FscnError::Health(_) => 3,
            FscnError::Verification(_) => 4,
            _ => 1,
        }
    }
}
