use thiserror::Error;

/// Errors surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum IbError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The joint is (numerically) independent: no learning onset exists,
    /// eta_KL -> 0 and beta_c -> infinity.
    #[error("no learning onset: X and Y are independent (I(X;Y) <= {mi_threshold:e})")]
    NoOnset { mi_threshold: f64 },

    #[error("fixed-point iteration failed to converge: {detail}")]
    ConvergenceFailure { detail: String },

    /// kappa <= 0: the second-order theory cannot fix the perturbation scale.
    #[error("kappa = {kappa} <= 0: higher-order perturbation theory required")]
    HigherOrderRequired { kappa: f64 },

    #[error("alphabet too large for brute-force search: |X| = {n} > {max}")]
    AlphabetTooLarge { n: usize, max: usize },

    #[error("matrix is not positive-definite: {0}")]
    NotPositiveDefinite(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IbError>;
