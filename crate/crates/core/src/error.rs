use crate::solver::SolveReport;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value is outside its documented domain.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Operands have incompatible shapes.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A guarded operation would exceed its size cap.
    #[error("problem too large: {0}")]
    TooLarge(String),

    /// A numerical routine failed (factorization breakdown, root bracketing, …).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Non-finite values were encountered where finite data is required.
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),

    /// The outer multigrid iteration grew the residual past the divergence guard.
    #[error(
        "solver diverged: relative residual {relative_residual:.3e} after {} iterations",
        report.iterations
    )]
    Diverged {
        relative_residual: f64,
        report: Box<SolveReport>,
    },
}
