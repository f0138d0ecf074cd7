//! Solvers for stochastic Galerkin systems from steady-state diffusion with a
//! random coefficient field.
//!
//! The coefficient is a truncated Karhunen-Loève expansion
//! `c(x, ω) = c₀ + s·Σ_l √λ_l c_l(x) ξ_l(ω)` with uniform ξ_l, discretized by
//! bilinear finite elements in space and a total-degree Legendre chaos basis in
//! the random variables. The resulting Kronecker-structured system
//! `Σ_l (G_l ⊗ K_l) u = f` is solved by geometric multigrid, either on dense
//! matricized iterates or on low-rank factored iterates with rank truncation
//! after every arithmetic step that grows rank.
//!
//! Modules follow the pipeline: [`kl`] (coefficient eigenpairs) → [`chaos`]
//! (stochastic basis and coupling matrices) → [`fem`] (spatial assembly and
//! grid transfer) → [`operator`] (the tensor-product operator) → [`lowrank`]
//! (factored algebra and truncation) → [`solver`] (multigrid drivers).
//!
//! Everything is generic over the scalar type through [`Scalar`]; the crate
//! root exports `f64` aliases for the common case.

pub mod chaos;
mod error;
pub mod fem;
pub mod kl;
pub mod lowrank;
pub mod operator;
pub mod quadrature;
mod scalar;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Dense column-major matrix over `f64`.
pub type Matrix = faer::Mat<f64>;
/// Dense column vector over `f64`.
pub type Vector = faer::Col<f64>;
/// Compressed sparse column matrix over `f64`.
pub type SparseMatrix = faer::sparse::SparseColMat<usize, f64>;
/// Low-rank factored matrix `V·Wᵀ` over `f64`.
pub type FactoredMatrix = lowrank::FactoredMatrix<f64>;
/// Tensor-product Galerkin operator over `f64`.
pub type TensorOperator = operator::TensorOperator<f64>;
/// Multigrid hierarchy over `f64`.
pub type Hierarchy = solver::Hierarchy<f64>;
