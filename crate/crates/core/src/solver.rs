//! Multigrid drivers on the tensor-product operator.
//!
//! Two V-cycle solvers share one grid hierarchy: a standard one on dense
//! matricized iterates, and a low-rank one whose iterates stay factored as
//! V·Wᵀ throughout, with a rank truncation after every operation that grows
//! rank. Both run as residual-correction outer loops — each iteration applies
//! one V-cycle to the residual equation and adds the correction — with damped
//! Jacobi smoothing (splitting matrix Q = (1/ω)·I⊗diag(K₀)) and a cached
//! direct factorization of the assembled Kronecker system on the coarsest
//! level.
//!
//! Truncation schedule of the low-rank path:
//! - after each smoothing step: tail ≤ ε_rel·‖residual at V-cycle entry‖;
//! - on the pre-smoothed residual before restriction: the more stringent
//!   tail ≤ ε_rel·h·‖residual at V-cycle entry‖ with h the level mesh size;
//! - in the outer loop, iterate and residual are truncated with the absolute
//!   criterion (drop singular values below ε_abs), or optionally with a
//!   purely relative criterion (fraction ε_rel of each matrix's own norm) at
//!   the cost of larger residual ranks.
//!
//! The outer loop stops when the residual norm falls under tol·‖F‖ (under
//! tol·‖F‖/(1−ε_rel) measured before truncation, in the relative variant),
//! when every singular value of the truncated residual sits below ε_abs, or
//! at the iteration cap.

use std::time::Instant;

use faer::prelude::*;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::SparseColMat;
use faer::{Col, ColRef, Mat, MatRef};

use crate::lowrank::{self, FactoredMatrix, TruncationCriterion};
use crate::operator::TensorOperator;
use crate::{operator, sparse, Error, Result, Scalar};

/// The outer iteration aborts once the relative residual exceeds this factor.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

/// Damped Jacobi smoothing parameters.
#[derive(Debug, Clone, Copy)]
pub struct SmootherConfig<T> {
    /// Damping factor ω ∈ (0, 1].
    pub omega: T,
    /// Smoothing steps before coarse-grid correction.
    pub nu_pre: usize,
    /// Smoothing steps after coarse-grid correction (0 disables).
    pub nu_post: usize,
}

impl<T: Scalar> Default for SmootherConfig<T> {
    fn default() -> Self {
        Self {
            omega: T::cast(2.0 / 3.0),
            nu_pre: 3,
            nu_post: 3,
        }
    }
}

impl<T: Scalar> SmootherConfig<T> {
    fn validate(&self) -> Result<()> {
        if !(self.omega > T::zero() && self.omega <= T::one()) {
            return Err(Error::InvalidConfig(format!(
                "smoother damping must lie in (0, 1], got {}",
                self.omega
            )));
        }
        Ok(())
    }
}

/// How the outer loop truncates the iterate and residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterTruncation {
    /// Drop singular values below ε_abs (the default).
    Absolute,
    /// Keep a tail below the fraction ε_rel of each matrix's own norm;
    /// stopping then tests the untruncated residual against
    /// tol·‖F‖/(1−ε_rel).
    Relative,
}

/// Outer-iteration controls shared by both solvers.
#[derive(Debug, Clone, Copy)]
pub struct MGConfig<T> {
    /// Relative residual target (≥ 0; 0 disables the residual test).
    pub tol: T,
    /// Outer iteration cap.
    pub maxit: usize,
    /// Relative truncation tolerance used inside V-cycles, in (0, 1).
    pub eps_rel: T,
    /// Absolute truncation tolerance for the outer loop, > 0.
    pub eps_abs: T,
    /// Outer truncation criterion.
    pub outer_truncation: OuterTruncation,
    /// Grid level of the direct coarse solve (must match the hierarchy).
    pub coarsest_level: usize,
    /// Smoothing parameters.
    pub smoother: SmootherConfig<T>,
}

impl<T: Scalar> Default for MGConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::cast(1e-6),
            maxit: 50,
            eps_rel: T::cast(1e-2),
            eps_abs: T::cast(1e-6),
            outer_truncation: OuterTruncation::Absolute,
            coarsest_level: 2,
            smoother: SmootherConfig::default(),
        }
    }
}

impl<T: Scalar> MGConfig<T> {
    fn validate(&self) -> Result<()> {
        self.smoother.validate()?;
        if !(self.tol >= T::zero()) || !self.tol.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "residual target must be finite and ≥ 0, got {}",
                self.tol
            )));
        }
        if self.maxit == 0 {
            return Err(Error::InvalidConfig("iteration cap must be ≥ 1".into()));
        }
        if !(self.eps_rel > T::zero() && self.eps_rel < T::one()) {
            return Err(Error::InvalidConfig(format!(
                "relative truncation tolerance must lie in (0, 1), got {}",
                self.eps_rel
            )));
        }
        if !(self.eps_abs > T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "absolute truncation tolerance must be > 0, got {}",
                self.eps_abs
            )));
        }
        Ok(())
    }
}

/// What a solve did, iteration by iteration.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SolveReport {
    /// Outer iterations performed.
    pub iterations: usize,
    /// Relative Frobenius residual per iteration; entry 0 is 1.0.
    pub residual_history: Vec<f64>,
    /// Iterate rank per iteration (dense iterates report min(N_x, N_ξ)).
    pub rank_history: Vec<usize>,
    /// Rank of the returned iterate.
    pub final_rank: usize,
    /// Whether a stopping criterion (other than the cap) was met.
    pub converged: bool,
    /// Wall-clock seconds spent in the solve.
    pub wall_time: f64,
}

/// One ν-step damped Jacobi sweep on a dense iterate:
/// u ← u + ω·diag(K₀)⁻¹·(F − 𝒜(U)) per step.
pub fn smooth_full<T: Scalar>(
    op: &TensorOperator<T>,
    inv_diag: ColRef<'_, T>,
    u: Mat<T>,
    f: MatRef<'_, T>,
    nu: usize,
    omega: T,
) -> Mat<T> {
    let mut u = u;
    for _ in 0..nu {
        let r = op.residual_dense(u.as_ref(), f);
        for j in 0..u.ncols() {
            for i in 0..u.nrows() {
                u[(i, j)] += omega * inv_diag[i] * r[(i, j)];
            }
        }
    }
    u
}

/// The factored counterpart of [`smooth_full`]: each step applies the
/// smoother in factored arithmetic (scaling only the left factor of the
/// residual) and then truncates with tail ≤ ε_rel·ref_norm, where ref_norm
/// is the residual norm captured at V-cycle entry.
pub fn smooth_lowrank<T: Scalar>(
    op: &TensorOperator<T>,
    inv_diag: ColRef<'_, T>,
    x: FactoredMatrix<T>,
    f: &FactoredMatrix<T>,
    nu: usize,
    omega: T,
    ref_norm: T,
    eps_rel: T,
) -> Result<FactoredMatrix<T>> {
    let crit = TruncationCriterion::RelativeToNorm {
        eps: eps_rel,
        reference: ref_norm,
    };
    let mut x = x;
    for _ in 0..nu {
        let r = op.residual_factored(&x, f)?;
        let scaled_v = Mat::from_fn(r.nrows_v(), r.rank_bound(), |i, j| {
            omega * inv_diag[i] * r.v()[(i, j)]
        });
        let update = FactoredMatrix::from_parts(scaled_v, r.w().to_owned())?;
        x = lowrank::truncate(&x.add(&update)?, &crit)?;
    }
    Ok(x)
}

/// A geometric hierarchy of tensor-product operators with grid transfer,
/// smoother diagonals, and a cached direct factorization on the coarsest
/// level. Immutable once built; shareable across concurrent solves.
pub struct Hierarchy<T> {
    operators: Vec<TensorOperator<T>>,
    prolongations: Vec<SparseColMat<usize, T>>,
    restrictions: Vec<SparseColMat<usize, T>>,
    inv_diags: Vec<Col<T>>,
    grid_levels: Vec<usize>,
    coarse_solver: Llt<usize, T>,
}

impl<T: Scalar> Hierarchy<T> {
    /// Assemble the hierarchy from per-level spatial stiffness families and
    /// one shared set of stochastic matrices (mean matrix first).
    pub fn build(
        grids: &crate::fem::GridHierarchy<T>,
        g_mats: Vec<SparseColMat<usize, T>>,
        kronecker_cap: usize,
    ) -> Result<Self> {
        if g_mats.len() != grids.num_terms() + 1 {
            return Err(Error::DimensionMismatch(format!(
                "hierarchy carries {} expansion terms but {} stochastic matrices were given",
                grids.num_terms(),
                g_mats.len()
            )));
        }
        let mut operators = Vec::with_capacity(grids.num_levels());
        for i in 0..grids.num_levels() {
            operators.push(TensorOperator::new(
                grids.stiffnesses(i).to_vec(),
                g_mats.clone(),
            )?);
        }
        let prolongations = (0..grids.num_levels() - 1)
            .map(|i| grids.prolongation(i).clone())
            .collect();
        let grid_levels = (0..grids.num_levels())
            .map(|i| grids.grid(i).level())
            .collect();
        Self::from_parts(operators, prolongations, grid_levels, kronecker_cap)
    }

    /// Assemble from explicit per-level operators and prolongations. The
    /// grid levels fix each level's mesh size h = 2^−level for the
    /// restricted-residual truncation.
    pub fn from_parts(
        operators: Vec<TensorOperator<T>>,
        prolongations: Vec<SparseColMat<usize, T>>,
        grid_levels: Vec<usize>,
        kronecker_cap: usize,
    ) -> Result<Self> {
        if operators.is_empty() {
            return Err(Error::InvalidConfig("hierarchy needs at least one level".into()));
        }
        if prolongations.len() + 1 != operators.len() || grid_levels.len() != operators.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} levels need {} prolongations and as many grid levels, got {} and {}",
                operators.len(),
                operators.len() - 1,
                prolongations.len(),
                grid_levels.len()
            )));
        }
        let n_xi = operators[0].n_xi();
        for op in &operators {
            if op.n_xi() != n_xi {
                return Err(Error::DimensionMismatch(
                    "all levels must share the stochastic dimension".into(),
                ));
            }
        }
        for (i, p) in prolongations.iter().enumerate() {
            if p.nrows() != operators[i + 1].nx() || p.ncols() != operators[i].nx() {
                return Err(Error::DimensionMismatch(format!(
                    "prolongation {i} is {}×{}, expected {}×{}",
                    p.nrows(),
                    p.ncols(),
                    operators[i + 1].nx(),
                    operators[i].nx()
                )));
            }
        }
        if !grid_levels.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(
                "grid levels must increase from coarsest to finest".into(),
            ));
        }

        let mut inv_diags = Vec::with_capacity(operators.len());
        for op in &operators {
            let d = sparse::diagonal(op.k(0).as_ref());
            let mut inv = Col::zeros(d.nrows());
            for i in 0..d.nrows() {
                if !(d[i] > T::zero()) {
                    return Err(Error::Numerical(
                        "mean stiffness matrix has a non-positive diagonal entry".into(),
                    ));
                }
                inv[i] = T::one() / d[i];
            }
            inv_diags.push(inv);
        }
        let restrictions = prolongations
            .iter()
            .map(|p| sparse::transpose(p.as_ref()))
            .collect();
        let coarse = operators[0].assemble_kronecker(kronecker_cap)?;
        let coarse_solver = coarse
            .sp_cholesky(faer::Side::Lower)
            .map_err(|e| Error::Numerical(format!("coarse factorization failed: {e:?}")))?;
        Ok(Self {
            operators,
            prolongations,
            restrictions,
            inv_diags,
            grid_levels,
            coarse_solver,
        })
    }

    /// Number of levels, coarsest first.
    pub fn num_levels(&self) -> usize {
        self.operators.len()
    }

    /// Index of the finest level.
    pub fn finest(&self) -> usize {
        self.operators.len() - 1
    }

    /// The operator on a level.
    pub fn operator(&self, level: usize) -> &TensorOperator<T> {
        &self.operators[level]
    }

    /// Spatial dimension on a level.
    pub fn nx(&self, level: usize) -> usize {
        self.operators[level].nx()
    }

    /// Shared stochastic dimension.
    pub fn n_xi(&self) -> usize {
        self.operators[0].n_xi()
    }

    /// Grid level (h = 2^−level) of a hierarchy index.
    pub fn grid_level(&self, level: usize) -> usize {
        self.grid_levels[level]
    }

    /// Mesh size on a level.
    pub fn h(&self, level: usize) -> T {
        T::cast(2.0).powi(-(self.grid_levels[level] as i32))
    }

    /// Smoother diagonal (inverted) on a level.
    pub fn inv_diag(&self, level: usize) -> ColRef<'_, T> {
        self.inv_diags[level].as_ref()
    }

    fn check_config(&self, cfg: &MGConfig<T>) -> Result<()> {
        cfg.validate()?;
        if cfg.coarsest_level != self.grid_levels[0] {
            return Err(Error::InvalidConfig(format!(
                "configured direct-solve level {} but the hierarchy bottoms out at {}",
                cfg.coarsest_level, self.grid_levels[0]
            )));
        }
        Ok(())
    }

    /// Direct solve 𝒜(U) = F on the coarsest level via the cached
    /// factorization of the assembled Kronecker matrix.
    fn coarse_solve_dense(&self, f: MatRef<'_, T>) -> Mat<T> {
        let rhs = operator::vectorize(f);
        let rhs_mat = Mat::from_fn(rhs.nrows(), 1, |i, _| rhs[i]);
        let sol = self.coarse_solver.solve(&rhs_mat);
        let sol_col = Col::from_fn(sol.nrows(), |i| sol[(i, 0)]);
        operator::matricize(sol_col.as_ref(), f.nrows(), f.ncols())
    }

    /// One V-cycle on dense matricized iterates, recursing to the coarsest
    /// level's direct solve.
    pub fn vcycle_full(
        &self,
        level: usize,
        u0: Mat<T>,
        f: MatRef<'_, T>,
        smoother: &SmootherConfig<T>,
    ) -> Mat<T> {
        if level == 0 {
            return self.coarse_solve_dense(f);
        }
        let op = &self.operators[level];
        let inv_diag = self.inv_diags[level].as_ref();
        let mut u = smooth_full(op, inv_diag, u0, f, smoother.nu_pre, smoother.omega);
        let r = op.residual_dense(u.as_ref(), f);
        let rc = sparse::spmm(self.restrictions[level - 1].as_ref(), r.as_ref());
        let c = self.vcycle_full(
            level - 1,
            Mat::zeros(self.operators[level - 1].nx(), self.n_xi()),
            rc.as_ref(),
            smoother,
        );
        sparse::spmm_acc(
            u.as_mut(),
            self.prolongations[level - 1].as_ref(),
            c.as_ref(),
        );
        smooth_full(op, inv_diag, u, f, smoother.nu_post, smoother.omega)
    }

    /// One V-cycle on factored iterates. Grid transfer touches only the
    /// spatial factor (V ← PᵀV on restriction, V ← PV on prolongation), so
    /// it never changes the rank; the coarse direct solve densifies the
    /// right-hand side and returns an exactly factored solution.
    pub fn vcycle_lowrank(
        &self,
        level: usize,
        x0: FactoredMatrix<T>,
        f: &FactoredMatrix<T>,
        smoother: &SmootherConfig<T>,
        eps_rel: T,
    ) -> Result<FactoredMatrix<T>> {
        if level == 0 {
            let dense = self.coarse_solve_dense(f.to_dense().as_ref());
            return Ok(FactoredMatrix::from_dense(dense.as_ref()));
        }
        let op = &self.operators[level];
        let ref_norm = op.residual_factored(&x0, f)?.frobenius_norm();
        if ref_norm == T::zero() {
            return Ok(x0);
        }
        let inv_diag = self.inv_diags[level].as_ref();
        let mut x = smooth_lowrank(
            op,
            inv_diag,
            x0,
            f,
            smoother.nu_pre,
            smoother.omega,
            ref_norm,
            eps_rel,
        )?;
        let r_tilde = op.residual_factored(&x, f)?;
        let r = lowrank::truncate(
            &r_tilde,
            &TruncationCriterion::RelativeToNorm {
                eps: eps_rel * self.h(level),
                reference: ref_norm,
            },
        )?;
        let restricted = FactoredMatrix::from_parts(
            sparse::spmm(self.restrictions[level - 1].as_ref(), r.v()),
            r.w().to_owned(),
        )?;
        let c = self.vcycle_lowrank(
            level - 1,
            FactoredMatrix::zero(self.operators[level - 1].nx(), self.n_xi()),
            &restricted,
            smoother,
            eps_rel,
        )?;
        let prolonged = FactoredMatrix::from_parts(
            sparse::spmm(self.prolongations[level - 1].as_ref(), c.v()),
            c.w().to_owned(),
        )?;
        x = x.add(&prolonged)?;
        smooth_lowrank(
            op,
            inv_diag,
            x,
            f,
            smoother.nu_post,
            smoother.omega,
            ref_norm,
            eps_rel,
        )
    }

    /// Standard multigrid: residual-correction outer loop on dense iterates.
    pub fn solve_full(&self, f: MatRef<'_, T>, cfg: &MGConfig<T>) -> Result<(Mat<T>, SolveReport)> {
        self.solve_full_with_observer(f, cfg, |_, _| {})
    }

    /// [`Self::solve_full`] that hands each V-cycle correction to an
    /// observer (iteration index, correction) before it is applied.
    pub fn solve_full_with_observer(
        &self,
        f: MatRef<'_, T>,
        cfg: &MGConfig<T>,
        mut observe: impl FnMut(usize, MatRef<'_, T>),
    ) -> Result<(Mat<T>, SolveReport)> {
        self.check_config(cfg)?;
        let start = Instant::now();
        let finest = self.finest();
        let (nx, n_xi) = (self.nx(finest), self.n_xi());
        if f.nrows() != nx || f.ncols() != n_xi {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side is {}×{}, expected {nx}×{n_xi}",
                f.nrows(),
                f.ncols()
            )));
        }
        let full_rank = nx.min(n_xi);
        let mut u = Mat::zeros(nx, n_xi);
        let mut residual_history = vec![1.0];
        let mut rank_history = vec![0usize];
        let r0 = f.norm_l2();
        if r0 == T::zero() {
            let report = SolveReport {
                iterations: 0,
                residual_history,
                rank_history,
                final_rank: 0,
                converged: true,
                wall_time: start.elapsed().as_secs_f64(),
            };
            return Ok((u, report));
        }
        let mut r_mat = f.to_owned();
        let mut rel = T::one();
        let mut converged = rel <= cfg.tol;
        let mut iterations = 0;
        while !converged && iterations < cfg.maxit {
            let c = self.vcycle_full(finest, Mat::zeros(nx, n_xi), r_mat.as_ref(), &cfg.smoother);
            observe(iterations, c.as_ref());
            for j in 0..n_xi {
                for i in 0..nx {
                    u[(i, j)] += c[(i, j)];
                }
            }
            r_mat = self.operators[finest].residual_dense(u.as_ref(), f);
            rel = r_mat.norm_l2() / r0;
            iterations += 1;
            residual_history.push(rel.as_f64());
            rank_history.push(full_rank);
            converged = rel <= cfg.tol;
            if rel > T::cast(DIVERGENCE_FACTOR) {
                let report = SolveReport {
                    iterations,
                    residual_history,
                    rank_history,
                    final_rank: full_rank,
                    converged: false,
                    wall_time: start.elapsed().as_secs_f64(),
                };
                return Err(Error::Diverged {
                    relative_residual: rel.as_f64(),
                    report: Box::new(report),
                });
            }
        }
        let report = SolveReport {
            iterations,
            residual_history,
            rank_history,
            final_rank: if iterations == 0 { 0 } else { full_rank },
            converged,
            wall_time: start.elapsed().as_secs_f64(),
        };
        Ok((u, report))
    }

    /// Low-rank multigrid: the iterate, residual, and every intermediate
    /// stay factored; the outer loop truncates both the updated iterate and
    /// the recomputed residual. Stops on the residual target, when the
    /// truncated residual's largest singular value falls below ε_abs
    /// (absolute mode), or at the cap.
    pub fn solve_lowrank(
        &self,
        f: &FactoredMatrix<T>,
        cfg: &MGConfig<T>,
    ) -> Result<(FactoredMatrix<T>, SolveReport)> {
        self.check_config(cfg)?;
        let start = Instant::now();
        let finest = self.finest();
        let (nx, n_xi) = (self.nx(finest), self.n_xi());
        if f.nrows_v() != nx || f.nrows_w() != n_xi {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side factors are {}×{}, expected {nx}×{n_xi}",
                f.nrows_v(),
                f.nrows_w()
            )));
        }
        let mut u = FactoredMatrix::zero(nx, n_xi);
        let mut residual_history = vec![1.0];
        let mut rank_history = vec![0usize];
        let r0 = f.frobenius_norm();
        if r0 == T::zero() {
            let report = SolveReport {
                iterations: 0,
                residual_history,
                rank_history,
                final_rank: 0,
                converged: true,
                wall_time: start.elapsed().as_secs_f64(),
            };
            return Ok((u, report));
        }
        let (crit, stop_threshold) = match cfg.outer_truncation {
            OuterTruncation::Absolute => {
                (TruncationCriterion::Absolute(cfg.eps_abs), cfg.tol)
            }
            OuterTruncation::Relative => (
                TruncationCriterion::RelativeFraction(cfg.eps_rel),
                cfg.tol / (T::one() - cfg.eps_rel),
            ),
        };
        let mut r = f.clone();
        let mut iterations = 0;
        let mut converged = T::one() <= stop_threshold;
        while !converged && iterations < cfg.maxit {
            let c = self.vcycle_lowrank(
                finest,
                FactoredMatrix::zero(nx, n_xi),
                &r,
                &cfg.smoother,
                cfg.eps_rel,
            )?;
            u = lowrank::truncate(&u.add(&c)?, &crit)?;
            let r_tilde = self.operators[finest].residual_factored(&u, f)?;
            let true_rel = r_tilde.frobenius_norm() / r0;
            r = lowrank::truncate(&r_tilde, &crit)?;
            iterations += 1;
            residual_history.push(true_rel.as_f64());
            rank_history.push(u.rank_bound());
            let stop_rel = match cfg.outer_truncation {
                OuterTruncation::Absolute => r.frobenius_norm() / r0,
                OuterTruncation::Relative => true_rel,
            };
            converged = stop_rel <= stop_threshold;
            if !converged
                && cfg.outer_truncation == OuterTruncation::Absolute
                && r.max_singular_value() < cfg.eps_abs
            {
                converged = true;
            }
            if true_rel > T::cast(DIVERGENCE_FACTOR) {
                let final_rank = u.rank_bound();
                let report = SolveReport {
                    iterations,
                    residual_history,
                    rank_history,
                    final_rank,
                    converged: false,
                    wall_time: start.elapsed().as_secs_f64(),
                };
                return Err(Error::Diverged {
                    relative_residual: true_rel.as_f64(),
                    report: Box::new(report),
                });
            }
        }
        let final_rank = u.rank_bound();
        let report = SolveReport {
            iterations,
            residual_history,
            rank_history,
            final_rank,
            converged,
            wall_time: start.elapsed().as_secs_f64(),
        };
        Ok((u, report))
    }

    /// Power-iteration estimate of the spectral radius of the smoothing
    /// error operator I − ω·D⁻¹·A on a level (200 iterations or 1e-8
    /// stagnation), applied Kronecker-free through the matricized operator.
    pub fn spectral_radius_estimate(&self, level: usize, omega: T) -> T {
        let op = &self.operators[level];
        let inv_diag = self.inv_diags[level].as_ref();
        let (nx, n_xi) = (op.nx(), op.n_xi());
        let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
        let mut u = Mat::zeros(nx, n_xi);
        for j in 0..n_xi {
            for i in 0..nx {
                u[(i, j)] = lcg_unit::<T>(&mut state);
            }
        }
        let norm = u.norm_l2();
        for j in 0..n_xi {
            for i in 0..nx {
                u[(i, j)] /= norm;
            }
        }
        let mut estimate = T::zero();
        for _ in 0..200 {
            let au = op.apply_dense(u.as_ref());
            let v = Mat::from_fn(nx, n_xi, |i, j| u[(i, j)] - omega * inv_diag[i] * au[(i, j)]);
            let growth = v.norm_l2();
            if growth == T::zero() {
                return T::zero();
            }
            if (growth - estimate).abs() < T::cast(1e-8) {
                return growth;
            }
            estimate = growth;
            u = Mat::from_fn(nx, n_xi, |i, j| v[(i, j)] / growth);
        }
        estimate
    }
}

/// Uniform pseudo-random scalar in [−1, 1) from a 64-bit linear congruential
/// stream (fixed, dependency-free initialization for power iteration).
fn lcg_unit<T: Scalar>(state: &mut u64) -> T {
    *state = state
        .wrapping_mul(6_364_136_223_846_793_005)
        .wrapping_add(1_442_695_040_888_963_407);
    let unit = (*state >> 11) as f64 / (1u64 << 53) as f64;
    T::cast(2.0 * unit - 1.0)
}
