//! Factored (low-rank) matrices X = V·Wᵀ and the rank-truncation operator.
//!
//! The iterative solvers keep every iterate and residual in factored form;
//! sums and operator applications only concatenate factor columns, so ranks
//! grow until a truncation prunes them. Truncation computes thin QR
//! factorizations of both factors, a singular value decomposition of the
//! small core R_V·R_Wᵀ, and keeps a head of the spectrum chosen by one of
//! three criteria:
//!
//! * `RelativeFraction(ε)`: smallest rank whose discarded tail satisfies
//!   √(Σ_{j>k} σ_j²) ≤ ε·√(Σ_j σ_j²), so ‖X − X̃‖_F ≤ ε·‖X̃‖_F;
//! * `RelativeToNorm {ε, reference}`: tail ≤ ε·reference for an external
//!   reference norm (used with the residual norm at V-cycle entry);
//! * `Absolute(ε)`: keep exactly the singular values ≥ ε (ties kept), so
//!   ‖X − X̃‖_F ≤ ε·√(k̃ − k).
//!
//! When the incoming rank bound k̃ reaches min(N_x, N_ξ) the QR-based path
//! loses its cost advantage and a direct SVD of the densified matrix is used
//! instead; an instrumentation counter records those events so tests can
//! assert the dense path stays off the hot loop.

use std::cell::Cell;

use faer::{Mat, MatRef};

use crate::{Error, Result, Scalar};

/// A matrix stored as the product V·Wᵀ of two thin factors.
#[derive(Debug, Clone)]
pub struct FactoredMatrix<T> {
    v: Mat<T>,
    w: Mat<T>,
}

/// Rank-selection rule for [`truncate`].
#[derive(Debug, Clone, Copy)]
pub enum TruncationCriterion<T> {
    /// Discarded tail ≤ ε × the matrix's own Frobenius norm.
    RelativeFraction(T),
    /// Discarded tail ≤ ε × an external reference norm.
    RelativeToNorm { eps: T, reference: T },
    /// Keep all singular values ≥ ε.
    Absolute(T),
}

/// What a truncation saw and did, for instrumentation and spectrum dumps.
#[derive(Debug, Clone)]
pub struct TruncationInfo<T> {
    /// All singular values of the input, non-increasing.
    pub singular_values: Vec<T>,
    /// How many of them were kept.
    pub kept: usize,
    /// Whether the densified direct-SVD path was taken.
    pub used_dense_fallback: bool,
}

thread_local! {
    static DENSE_FALLBACKS: Cell<u64> = const { Cell::new(0) };
    static OVERSIZE_RANKS: Cell<u64> = const { Cell::new(0) };
}

/// Counters accumulated on this thread since the last reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instrumentation {
    /// Truncations that densified the matrix for a direct SVD.
    pub dense_fallbacks: u64,
    /// Truncations whose incoming rank bound exceeded twice the short
    /// dimension (the regime where the absolute-criterion error bound
    /// √(k̃−k)·ε stops being controlled by √N_ξ·ε).
    pub oversize_ranks: u64,
}

/// Snapshot of this thread's truncation counters.
pub fn instrumentation() -> Instrumentation {
    Instrumentation {
        dense_fallbacks: DENSE_FALLBACKS.with(Cell::get),
        oversize_ranks: OVERSIZE_RANKS.with(Cell::get),
    }
}

/// Reset this thread's truncation counters.
pub fn reset_instrumentation() {
    DENSE_FALLBACKS.with(|c| c.set(0));
    OVERSIZE_RANKS.with(|c| c.set(0));
}

impl<T: Scalar> FactoredMatrix<T> {
    /// The rank-0 matrix of the given shape (factors with zero columns).
    pub fn zero(nrows_v: usize, nrows_w: usize) -> Self {
        Self {
            v: Mat::zeros(nrows_v, 0),
            w: Mat::zeros(nrows_w, 0),
        }
    }

    /// Wrap two factors; they must have the same number of columns.
    pub fn from_parts(v: Mat<T>, w: Mat<T>) -> Result<Self> {
        if v.ncols() != w.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "factor column counts differ: {} vs {}",
                v.ncols(),
                w.ncols()
            )));
        }
        Ok(Self { v, w })
    }

    /// Rank-1 matrix from an outer product of two vectors.
    pub fn rank_one(v: faer::Col<T>, w: faer::Col<T>) -> Self {
        let vm = Mat::from_fn(v.nrows(), 1, |i, _| v[i]);
        let wm = Mat::from_fn(w.nrows(), 1, |i, _| w[i]);
        Self { v: vm, w: wm }
    }

    /// Exact factored form of a dense matrix via its thin QR factorization:
    /// V = Q, W = Rᵀ, rank bound min(nrows, ncols).
    pub fn from_dense(x: MatRef<'_, T>) -> Self {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Self::zero(x.nrows(), x.ncols());
        }
        let qr = x.qr();
        Self {
            v: qr.compute_thin_Q(),
            w: qr.thin_R().transpose().to_owned(),
        }
    }

    pub fn nrows_v(&self) -> usize {
        self.v.nrows()
    }

    pub fn nrows_w(&self) -> usize {
        self.w.nrows()
    }

    /// Current rank bound (factor column count); the true rank may be lower.
    pub fn rank_bound(&self) -> usize {
        self.v.ncols()
    }

    pub fn v(&self) -> MatRef<'_, T> {
        self.v.as_ref()
    }

    pub fn w(&self) -> MatRef<'_, T> {
        self.w.as_ref()
    }

    /// Materialize V·Wᵀ.
    pub fn to_dense(&self) -> Mat<T> {
        if self.rank_bound() == 0 {
            return Mat::zeros(self.v.nrows(), self.w.nrows());
        }
        &self.v * self.w.transpose()
    }

    /// Exact sum by factor concatenation; rank bounds add.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.v.nrows() != other.v.nrows() || self.w.nrows() != other.w.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "factored sum of {}×{} and {}×{}",
                self.v.nrows(),
                self.w.nrows(),
                other.v.nrows(),
                other.w.nrows()
            )));
        }
        let k1 = self.rank_bound();
        let k = k1 + other.rank_bound();
        let v = Mat::from_fn(self.v.nrows(), k, |i, j| {
            if j < k1 {
                self.v[(i, j)]
            } else {
                other.v[(i, j - k1)]
            }
        });
        let w = Mat::from_fn(self.w.nrows(), k, |i, j| {
            if j < k1 {
                self.w[(i, j)]
            } else {
                other.w[(i, j - k1)]
            }
        });
        Ok(Self { v, w })
    }

    /// Exact scalar multiple (scales the W factor).
    pub fn scaled(&self, alpha: T) -> Self {
        Self {
            v: self.v.clone(),
            w: Mat::from_fn(self.w.nrows(), self.w.ncols(), |i, j| alpha * self.w[(i, j)]),
        }
    }

    /// Frobenius norm via thin QR of both factors and the norm of the small
    /// core R_V·R_Wᵀ; never materializes V·Wᵀ.
    pub fn frobenius_norm(&self) -> T {
        if self.rank_bound() == 0 {
            return T::zero();
        }
        core_matrix(&self.v, &self.w).norm_l2()
    }

    /// Largest singular value, from an SVD of the QR core.
    pub fn max_singular_value(&self) -> T {
        if self.rank_bound() == 0 {
            return T::zero();
        }
        let core = core_matrix(&self.v, &self.w);
        let svd = core.thin_svd().expect("SVD of a finite small core");
        if svd.U().ncols() == 0 {
            T::zero()
        } else {
            svd.S()[0]
        }
    }
}

/// R_V·R_Wᵀ for thin QR factorizations of the two factors. Orthonormal Q's
/// do not change singular values, so this small matrix carries the whole
/// spectrum of V·Wᵀ.
fn core_matrix<T: Scalar>(v: &Mat<T>, w: &Mat<T>) -> Mat<T> {
    let rv = v.qr().thin_R().to_owned();
    let rw = w.qr().thin_R().to_owned();
    &rv * rw.transpose()
}

/// Number of leading singular values admitted by a criterion.
fn admitted_rank<T: Scalar>(sigma: &[T], crit: &TruncationCriterion<T>) -> Result<usize> {
    let validate = |eps: T| -> Result<()> {
        if !(eps > T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "truncation tolerance must be positive, got {eps}"
            )));
        }
        Ok(())
    };
    match *crit {
        TruncationCriterion::Absolute(eps) => {
            validate(eps)?;
            Ok(sigma.iter().take_while(|&&s| s >= eps).count())
        }
        TruncationCriterion::RelativeFraction(eps) => {
            validate(eps)?;
            let total = tail_sums(sigma);
            let budget = eps * eps * total[0];
            Ok(smallest_admissible(&total, budget))
        }
        TruncationCriterion::RelativeToNorm { eps, reference } => {
            validate(eps)?;
            if !(reference > T::zero()) {
                return Err(Error::InvalidConfig(format!(
                    "reference norm must be positive, got {reference}"
                )));
            }
            let total = tail_sums(sigma);
            let budget = (eps * reference) * (eps * reference);
            Ok(smallest_admissible(&total, budget))
        }
    }
}

/// `tail[k] = Σ_{j≥k} σ_j²`, accumulated from the small end for stability.
fn tail_sums<T: Scalar>(sigma: &[T]) -> Vec<T> {
    let mut tail = vec![T::zero(); sigma.len() + 1];
    for j in (0..sigma.len()).rev() {
        tail[j] = tail[j + 1] + sigma[j] * sigma[j];
    }
    tail
}

/// Smallest k with tail[k] ≤ budget.
fn smallest_admissible<T: Scalar>(tail: &[T], budget: T) -> usize {
    for k in 0..tail.len() {
        if tail[k] <= budget {
            return k;
        }
    }
    tail.len() - 1
}

/// Truncate a factored matrix by the given criterion.
pub fn truncate<T: Scalar>(
    x: &FactoredMatrix<T>,
    crit: &TruncationCriterion<T>,
) -> Result<FactoredMatrix<T>> {
    truncate_with_info(x, crit).map(|(out, _)| out)
}

/// Truncate and also report the full input spectrum and the path taken.
pub fn truncate_with_info<T: Scalar>(
    x: &FactoredMatrix<T>,
    crit: &TruncationCriterion<T>,
) -> Result<(FactoredMatrix<T>, TruncationInfo<T>)> {
    if !x.v.norm_l2().is_finite() {
        return Err(Error::NonFinite("left truncation factor"));
    }
    if !x.w.norm_l2().is_finite() {
        return Err(Error::NonFinite("right truncation factor"));
    }
    let k_in = x.rank_bound();
    let (nv, nw) = (x.nrows_v(), x.nrows_w());
    if k_in == 0 {
        // Nothing to do, but still validate the criterion parameters.
        admitted_rank(&[], crit)?;
        return Ok((
            FactoredMatrix::zero(nv, nw),
            TruncationInfo {
                singular_values: Vec::new(),
                kept: 0,
                used_dense_fallback: false,
            },
        ));
    }
    if k_in > 2 * nv.min(nw) {
        OVERSIZE_RANKS.with(|c| c.set(c.get() + 1));
    }

    let use_fallback = k_in >= nv.min(nw);
    let (u, sigma, vt_cols) = if use_fallback {
        DENSE_FALLBACKS.with(|c| c.set(c.get() + 1));
        let dense = x.to_dense();
        let svd = dense
            .thin_svd()
            .map_err(|e| Error::Numerical(format!("dense SVD fallback failed: {e:?}")))?;
        let r = svd.U().ncols();
        let sigma: Vec<T> = (0..r).map(|i| svd.S()[i]).collect();
        (svd.U().to_owned(), sigma, svd.V().to_owned())
    } else {
        let qv = x.v.qr();
        let qw = x.w.qr();
        let core = qv.thin_R() * qw.thin_R().transpose();
        let svd = core
            .thin_svd()
            .map_err(|e| Error::Numerical(format!("core SVD failed: {e:?}")))?;
        let r = svd.U().ncols();
        let sigma: Vec<T> = (0..r).map(|i| svd.S()[i]).collect();
        let u = qv.compute_thin_Q() * svd.U();
        let v = qw.compute_thin_Q() * svd.V();
        (u, sigma, v)
    };
    debug_assert!(sigma.windows(2).all(|w| w[0] >= w[1]));

    let kept = admitted_rank(&sigma, crit)?;
    let v_out = Mat::from_fn(nv, kept, |i, j| u[(i, j)]);
    // Singular values ride on the W factor, leaving V orthonormal.
    let w_out = Mat::from_fn(nw, kept, |i, j| vt_cols[(i, j)] * sigma[j]);
    Ok((
        FactoredMatrix { v: v_out, w: w_out },
        TruncationInfo {
            singular_values: sigma,
            kept,
            used_dense_fallback: use_fallback,
        },
    ))
}
