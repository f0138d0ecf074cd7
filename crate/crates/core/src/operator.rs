//! The tensor-product system operator.
//!
//! The Galerkin system matrix is A = Σ_{l=0}^{m} G_l ⊗ K_l. With the
//! solution vector reshaped column-major into an N_x×N_ξ matrix U
//! (column s holds the spatial coefficients of chaos function s), applying
//! A becomes 𝒜(U) = Σ_l K_l·U·G_lᵀ, which this module evaluates on dense
//! matricized iterates and on factored ones — the factored application only
//! concatenates [K_0V, …, K_mV] and [G_0W, …, G_mW], multiplying the rank
//! bound by m+1 without any dense arithmetic.
//!
//! The explicit Kronecker sum is assembled only for the coarse-level direct
//! solve and for small oracles; a size guard keeps it off large levels.

use faer::sparse::SparseColMat;
use faer::{Col, ColRef, Mat, MatRef};

use crate::lowrank::FactoredMatrix;
use crate::{sparse, Error, Result, Scalar};

/// Default cap on N_x·N_ξ for explicit Kronecker assembly.
pub const KRONECKER_DIMENSION_CAP: usize = 200_000;

/// The operator 𝒜(U) = Σ_l K_l·U·G_lᵀ.
#[derive(Debug, Clone)]
pub struct TensorOperator<T> {
    k_mats: Vec<SparseColMat<usize, T>>,
    g_mats: Vec<SparseColMat<usize, T>>,
}

impl<T: Scalar> TensorOperator<T> {
    /// Pair the spatial matrices K₀…K_m with the stochastic matrices
    /// G₀…G_m (lists of equal length, each square, dimensions consistent
    /// within each side).
    pub fn new(
        k_mats: Vec<SparseColMat<usize, T>>,
        g_mats: Vec<SparseColMat<usize, T>>,
    ) -> Result<Self> {
        if k_mats.is_empty() || k_mats.len() != g_mats.len() {
            return Err(Error::DimensionMismatch(format!(
                "need equally many spatial and stochastic matrices, got {} and {}",
                k_mats.len(),
                g_mats.len()
            )));
        }
        let nx = k_mats[0].nrows();
        let nxi = g_mats[0].nrows();
        for k in &k_mats {
            if k.nrows() != nx || k.ncols() != nx {
                return Err(Error::DimensionMismatch(
                    "spatial matrices must all be square of equal size".into(),
                ));
            }
        }
        for g in &g_mats {
            if g.nrows() != nxi || g.ncols() != nxi {
                return Err(Error::DimensionMismatch(
                    "stochastic matrices must all be square of equal size".into(),
                ));
            }
        }
        Ok(Self { k_mats, g_mats })
    }

    /// Spatial dimension N_x.
    pub fn nx(&self) -> usize {
        self.k_mats[0].nrows()
    }

    /// Stochastic dimension N_ξ.
    pub fn n_xi(&self) -> usize {
        self.g_mats[0].nrows()
    }

    /// Number of expansion terms m (one less than the matrix count).
    pub fn num_terms(&self) -> usize {
        self.k_mats.len() - 1
    }

    pub fn k(&self, l: usize) -> &SparseColMat<usize, T> {
        &self.k_mats[l]
    }

    pub fn g(&self, l: usize) -> &SparseColMat<usize, T> {
        &self.g_mats[l]
    }

    /// 𝒜(U) for a dense matricized iterate.
    pub fn apply_dense(&self, u: MatRef<'_, T>) -> Mat<T> {
        assert_eq!(u.nrows(), self.nx(), "iterate rows must equal N_x");
        assert_eq!(u.ncols(), self.n_xi(), "iterate cols must equal N_ξ");
        let mut out = Mat::zeros(u.nrows(), u.ncols());
        let mut tmp = Mat::zeros(u.nrows(), u.ncols());
        for l in 0..self.k_mats.len() {
            tmp.fill(T::zero());
            sparse::rmul_transpose_acc(tmp.as_mut(), u, self.g_mats[l].as_ref());
            sparse::spmm_acc(out.as_mut(), self.k_mats[l].as_ref(), tmp.as_ref());
        }
        out
    }

    /// 𝒜(X) for a factored iterate: the exact factored form of
    /// apply_dense(V·Wᵀ) with rank bound (m+1)·k.
    pub fn apply_factored(&self, x: &FactoredMatrix<T>) -> FactoredMatrix<T> {
        assert_eq!(x.nrows_v(), self.nx(), "factor V rows must equal N_x");
        assert_eq!(x.nrows_w(), self.n_xi(), "factor W rows must equal N_ξ");
        let k = x.rank_bound();
        let terms = self.k_mats.len();
        let mut v_out = Mat::zeros(self.nx(), terms * k);
        let mut w_out = Mat::zeros(self.n_xi(), terms * k);
        for l in 0..terms {
            let vs = v_out.as_mut().submatrix_mut(0, l * k, self.nx(), k);
            sparse::spmm_acc(vs, self.k_mats[l].as_ref(), x.v());
            let ws = w_out.as_mut().submatrix_mut(0, l * k, self.n_xi(), k);
            sparse::spmm_acc(ws, self.g_mats[l].as_ref(), x.w());
        }
        FactoredMatrix::from_parts(v_out, w_out).expect("equal column counts by construction")
    }

    /// Dense residual F − 𝒜(U).
    pub fn residual_dense(&self, u: MatRef<'_, T>, f: MatRef<'_, T>) -> Mat<T> {
        let au = self.apply_dense(u);
        Mat::from_fn(f.nrows(), f.ncols(), |i, j| f[(i, j)] - au[(i, j)])
    }

    /// Factored residual F − 𝒜(X) (exact concatenation).
    pub fn residual_factored(
        &self,
        x: &FactoredMatrix<T>,
        f: &FactoredMatrix<T>,
    ) -> Result<FactoredMatrix<T>> {
        f.add(&self.apply_factored(x).scaled(-T::one()))
    }

    /// Explicit sparse A = Σ_l G_l ⊗ K_l (column-major vec convention:
    /// block (s, r) of size N_x×N_x carries G_l(s,r)·K_l).
    ///
    /// Guarded by `cap` on the total dimension N_x·N_ξ; exceeding it is an
    /// error suggesting a deeper hierarchy instead of a bigger direct solve.
    pub fn assemble_kronecker(&self, cap: usize) -> Result<SparseColMat<usize, T>> {
        let n = self.nx() * self.n_xi();
        if n > cap {
            return Err(Error::TooLarge(format!(
                "Kronecker dimension {n} exceeds the cap {cap}; \
                 use a coarser direct-solve level"
            )));
        }
        let nx = self.nx();
        let mut triplets: Vec<(usize, usize, T)> = Vec::new();
        for l in 0..self.k_mats.len() {
            let mut g_entries: Vec<(usize, usize, T)> = Vec::new();
            sparse::for_each_entry(self.g_mats[l].as_ref(), |s, r, gv| {
                g_entries.push((s, r, gv));
            });
            sparse::for_each_entry(self.k_mats[l].as_ref(), |i, j, kv| {
                for &(s, r, gv) in &g_entries {
                    triplets.push((s * nx + i, r * nx + j, gv * kv));
                }
            });
        }
        sparse::from_triplets(n, n, &triplets)
    }
}

/// Stack the columns of U into a single vector (column-major convention).
pub fn vectorize<T: Scalar>(u: MatRef<'_, T>) -> Col<T> {
    let (nx, nc) = (u.nrows(), u.ncols());
    Col::from_fn(nx * nc, |i| u[(i % nx, i / nx)])
}

/// Reshape a stacked vector back into an nrows×ncols matrix.
pub fn matricize<T: Scalar>(v: ColRef<'_, T>, nrows: usize, ncols: usize) -> Mat<T> {
    assert_eq!(v.nrows(), nrows * ncols, "vector length must be nrows·ncols");
    Mat::from_fn(nrows, ncols, |i, j| v[j * nrows + i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{chaos, fem, kl};
    use faer::prelude::*;
    use faer::Side;
    use rand::prelude::*;

    /// Operator for the benchmark problem at the given sizes.
    fn benchmark_operator(level: usize, m: usize, p: usize) -> TensorOperator<f64> {
        let expansion = kl::exponential_expansion::<f64>(0.01, 4.0, Some(m)).unwrap();
        let grid = fem::Grid::new(level);
        let k_mats = fem::assemble_kl_stiffnesses(&grid, &expansion).unwrap();
        let basis = chaos::build_basis(m, p).unwrap();
        let mats = chaos::build_matrices::<f64>(&basis);
        let mut g_mats = vec![mats.g0];
        g_mats.extend(mats.gl);
        TensorOperator::new(k_mats, g_mats).unwrap()
    }

    fn random_dense(rng: &mut StdRng, nrows: usize, ncols: usize) -> Mat<f64> {
        Mat::from_fn(nrows, ncols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn vectorize_matricize_round_trip() {
        let mut rng = StdRng::seed_from_u64(21);
        let u = random_dense(&mut rng, 7, 5);
        let v = vectorize(u.as_ref());
        assert_eq!(v[1], u[(1, 0)]);
        assert_eq!(v[7], u[(0, 1)]);
        let back = matricize(v.as_ref(), 7, 5);
        assert!((&back - &u).norm_max() == 0.0);
    }

    #[test]
    fn dense_apply_matches_kronecker_matvec() {
        let op = benchmark_operator(3, 2, 2);
        let a = op.assemble_kronecker(KRONECKER_DIMENSION_CAP).unwrap();
        let mut rng = StdRng::seed_from_u64(22);
        let u = random_dense(&mut rng, op.nx(), op.n_xi());
        let via_matrices = vectorize(op.apply_dense(u.as_ref()).as_ref());
        let via_kronecker = &a * &vectorize(u.as_ref());
        let scale = via_kronecker.norm_l2();
        let mut err = 0.0f64;
        for i in 0..via_matrices.nrows() {
            err = err.max((via_matrices[i] - via_kronecker[i]).abs());
        }
        assert!(err < 1e-12 * scale, "max deviation {err} vs scale {scale}");
    }

    #[test]
    fn factored_apply_matches_dense_apply() {
        let op = benchmark_operator(3, 2, 2);
        let mut rng = StdRng::seed_from_u64(23);
        let v = random_dense(&mut rng, op.nx(), 3);
        let w = random_dense(&mut rng, op.n_xi(), 3);
        let x = FactoredMatrix::from_parts(v, w).unwrap();
        let dense = op.apply_dense(x.to_dense().as_ref());
        let factored = op.apply_factored(&x);
        assert_eq!(factored.rank_bound(), 3 * (op.num_terms() + 1));
        let err = (&factored.to_dense() - &dense).norm_max();
        assert!(err < 1e-13 * dense.norm_max());
    }

    #[test]
    fn zero_rank_passes_through() {
        let op = benchmark_operator(2, 2, 1);
        let x = FactoredMatrix::<f64>::zero(op.nx(), op.n_xi());
        let y = op.apply_factored(&x);
        assert_eq!(y.rank_bound(), 0);
        let u = Mat::<f64>::zeros(op.nx(), op.n_xi());
        assert!(op.apply_dense(u.as_ref()).norm_max() == 0.0);
    }

    #[test]
    fn apply_is_linear() {
        let op = benchmark_operator(2, 3, 2);
        let mut rng = StdRng::seed_from_u64(24);
        let u = random_dense(&mut rng, op.nx(), op.n_xi());
        let v = random_dense(&mut rng, op.nx(), op.n_xi());
        let (a, b) = (1.7, -0.4);
        let combo = Mat::from_fn(op.nx(), op.n_xi(), |i, j| a * u[(i, j)] + b * v[(i, j)]);
        let lhs = op.apply_dense(combo.as_ref());
        let au = op.apply_dense(u.as_ref());
        let av = op.apply_dense(v.as_ref());
        let rhs = Mat::from_fn(op.nx(), op.n_xi(), |i, j| a * au[(i, j)] + b * av[(i, j)]);
        assert!((&lhs - &rhs).norm_max() < 1e-13 * rhs.norm_max().max(1.0));
    }

    #[test]
    fn deterministic_limit_is_the_mean_stiffness() {
        let expansion = kl::exponential_expansion::<f64>(0.01, 4.0, Some(1)).unwrap();
        let grid = fem::Grid::new(2);
        let k0 = fem::assemble_stiffness(&grid, |_, _| expansion.c0).unwrap();
        let nx = grid.n_interior();
        let op = TensorOperator::new(vec![k0.clone()], vec![sparse::identity(1)]).unwrap();
        let mut rng = StdRng::seed_from_u64(25);
        let u = random_dense(&mut rng, nx, 1);
        let applied = op.apply_dense(u.as_ref());
        let direct = sparse::spmm(k0.as_ref(), u.as_ref());
        assert!((&applied - &direct).norm_max() < 1e-15);
    }

    #[test]
    fn kronecker_sum_is_symmetric_and_positive_definite() {
        // Dense eigensolve on a size where it is fast.
        let op = benchmark_operator(2, 11, 1);
        let a = op.assemble_kronecker(KRONECKER_DIMENSION_CAP).unwrap();
        let ad = sparse::to_dense(a.as_ref());
        assert!((&ad - ad.transpose().to_owned()).norm_max() == 0.0);
        let eigs = ad.self_adjoint_eigen(Side::Lower).unwrap();
        let min = (0..ad.nrows()).map(|i| eigs.S()[i]).fold(f64::MAX, f64::min);
        assert!(min > 0.0, "smallest eigenvalue {min} must be positive");

        // The benchmark size from the contract: positive definiteness via a
        // sparse Cholesky factorization succeeding.
        let op = benchmark_operator(3, 11, 1);
        let a = op.assemble_kronecker(KRONECKER_DIMENSION_CAP).unwrap();
        assert!(a.sp_cholesky(Side::Lower).is_ok());
    }

    #[test]
    fn kronecker_blocks_follow_the_stochastic_coupling() {
        let op = benchmark_operator(1, 4, 2);
        let a = op.assemble_kronecker(KRONECKER_DIMENSION_CAP).unwrap();
        let nx = op.nx();
        // Which stochastic blocks may be nonzero: diagonal (G₀) plus the
        // degree-adjacent pairs of each G_l.
        let mut allowed = vec![vec![false; op.n_xi()]; op.n_xi()];
        for s in 0..op.n_xi() {
            allowed[s][s] = true;
        }
        for l in 1..=op.num_terms() {
            sparse::for_each_entry(op.g(l).as_ref(), |s, r, _| {
                allowed[s][r] = true;
            });
        }
        sparse::for_each_entry(a.as_ref(), |gi, gj, v| {
            if v != 0.0 {
                assert!(
                    allowed[gi / nx][gj / nx],
                    "entry in forbidden stochastic block ({}, {})",
                    gi / nx,
                    gj / nx
                );
            }
        });
    }

    #[test]
    fn kronecker_cap_is_enforced() {
        let op = benchmark_operator(3, 2, 2);
        let n = op.nx() * op.n_xi();
        assert!(matches!(
            op.assemble_kronecker(n - 1),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn residual_vanishes_at_the_direct_solution() {
        let op = benchmark_operator(2, 2, 2);
        let a = op.assemble_kronecker(KRONECKER_DIMENSION_CAP).unwrap();
        let grid = fem::Grid::new(2);
        let f0 = fem::assemble_load(&grid, 1.0);
        let mut f = Mat::zeros(op.nx(), op.n_xi());
        for i in 0..op.nx() {
            f[(i, 0)] = f0[i];
        }
        let llt = a.sp_cholesky(Side::Lower).unwrap();
        let rhs = vectorize(f.as_ref());
        let rhs_mat = Mat::from_fn(rhs.nrows(), 1, |i, _| rhs[i]);
        let solution = llt.solve(&rhs_mat);
        let u = matricize(
            Col::from_fn(solution.nrows(), |i| solution[(i, 0)]).as_ref(),
            op.nx(),
            op.n_xi(),
        );
        let r = op.residual_dense(u.as_ref(), f.as_ref());
        assert!(r.norm_l2() < 1e-12 * f.norm_l2());

        // The factored residual of the zero iterate is F itself.
        let xf = FactoredMatrix::<f64>::zero(op.nx(), op.n_xi());
        let ff = FactoredMatrix::rank_one(
            Col::from_fn(op.nx(), |i| f[(i, 0)]),
            Col::from_fn(op.n_xi(), |j| if j == 0 { 1.0 } else { 0.0 }),
        );
        let rf = op.residual_factored(&xf, &ff).unwrap();
        assert!((&rf.to_dense() - &f).norm_max() < 1e-15);

        // Factored and dense residuals agree on a nonzero iterate.
        let mut rng = StdRng::seed_from_u64(26);
        let v = random_dense(&mut rng, op.nx(), 2);
        let w = random_dense(&mut rng, op.n_xi(), 2);
        let x = FactoredMatrix::from_parts(v, w).unwrap();
        let dense_r = op.residual_dense(x.to_dense().as_ref(), f.as_ref());
        let fact_r = op.residual_factored(&x, &ff).unwrap();
        assert!((&fact_r.to_dense() - &dense_r).norm_max() < 1e-13 * dense_r.norm_max());
    }

    #[test]
    fn forcing_matrix_has_rank_one() {
        let grid = fem::Grid::new(3);
        let f0 = fem::assemble_load(&grid, 1.0);
        let basis = chaos::build_basis(4, 2).unwrap();
        let mats = chaos::build_matrices::<f64>(&basis);
        let f = FactoredMatrix::rank_one(f0, mats.f_coeffs);
        assert_eq!(f.rank_bound(), 1);
        let sigma_ratio = f.max_singular_value() / f.frobenius_norm();
        assert!((sigma_ratio - 1.0).abs() < 1e-14, "one nonzero singular value");
    }
}
