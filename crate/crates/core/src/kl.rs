//! Karhunen–Loève expansion of the random diffusion coefficient on
//! D = (−1,1)².
//!
//! The coefficient is modeled as c(x,ω) = c₀ + Σ_l √3·√λ_l·c_l(x)·ξ_l with
//! independent ξ_l uniform on [−1,1] (the √3 gives each term unit variance).
//! Two covariance kernels are supported:
//!
//! * exponential, σ²·exp(−‖x−y‖₁/b): separable in the two coordinates, so
//!   2D eigenpairs are products of the analytic 1D eigenpairs of
//!   exp(−|x−y|/b) on an interval;
//! * squared exponential, σ²·exp(−‖x−y‖₂²/b²): eigenpairs computed by a
//!   dense Galerkin eigensolve on a fixed coarse bilinear-quad mesh and
//!   evaluated anywhere by bilinear interpolation.
//!
//! The kernel variance σ² is folded into the eigenvalues, so consumers only
//! ever see the per-term products √λ_l·c_l(x).

use faer::{Mat, Side};

use crate::{Error, Result, Scalar};

/// Grid level of the fixed coarse mesh used for the squared-exponential
/// eigensolve (mesh size 2⁻⁴, 33×33 nodes): fine enough for the handful of
/// smooth modes that kernel needs, small enough for a dense eigensolve.
pub const GALERKIN_EIGENSOLVE_LEVEL: usize = 4;

/// Number of leading eigenvalues used as the reference total energy when
/// selecting the truncation length.
pub const ENERGY_REFERENCE_TERMS: usize = 1000;

/// Default captured-energy fraction for [`choose_m`].
pub const ENERGY_THRESHOLD: f64 = 0.95;

/// Which covariance kernel generates the random field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceKind {
    /// σ²·exp(−‖x−y‖₁ / b)
    Exponential,
    /// σ²·exp(−‖x−y‖₂² / b²)
    SquaredExponential,
}

/// Covariance model parameters.
#[derive(Debug, Clone, Copy)]
pub struct CovarianceModel<T> {
    pub kind: CovarianceKind,
    /// Standard deviation of the field.
    pub sigma: T,
    /// Correlation length.
    pub b: T,
}

impl<T: Scalar> CovarianceModel<T> {
    pub fn new(kind: CovarianceKind, sigma: T, b: T) -> Result<Self> {
        if !(sigma > T::zero()) || !(b > T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "covariance needs sigma > 0 and b > 0, got sigma={sigma}, b={b}"
            )));
        }
        Ok(Self { kind, sigma, b })
    }

    /// Pointwise kernel value for the unit-variance (σ=1) version.
    fn unit_kernel(&self, x: [T; 2], y: [T; 2]) -> T {
        let dx = (x[0] - y[0]).abs();
        let dy = (x[1] - y[1]).abs();
        match self.kind {
            CovarianceKind::Exponential => (-(dx + dy) / self.b).exp(),
            CovarianceKind::SquaredExponential => {
                (-(dx * dx + dy * dy) / (self.b * self.b)).exp()
            }
        }
    }
}

/// Parity of a 1D interval eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Parity {
    Even,
    Odd,
}

/// One normalized 1D eigenfunction of exp(−|x−y|/b) on [−a,a]:
/// cos(ωx)/‖cos‖ or sin(ωx)/‖sin‖.
#[derive(Debug, Clone, Copy)]
pub struct Mode1d<T> {
    parity: Parity,
    omega: T,
    inv_norm: T,
}

impl<T: Scalar> Mode1d<T> {
    pub fn evaluate(&self, x: T) -> T {
        let phase = self.omega * x;
        match self.parity {
            Parity::Even => phase.cos() * self.inv_norm,
            Parity::Odd => phase.sin() * self.inv_norm,
        }
    }
}

/// One 1D eigenpair of the interval kernel.
#[derive(Debug, Clone, Copy)]
pub struct Eigenpair1d<T> {
    pub lambda: T,
    pub mode: Mode1d<T>,
}

/// Eigenfunction values on the full (boundary-inclusive) lattice of a uniform
/// grid, evaluated anywhere by bilinear interpolation.
#[derive(Debug, Clone)]
pub struct NodalFunction<T> {
    /// Mesh size of the lattice.
    h: T,
    /// Nodes per side.
    n1: usize,
    /// Values ordered lexicographically by (y, x).
    values: Vec<T>,
}

impl<T: Scalar> NodalFunction<T> {
    pub fn evaluate(&self, x: T, y: T) -> T {
        let cells = T::cast_usize(self.n1 - 1);
        let fx = ((x + T::one()) / self.h).min(cells).max(T::zero());
        let fy = ((y + T::one()) / self.h).min(cells).max(T::zero());
        let ix = (fx.floor().as_f64() as usize).min(self.n1 - 2);
        let iy = (fy.floor().as_f64() as usize).min(self.n1 - 2);
        let tx = fx - T::cast_usize(ix);
        let ty = fy - T::cast_usize(iy);
        let v = |i: usize, j: usize| self.values[j * self.n1 + i];
        let one = T::one();
        (one - tx) * (one - ty) * v(ix, iy)
            + tx * (one - ty) * v(ix + 1, iy)
            + tx * ty * v(ix + 1, iy + 1)
            + (one - tx) * ty * v(ix, iy + 1)
    }
}

/// Evaluator for one 2D eigenfunction.
#[derive(Debug, Clone)]
pub enum Eigenfunction<T> {
    /// Product c_i(x)·c_j(y) of 1D interval modes (exponential kernel).
    SeparableProduct { fx: Mode1d<T>, fy: Mode1d<T> },
    /// Nodal values with bilinear interpolation (squared-exponential kernel).
    Nodal(NodalFunction<T>),
}

impl<T: Scalar> Eigenfunction<T> {
    pub fn evaluate(&self, x: T, y: T) -> T {
        match self {
            Eigenfunction::SeparableProduct { fx, fy } => fx.evaluate(x) * fy.evaluate(y),
            Eigenfunction::Nodal(f) => f.evaluate(x, y),
        }
    }
}

/// One term of the 2D expansion: eigenvalue (σ² already folded in) and the
/// L²-normalized eigenfunction.
#[derive(Debug, Clone)]
pub struct KLTerm<T> {
    pub lambda: T,
    pub eigenfunction: Eigenfunction<T>,
}

/// Truncated expansion of the diffusion coefficient.
#[derive(Debug, Clone)]
pub struct KLExpansion<T> {
    /// Constant mean of the field.
    pub c0: T,
    /// Multiplier applied to each ξ_l so the term has unit variance.
    pub scale: T,
    /// Terms sorted by eigenvalue, non-increasing.
    pub terms: Vec<KLTerm<T>>,
}

impl<T: Scalar> KLExpansion<T> {
    /// Number of retained random variables.
    pub fn m(&self) -> usize {
        self.terms.len()
    }

    /// Spatial coefficient of ξ_l at a point: scale·√λ_l·c_l(x,y).
    pub fn term_coefficient(&self, l: usize, x: T, y: T) -> T {
        let term = &self.terms[l];
        self.scale * term.lambda.sqrt() * term.eigenfunction.evaluate(x, y)
    }
}

/// Find the root of `f` in `[lo, hi]` by bisection; `f(lo)` and `f(hi)` must
/// have opposite signs.
fn bisect<T: Scalar>(mut lo: T, mut hi: T, f: impl Fn(T) -> T) -> Result<T> {
    let (flo, fhi) = (f(lo), f(hi));
    if flo == T::zero() {
        return Ok(lo);
    }
    if fhi == T::zero() {
        return Ok(hi);
    }
    if (flo > T::zero()) == (fhi > T::zero()) {
        return Err(Error::Numerical(format!(
            "bisection bracket [{lo}, {hi}] does not change sign"
        )));
    }
    let two = T::cast(2.0);
    for _ in 0..200 {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break; // interval at floating-point resolution
        }
        let fmid = f(mid);
        if fmid == T::zero() {
            return Ok(mid);
        }
        if (fmid > T::zero()) == (flo > T::zero()) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / two)
}

/// Analytic eigenpairs of the 1D kernel exp(−|x−y|/b) on [−a,a], largest
/// first.
///
/// With c = 1/b, eigenvalues are λ = 2c/(ω²+c²) where ω solves, alternately,
/// c·cos(ωa) − ω·sin(ωa) = 0 (even eigenfunctions cos(ωx)) on
/// ωa ∈ (nπ, nπ+π/2), and ω·cos(ωa) + c·sin(ωa) = 0 (odd eigenfunctions
/// sin(ωx)) on ωa ∈ (nπ+π/2, (n+1)π). These forms are the transcendental
/// equations tan(ωa)=c/ω and tan(ωa)=−ω/c cleared of tangent poles, so each
/// bracketing interval contains exactly one sign change.
pub fn exponential_eigenpairs_1d<T: Scalar>(
    b: T,
    a: T,
    count: usize,
) -> Result<Vec<Eigenpair1d<T>>> {
    if !(b > T::zero()) || !(a > T::zero()) || count == 0 {
        return Err(Error::InvalidConfig(format!(
            "1D eigenpairs need b > 0, a > 0, count ≥ 1 (got b={b}, a={a}, count={count})"
        )));
    }
    let c = T::one() / b;
    let pi = T::cast(std::f64::consts::PI);
    let half_pi = pi / T::cast(2.0);
    let two = T::cast(2.0);

    let mut pairs = Vec::with_capacity(count);
    for k in 0..count {
        let n = T::cast_usize(k / 2);
        let (parity, lo, hi) = if k % 2 == 0 {
            (Parity::Even, n * pi / a, (n * pi + half_pi) / a)
        } else {
            (Parity::Odd, (n * pi + half_pi) / a, (n + T::one()) * pi / a)
        };
        let f = |w: T| match parity {
            Parity::Even => c * (w * a).cos() - w * (w * a).sin(),
            Parity::Odd => w * (w * a).cos() + c * (w * a).sin(),
        };
        let omega = bisect(lo, hi, f).map_err(|e| {
            Error::Numerical(format!("eigenpair {k} of exp(−|x−y|/b), b={b}: {e}"))
        })?;
        let residual = f(omega).abs() / c.max(omega);
        if residual > T::cast(1e-12) {
            return Err(Error::Numerical(format!(
                "eigenpair {k}: root residual {residual} exceeds 1e-12"
            )));
        }
        let lambda = two * c / (omega * omega + c * c);
        let sin_term = (two * omega * a).sin() / (two * omega);
        let norm_sq = match parity {
            Parity::Even => a + sin_term,
            Parity::Odd => a - sin_term,
        };
        pairs.push(Eigenpair1d {
            lambda,
            mode: Mode1d {
                parity,
                omega,
                inv_norm: T::one() / norm_sq.sqrt(),
            },
        });
    }
    debug_assert!(pairs.windows(2).all(|w| w[0].lambda > w[1].lambda));
    Ok(pairs)
}

/// Top `count` 2D eigenpairs of the separable kernel from 1D eigenpairs:
/// eigenvalues are products λ_i·λ_j with eigenfunctions c_i(x)·c_j(y),
/// sorted non-increasing with ties broken by (i,j) lexicographic order.
///
/// The 1D list must be long enough that the top `count` products of the full
/// (infinite) product set all lie within the given list's products; the
/// caller checks coverage via the next unused 1D eigenvalue (see
/// [`exponential_expansion`]).
pub fn tensorize_2d<T: Scalar>(one_d: &[Eigenpair1d<T>], count: usize) -> Vec<KLTerm<T>> {
    assert!(
        count <= one_d.len() * one_d.len(),
        "requested {count} products from {} 1D pairs",
        one_d.len()
    );
    let mut products: Vec<(T, usize, usize)> = Vec::with_capacity(one_d.len() * one_d.len());
    for (i, pi) in one_d.iter().enumerate() {
        for (j, pj) in one_d.iter().enumerate() {
            products.push((pi.lambda * pj.lambda, i, j));
        }
    }
    products.sort_by(|x, y| {
        y.0.partial_cmp(&x.0)
            .expect("finite eigenvalues")
            .then(x.1.cmp(&y.1))
            .then(x.2.cmp(&y.2))
    });
    products
        .into_iter()
        .take(count)
        .map(|(lambda, i, j)| KLTerm {
            lambda,
            eigenfunction: Eigenfunction::SeparableProduct {
                fx: one_d[i].mode,
                fy: one_d[j].mode,
            },
        })
        .collect()
}

/// Smallest m whose leading eigenvalues capture at least `threshold` of the
/// total energy Σ λ_l over the whole provided list.
pub fn choose_m<T: Scalar>(eigenvalues: &[T], threshold: T) -> Result<usize> {
    if !(threshold > T::zero() && threshold < T::one()) {
        return Err(Error::InvalidConfig(format!(
            "energy threshold must lie in (0,1), got {threshold}"
        )));
    }
    let total: T = eigenvalues.iter().fold(T::zero(), |acc, &l| acc + l);
    if !(total > T::zero()) {
        return Err(Error::InvalidConfig(
            "cannot choose a truncation length from an all-zero spectrum".into(),
        ));
    }
    let target = threshold * total;
    let mut partial = T::zero();
    for (i, &l) in eigenvalues.iter().enumerate() {
        partial += l;
        if partial >= target {
            return Ok(i + 1);
        }
    }
    Ok(eigenvalues.len())
}

/// Build the exponential-covariance expansion on (−1,1)².
///
/// The truncation length is `m_override` if given, otherwise the smallest m
/// capturing 95% of the energy of the leading [`ENERGY_REFERENCE_TERMS`]
/// 2D eigenvalues. σ² multiplies the returned eigenvalues.
pub fn exponential_expansion<T: Scalar>(
    sigma: T,
    b: T,
    m_override: Option<usize>,
) -> Result<KLExpansion<T>> {
    let model = CovarianceModel::new(CovarianceKind::Exponential, sigma, b)?;
    let reference = ENERGY_REFERENCE_TERMS.max(m_override.unwrap_or(0));

    // Grow the 1D list until its products provably cover the top `reference`
    // 2D eigenvalues: every excluded product is ≤ λ_{n+1}·λ_1, so coverage
    // holds once that bound drops below the smallest included product.
    let mut n = 64;
    let terms = loop {
        let one_d = exponential_eigenpairs_1d(b, T::one(), n + 1)?;
        let candidates = tensorize_2d(&one_d[..n], reference.min(n * n));
        let excluded_bound = one_d[n].lambda * one_d[0].lambda;
        if candidates.len() == reference && excluded_bound <= candidates[reference - 1].lambda {
            break candidates;
        }
        n *= 2;
        if n > 100_000 {
            return Err(Error::Numerical(
                "2D eigenvalue coverage not reached; eigenvalues decay too slowly".into(),
            ));
        }
    };

    let eigenvalues: Vec<T> = terms.iter().map(|t| t.lambda).collect();
    let m = match m_override {
        Some(m) => {
            if m == 0 || m > terms.len() {
                return Err(Error::InvalidConfig(format!(
                    "m override {m} outside 1..={}",
                    terms.len()
                )));
            }
            m
        }
        None => choose_m(&eigenvalues, T::cast(ENERGY_THRESHOLD))?,
    };

    let sigma_sq = model.sigma * model.sigma;
    let terms = terms
        .into_iter()
        .take(m)
        .map(|t| KLTerm {
            lambda: sigma_sq * t.lambda,
            eigenfunction: t.eigenfunction,
        })
        .collect();
    Ok(KLExpansion {
        c0: T::one(),
        scale: T::cast(3.0).sqrt(),
        terms,
    })
}

/// Build the squared-exponential expansion on (−1,1)² via the coarse-grid
/// Galerkin eigensolve; truncation policy as in [`exponential_expansion`].
pub fn squared_exponential_expansion<T: Scalar>(
    sigma: T,
    b: T,
    m_override: Option<usize>,
) -> Result<KLExpansion<T>> {
    let model = CovarianceModel::new(CovarianceKind::SquaredExponential, sigma, b)?;
    let (eigenvalues, terms) = galerkin_eigenpairs(&model, GALERKIN_EIGENSOLVE_LEVEL)?;

    let reference = ENERGY_REFERENCE_TERMS.min(eigenvalues.len());
    let m = match m_override {
        Some(m) => {
            if m == 0 || m > terms.len() {
                return Err(Error::InvalidConfig(format!(
                    "m override {m} outside 1..={}",
                    terms.len()
                )));
            }
            m
        }
        None => choose_m(&eigenvalues[..reference], T::cast(ENERGY_THRESHOLD))?,
    };

    let sigma_sq = model.sigma * model.sigma;
    let terms = terms
        .into_iter()
        .take(m)
        .map(|t| KLTerm {
            lambda: sigma_sq * t.lambda,
            eigenfunction: t.eigenfunction,
        })
        .collect();
    Ok(KLExpansion {
        c0: T::one(),
        scale: T::cast(3.0).sqrt(),
        terms,
    })
}

/// Top `count` eigenpairs of ∫_D r(x,y)c(y)dy = λ·c(x) in the bilinear FEM
/// space of the given grid level (unit-variance kernel; boundary nodes
/// included since the eigenproblem has no boundary condition).
pub fn galerkin_eigensolve<T: Scalar>(
    cov: &CovarianceModel<T>,
    level: usize,
    count: usize,
) -> Result<Vec<KLTerm<T>>> {
    let n1 = (1usize << (level + 1)) + 1;
    if count > n1 * n1 {
        return Err(Error::InvalidConfig(format!(
            "requested {count} eigenpairs from a {n1}×{n1} node grid"
        )));
    }
    let (_, mut terms) = galerkin_eigenpairs(cov, level)?;
    terms.truncate(count);
    Ok(terms)
}

/// Full spectrum (non-increasing) and all eigenpairs of the discrete
/// covariance operator on the given level, unit variance.
fn galerkin_eigenpairs<T: Scalar>(
    cov: &CovarianceModel<T>,
    level: usize,
) -> Result<(Vec<T>, Vec<KLTerm<T>>)> {
    let cells = 1usize << (level + 1);
    let n1 = cells + 1;
    let n = n1 * n1;
    let h = T::cast(2.0) / T::cast_usize(cells);

    // 2×2 Gauss points per element, and the bilinear shape values there.
    let g = T::one() / T::cast(3.0).sqrt();
    let ref_pts = [(-g, -g), (g, -g), (g, g), (-g, g)];
    let local_nodes = [(0usize, 0usize), (1, 0), (1, 1), (0, 1)];
    let shape = |xi: T, eta: T| -> [T; 4] {
        let q = T::cast(0.25);
        [
            q * (T::one() - xi) * (T::one() - eta),
            q * (T::one() + xi) * (T::one() - eta),
            q * (T::one() + xi) * (T::one() + eta),
            q * (T::one() - xi) * (T::one() + eta),
        ]
    };

    // Quadrature points (coordinates) and the sparse map A with
    // A(q, node) = w_q·φ_node(x_q); then B = Aᵀ·R·A approximates
    // B_ij = ∫∫ φ_i(x) r(x,y) φ_j(y) dy dx.
    let nq = 4 * cells * cells;
    let w_q = h * h / T::cast(4.0);
    let mut q_coords: Vec<[T; 2]> = Vec::with_capacity(nq);
    let mut a_nodes: Vec<[usize; 4]> = Vec::with_capacity(nq);
    let mut a_vals: Vec<[T; 4]> = Vec::with_capacity(nq);
    for ey in 0..cells {
        for ex in 0..cells {
            let x0 = -T::one() + T::cast_usize(ex) * h;
            let y0 = -T::one() + T::cast_usize(ey) * h;
            for &(xi, eta) in &ref_pts {
                let x = x0 + h * (T::one() + xi) / T::cast(2.0);
                let y = y0 + h * (T::one() + eta) / T::cast(2.0);
                q_coords.push([x, y]);
                let s = shape(xi, eta);
                let mut nodes = [0usize; 4];
                let mut vals = [T::zero(); 4];
                for (k, &(dx, dy)) in local_nodes.iter().enumerate() {
                    nodes[k] = (ey + dy) * n1 + (ex + dx);
                    vals[k] = w_q * s[k];
                }
                a_nodes.push(nodes);
                a_vals.push(vals);
            }
        }
    }

    // C = R·A computed row-wise so the nq×nq kernel matrix is never stored.
    let mut c_mat: Mat<T> = Mat::zeros(nq, n);
    let mut kernel_row: Vec<T> = vec![T::zero(); nq];
    for q in 0..nq {
        for (r, val) in kernel_row.iter_mut().enumerate() {
            *val = cov.unit_kernel(q_coords[q], q_coords[r]);
        }
        for r in 0..nq {
            let k = kernel_row[r];
            for t in 0..4 {
                c_mat[(q, a_nodes[r][t])] += k * a_vals[r][t];
            }
        }
    }
    // B = Aᵀ·C, symmetrized against quadrature round-off.
    let mut b_mat: Mat<T> = Mat::zeros(n, n);
    for j in 0..n {
        for q in 0..nq {
            let cqj = c_mat[(q, j)];
            for t in 0..4 {
                b_mat[(a_nodes[q][t], j)] += a_vals[q][t] * cqj;
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            let avg = (b_mat[(i, j)] + b_mat[(j, i)]) / T::cast(2.0);
            b_mat[(i, j)] = avg;
            b_mat[(j, i)] = avg;
        }
    }
    drop(c_mat);

    // Full mass matrix (element mass (h²/36)·[[4,2,1,2],…]).
    let mut m_mat: Mat<T> = Mat::zeros(n, n);
    let mass_w = h * h / T::cast(36.0);
    let mass_local: [[f64; 4]; 4] = [
        [4.0, 2.0, 1.0, 2.0],
        [2.0, 4.0, 2.0, 1.0],
        [1.0, 2.0, 4.0, 2.0],
        [2.0, 1.0, 2.0, 4.0],
    ];
    for ey in 0..cells {
        for ex in 0..cells {
            let nodes: Vec<usize> = local_nodes
                .iter()
                .map(|&(dx, dy)| (ey + dy) * n1 + (ex + dx))
                .collect();
            for r in 0..4 {
                for c in 0..4 {
                    m_mat[(nodes[r], nodes[c])] += mass_w * T::cast(mass_local[r][c]);
                }
            }
        }
    }

    // Generalized eigenproblem B·c = λ·M·c, reduced via M = L·Lᵀ to the
    // ordinary symmetric problem (L⁻¹·B·L⁻ᵀ)·z = λ·z with c = L⁻ᵀ·z, which
    // makes the eigenvectors M-orthonormal (i.e. L²-normalized).
    let l_mat = cholesky_lower(m_mat)?;
    forward_solve_in_place(&l_mat, &mut b_mat); // B ← L⁻¹·B
    let mut bt = b_mat.transpose().to_owned();
    drop(b_mat);
    forward_solve_in_place(&l_mat, &mut bt); // Bᵀ ← L⁻¹·Bᵀ = L⁻¹·B·L⁻ᵀ (symmetric)

    let eig = bt
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("covariance eigensolve failed: {e:?}")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.S()[j]
            .partial_cmp(&eig.S()[i])
            .expect("finite eigenvalues")
    });

    let mut eigenvalues = Vec::with_capacity(n);
    let mut z = Mat::zeros(n, n);
    for (col, &idx) in order.iter().enumerate() {
        eigenvalues.push(eig.S()[idx]);
        for row in 0..n {
            z[(row, col)] = eig.U()[(row, idx)];
        }
    }
    back_solve_transpose_in_place(&l_mat, &mut z); // columns: c = L⁻ᵀ·z

    let terms = (0..n)
        .map(|col| KLTerm {
            lambda: eigenvalues[col],
            eigenfunction: Eigenfunction::Nodal(NodalFunction {
                h,
                n1,
                values: (0..n).map(|row| z[(row, col)]).collect(),
            }),
        })
        .collect();
    Ok((eigenvalues, terms))
}

/// Dense Cholesky factor L (lower) of a symmetric positive definite matrix.
fn cholesky_lower<T: Scalar>(mut a: Mat<T>) -> Result<Mat<T>> {
    let n = a.nrows();
    for k in 0..n {
        let d = a[(k, k)];
        if !(d > T::zero()) {
            return Err(Error::Numerical(format!(
                "Cholesky pivot {k} is not positive: {d}"
            )));
        }
        let d = d.sqrt();
        a[(k, k)] = d;
        for i in (k + 1)..n {
            a[(i, k)] /= d;
        }
        for j in (k + 1)..n {
            let ljk = a[(j, k)];
            if ljk == T::zero() {
                continue;
            }
            for i in j..n {
                let delta = a[(i, k)] * ljk;
                a[(i, j)] -= delta;
            }
        }
    }
    // Zero the strict upper triangle so the factor is exactly lower.
    for j in 1..n {
        for i in 0..j {
            a[(i, j)] = T::zero();
        }
    }
    Ok(a)
}

/// Solve L·X = B in place (B ← X) for lower-triangular L.
fn forward_solve_in_place<T: Scalar>(l: &Mat<T>, b: &mut Mat<T>) {
    let n = l.nrows();
    for c in 0..b.ncols() {
        for j in 0..n {
            let xj = b[(j, c)] / l[(j, j)];
            b[(j, c)] = xj;
            for i in (j + 1)..n {
                let delta = l[(i, j)] * xj;
                b[(i, c)] -= delta;
            }
        }
    }
}

/// Solve Lᵀ·X = B in place (B ← X) for lower-triangular L.
fn back_solve_transpose_in_place<T: Scalar>(l: &Mat<T>, b: &mut Mat<T>) {
    let n = l.nrows();
    for c in 0..b.ncols() {
        for j in (0..n).rev() {
            let mut s = b[(j, c)];
            for i in (j + 1)..n {
                s -= l[(i, j)] * b[(i, c)];
            }
            b[(j, c)] = s / l[(j, j)];
        }
    }
}
