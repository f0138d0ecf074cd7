//! Stochastic-space basis: total-degree Legendre polynomial chaos for
//! independent uniform random variables on [−1,1], plus the coupling
//! matrices it induces on the Galerkin system.
//!
//! The basis functions are products ψ_r(ξ) = ∏_d p̃_{r_d}(ξ_d) of Legendre
//! polynomials normalized against the uniform density ρ(ξ)=2^{−m}, indexed
//! by multi-indices r of total degree ≤ p. Under that convention
//! ⟨ψ_r ψ_s⟩ = δ_rs, so the mean-field coupling matrix is the identity, and
//! ⟨ξ_l ψ_r ψ_s⟩ is nonzero only when r and s differ by exactly one in
//! coordinate l, with value given by the three-term recurrence coefficient.

use faer::sparse::SparseColMat;
use faer::Col;
use std::collections::HashMap;

use crate::{sparse, Error, Result, Scalar};

/// Exponent tuple of one chaos basis function (one entry per random variable).
pub type MultiIndex = Vec<usize>;

/// Ordered total-degree basis of dimension (m+p)! / (m! p!).
#[derive(Debug, Clone)]
pub struct ChaosBasis {
    m: usize,
    p: usize,
    indices: Vec<MultiIndex>,
}

/// The stochastic-side matrices of the tensor-product system.
///
/// `g0` is the coefficient vector of the (deterministic) forcing in the chaos
/// basis; for a deterministic load it is the first standard basis vector.
#[derive(Debug, Clone)]
pub struct StochasticMatrices<T> {
    /// Identity under the orthonormal convention.
    pub g0: SparseColMat<usize, T>,
    /// One coupling matrix per random variable, symmetric with zero diagonal.
    pub gl: Vec<SparseColMat<usize, T>>,
    /// Chaos coefficients of the deterministic forcing: e₁.
    pub f_coeffs: Col<T>,
}

impl<T: Scalar> StochasticMatrices<T> {
    /// All stochastic matrices in operator order: G₀ followed by G₁…G_m.
    pub fn g_matrices(&self) -> Vec<SparseColMat<usize, T>> {
        let mut all = Vec::with_capacity(self.gl.len() + 1);
        all.push(self.g0.clone());
        all.extend(self.gl.iter().cloned());
        all
    }
}

impl ChaosBasis {
    /// Number of random variables.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Maximum total degree.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Basis dimension N_ξ.
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    /// The multi-indices in graded lexicographic order (degree ascending,
    /// lexicographic within each degree; the first index is all zeros).
    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }
}

/// Basis dimension (m+p)! / (m! p!) if it fits in `usize`.
pub fn basis_dimension(m: usize, p: usize) -> Option<usize> {
    // Binomial(m+p, p) by the multiplicative formula, in u128 to catch
    // overflow before converting back.
    let mut acc: u128 = 1;
    for i in 1..=p as u128 {
        acc = acc.checked_mul(m as u128 + i)?;
        acc /= i; // exact: partial products are binomials
    }
    usize::try_from(acc).ok()
}

/// Build the total-degree basis for `m` variables and degree bound `p`.
pub fn build_basis(m: usize, p: usize) -> Result<ChaosBasis> {
    if m == 0 {
        return Err(Error::InvalidConfig(
            "chaos basis needs at least one random variable".into(),
        ));
    }
    let dim = basis_dimension(m, p).ok_or_else(|| {
        Error::TooLarge(format!("chaos basis dimension overflows usize (m={m}, p={p})"))
    })?;
    let mut indices = Vec::with_capacity(dim);
    let mut current = vec![0usize; m];
    for degree in 0..=p {
        push_compositions(&mut indices, &mut current, degree, 0);
    }
    debug_assert_eq!(indices.len(), dim);
    Ok(ChaosBasis { m, p, indices })
}

/// Append all m-tuples with the given remaining degree distributed over
/// coordinates `from..`, in lexicographic order.
fn push_compositions(
    out: &mut Vec<MultiIndex>,
    current: &mut MultiIndex,
    remaining: usize,
    from: usize,
) {
    if from + 1 == current.len() {
        current[from] = remaining;
        out.push(current.clone());
        return;
    }
    for v in 0..=remaining {
        current[from] = v;
        push_compositions(out, current, remaining - v, from + 1);
    }
    current[from] = 0;
}

/// Three-term recurrence coefficient of the orthonormal Legendre family:
/// ξ·p̃_n = β_{n+1} p̃_{n+1} + β_n p̃_{n−1} with β_n = n/√(4n²−1).
pub fn recurrence_beta<T: Scalar>(n: usize) -> T {
    if n == 0 {
        return T::zero();
    }
    let n = T::cast_usize(n);
    let four = T::cast(4.0);
    n / (four * n * n - T::one()).sqrt()
}

/// Build the coupling matrices for a basis: G₀ = I and, for each variable l,
/// G_l(r,s) = ⟨ξ_l ψ_r ψ_s⟩ = β_{max(r_l,s_l)} when r and s agree everywhere
/// except coordinate l where they differ by exactly one.
pub fn build_matrices<T: Scalar>(basis: &ChaosBasis) -> StochasticMatrices<T> {
    let n = basis.dim();
    let position: HashMap<&[usize], usize> = basis
        .indices()
        .iter()
        .enumerate()
        .map(|(i, idx)| (idx.as_slice(), i))
        .collect();

    let mut gl = Vec::with_capacity(basis.m());
    let mut bumped: MultiIndex = vec![0; basis.m()];
    for l in 0..basis.m() {
        let mut triplets: Vec<(usize, usize, T)> = Vec::new();
        for (r, idx) in basis.indices().iter().enumerate() {
            // Couple r to the index with coordinate l raised by one (the
            // lowered partner is recorded when visiting that index itself).
            bumped.clone_from_slice(idx);
            bumped[l] += 1;
            if let Some(&s) = position.get(bumped.as_slice()) {
                let beta = recurrence_beta::<T>(bumped[l]);
                triplets.push((r, s, beta));
                triplets.push((s, r, beta));
            }
        }
        gl.push(sparse::from_triplets(n, n, &triplets).expect("coupling matrix assembly"));
    }

    let mut f_coeffs = Col::zeros(n);
    f_coeffs[0] = T::one();
    StochasticMatrices {
        g0: sparse::identity(n),
        gl,
        f_coeffs,
    }
}

/// Normalized Legendre polynomial p̃_n(x) = √(2n+1)·P_n(x): unit norm against
/// the uniform density 1/2 on [−1,1].
pub fn normalized_legendre<T: Scalar>(n: usize, x: T) -> T {
    let mut prev = T::one();
    if n == 0 {
        return prev;
    }
    let mut curr = x;
    for k in 1..n {
        let k_t = T::cast_usize(k);
        let next = ((T::cast_usize(2 * k) + T::one()) * x * curr - k_t * prev)
            / (k_t + T::one());
        prev = curr;
        curr = next;
    }
    curr * (T::cast_usize(2 * n) + T::one()).sqrt()
}
