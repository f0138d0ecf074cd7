//! Gauss-Legendre quadrature on [-1, 1].
//!
//! Used by the assembly routines (coefficients are sampled at quadrature
//! points) and by test oracles that integrate products of basis functions
//! independently of the analytic formulas they check.

use crate::Scalar;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
///
/// Exact for polynomials of degree ≤ 2n−1. Nodes ascending. Computed in `f64`
/// by Newton iteration on the Legendre recurrence from the Chebyshev initial
/// guess, then cast to `T`.
pub fn gauss_legendre<T: Scalar>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    // Symmetry: compute the non-positive half, mirror the rest.
    for i in 0..n.div_ceil(2) {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = T::cast(x);
        weights[i] = T::cast(w);
        nodes[n - 1 - i] = T::cast(-x);
        weights[n - 1 - i] = T::cast(w);
    }
    if n % 2 == 1 {
        // The middle node is exactly zero; Newton leaves rounding noise there.
        nodes[n / 2] = T::zero();
    }
    (nodes, weights)
}

/// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = (n as f64) * (x * p - p_prev) / (x * x - 1.0);
    (p, d)
}
