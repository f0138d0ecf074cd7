//! Sparse-matrix helpers on top of faer's CSC type.
//!
//! Assembly goes through [`from_triplets`], which sums duplicate coordinates
//! (the natural element-assembly contract) and drops entries that are exactly
//! zero after summation, so finished matrices never store explicit zeros.
//!
//! The product kernels are hand-written because the solvers spend most of
//! their time in `sparse · dense` and `dense · sparseᵀ` with dense blocks of
//! many columns; accumulating variants avoid one full-size temporary per term
//! of the operator sum. They are checked against faer's own operators in the
//! tests below.

use faer::reborrow::*;
use faer::sparse::{SparseColMat, SparseColMatRef, Triplet};
use faer::{Col, Mat, MatMut, MatRef};

use crate::{Error, Result, Scalar};

/// Build a CSC matrix from `(row, col, value)` triplets.
///
/// Duplicate coordinates are summed; entries equal to zero after summation
/// (including exact cancellations) are pruned from the stored pattern.
pub fn from_triplets<T: Scalar>(
    nrows: usize,
    ncols: usize,
    triplets: &[(usize, usize, T)],
) -> Result<SparseColMat<usize, T>> {
    let entries: Vec<Triplet<usize, usize, T>> = triplets
        .iter()
        .map(|&(r, c, v)| Triplet::new(r, c, v))
        .collect();
    let raw = SparseColMat::try_new_from_triplets(nrows, ncols, &entries)
        .map_err(|e| Error::InvalidConfig(format!("triplet assembly: {e:?}")))?;
    // Rebuild without the entries that summed to exactly zero.
    let mut kept = Vec::with_capacity(raw.compute_nnz());
    for_each_entry(raw.as_ref(), |r, c, v| {
        if v != T::zero() {
            kept.push(Triplet::new(r, c, v));
        }
    });
    if kept.len() == raw.compute_nnz() {
        return Ok(raw);
    }
    SparseColMat::try_new_from_triplets(nrows, ncols, &kept)
        .map_err(|e| Error::InvalidConfig(format!("triplet assembly: {e:?}")))
}

/// n×n identity in CSC form.
pub fn identity<T: Scalar>(n: usize) -> SparseColMat<usize, T> {
    let triplets: Vec<_> = (0..n).map(|i| Triplet::new(i, i, T::one())).collect();
    SparseColMat::try_new_from_triplets(n, n, &triplets).expect("identity assembly")
}

/// Visit every stored entry as `f(row, col, value)` in column-major order.
pub fn for_each_entry<T: Scalar>(
    a: SparseColMatRef<'_, usize, T>,
    mut f: impl FnMut(usize, usize, T),
) {
    let sym = a.symbolic();
    let (col_ptr, row_idx) = (sym.col_ptr(), sym.row_idx());
    let values = a.val();
    for j in 0..a.ncols() {
        for idx in col_ptr[j]..col_ptr[j + 1] {
            f(row_idx[idx], j, values[idx]);
        }
    }
}

/// Explicit transpose (new CSC storage, not a view).
pub fn transpose<T: Scalar>(a: SparseColMatRef<'_, usize, T>) -> SparseColMat<usize, T> {
    let mut triplets = Vec::with_capacity(a.compute_nnz());
    for_each_entry(a, |r, c, v| triplets.push((c, r, v)));
    from_triplets(a.ncols(), a.nrows(), &triplets).expect("transpose assembly")
}

/// Diagonal of a square sparse matrix as a dense vector (absent entries are 0).
pub fn diagonal<T: Scalar>(a: SparseColMatRef<'_, usize, T>) -> Col<T> {
    assert_eq!(a.nrows(), a.ncols(), "diagonal of a non-square matrix");
    let mut d = Col::zeros(a.nrows());
    for_each_entry(a, |r, c, v| {
        if r == c {
            d[r] = v;
        }
    });
    d
}

/// Dense copy, for small oracles and the coarse-level direct solve.
pub fn to_dense<T: Scalar>(a: SparseColMatRef<'_, usize, T>) -> Mat<T> {
    let mut out = Mat::zeros(a.nrows(), a.ncols());
    for_each_entry(a, |r, c, v| out[(r, c)] = v);
    out
}

/// `out += A · X` with sparse `A`, dense `X`.
pub fn spmm_acc<T: Scalar>(
    mut out: MatMut<'_, T>,
    a: SparseColMatRef<'_, usize, T>,
    x: MatRef<'_, T>,
) {
    assert_eq!(a.ncols(), x.nrows(), "spmm_acc: inner dimensions");
    assert_eq!(out.nrows(), a.nrows(), "spmm_acc: output rows");
    assert_eq!(out.ncols(), x.ncols(), "spmm_acc: output cols");
    let sym = a.symbolic();
    let (col_ptr, row_idx) = (sym.col_ptr(), sym.row_idx());
    let values = a.val();
    for c in 0..x.ncols() {
        let xc = x.col(c);
        let mut oc = out.rb_mut().col_mut(c);
        for j in 0..a.ncols() {
            let xj = xc[j];
            if xj == T::zero() {
                continue;
            }
            for idx in col_ptr[j]..col_ptr[j + 1] {
                oc[row_idx[idx]] += values[idx] * xj;
            }
        }
    }
}

/// `A · X` with sparse `A`, dense `X`.
pub fn spmm<T: Scalar>(a: SparseColMatRef<'_, usize, T>, x: MatRef<'_, T>) -> Mat<T> {
    let mut out = Mat::zeros(a.nrows(), x.ncols());
    spmm_acc(out.as_mut(), a, x);
    out
}

/// `out += X · Gᵀ` with dense `X`, sparse `G`.
///
/// Column `r` of the result accumulates `G(r,s)·X[:,s]` over the stored
/// entries `(r, s)` of `G`, which walks `G` in its native CSC order.
pub fn rmul_transpose_acc<T: Scalar>(
    mut out: MatMut<'_, T>,
    x: MatRef<'_, T>,
    g: SparseColMatRef<'_, usize, T>,
) {
    assert_eq!(x.ncols(), g.ncols(), "rmul_transpose_acc: inner dimensions");
    assert_eq!(out.nrows(), x.nrows(), "rmul_transpose_acc: output rows");
    assert_eq!(out.ncols(), g.nrows(), "rmul_transpose_acc: output cols");
    let sym = g.symbolic();
    let (col_ptr, row_idx) = (sym.col_ptr(), sym.row_idx());
    let values = g.val();
    let nrows = x.nrows();
    for s in 0..g.ncols() {
        let xs = x.col(s);
        for idx in col_ptr[s]..col_ptr[s + 1] {
            let r = row_idx[idx];
            let v = values[idx];
            let mut or = out.rb_mut().col_mut(r);
            for i in 0..nrows {
                or[i] += v * xs[i];
            }
        }
    }
}

/// `X · Gᵀ` with dense `X`, sparse `G`.
pub fn rmul_transpose<T: Scalar>(
    x: MatRef<'_, T>,
    g: SparseColMatRef<'_, usize, T>,
) -> Mat<T> {
    let mut out = Mat::zeros(x.nrows(), g.nrows());
    rmul_transpose_acc(out.as_mut(), x, g);
    out
}

/// Write the stored entries as `row col value` lines (0-based indices,
/// 17 significant digits), a plain interchange format for cross-checking
/// assembled matrices against other tools.
pub fn write_triplets<T: Scalar>(
    a: SparseColMatRef<'_, usize, T>,
    out: &mut dyn std::io::Write,
) -> std::io::Result<()> {
    let sym = a.symbolic();
    let (col_ptr, row_idx) = (sym.col_ptr(), sym.row_idx());
    let values = a.val();
    for j in 0..a.ncols() {
        for idx in col_ptr[j]..col_ptr[j + 1] {
            writeln!(out, "{} {} {:.16e}", row_idx[idx], j, values[idx].as_f64())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    fn random_sparse(rng: &mut StdRng, nrows: usize, ncols: usize, nnz: usize) -> SparseColMat<usize, f64> {
        let triplets: Vec<_> = (0..nnz)
            .map(|_| {
                (
                    rng.random_range(0..nrows),
                    rng.random_range(0..ncols),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        from_triplets(nrows, ncols, &triplets).unwrap()
    }

    #[test]
    fn duplicates_are_summed_and_zeros_pruned() {
        let m = from_triplets::<f64>(3, 3, &[(0, 0, 1.0), (0, 0, 2.0), (1, 2, 5.0), (1, 2, -5.0)])
            .unwrap();
        assert_eq!(m.compute_nnz(), 1, "cancelled entry must not be stored");
        assert_eq!(to_dense(m.as_ref())[(0, 0)], 3.0);
    }

    #[test]
    fn spmm_matches_faer_operator() {
        let mut rng = StdRng::seed_from_u64(7);
        let a = random_sparse(&mut rng, 40, 30, 200);
        let x = Mat::from_fn(30, 11, |_, _| rng.random_range(-1.0..1.0));
        let mine = spmm(a.as_ref(), x.as_ref());
        let reference = &a * &x;
        assert!((&mine - &reference).norm_max() < 1e-14);
    }

    #[test]
    fn spmm_acc_accumulates() {
        let mut rng = StdRng::seed_from_u64(8);
        let a = random_sparse(&mut rng, 20, 20, 80);
        let x = Mat::from_fn(20, 5, |_, _| rng.random_range(-1.0..1.0));
        let base = Mat::from_fn(20, 5, |_, _| rng.random_range(-1.0..1.0));
        let mut out = base.clone();
        spmm_acc(out.as_mut(), a.as_ref(), x.as_ref());
        let reference = &base + &(&a * &x);
        assert!((&out - &reference).norm_max() < 1e-14);
    }

    #[test]
    fn rmul_transpose_matches_dense() {
        let mut rng = StdRng::seed_from_u64(9);
        let g = random_sparse(&mut rng, 13, 17, 60);
        let x = Mat::from_fn(24, 17, |_, _| rng.random_range(-1.0..1.0));
        let mine = rmul_transpose(x.as_ref(), g.as_ref());
        let gd = to_dense(g.as_ref());
        let reference = &x * gd.transpose();
        assert!((&mine - &reference).norm_max() < 1e-13);
    }

    #[test]
    fn transpose_round_trip() {
        let mut rng = StdRng::seed_from_u64(10);
        let a = random_sparse(&mut rng, 15, 9, 40);
        let att = transpose(transpose(a.as_ref()).as_ref());
        assert!((&to_dense(a.as_ref()) - &to_dense(att.as_ref())).norm_max() == 0.0);
    }

    #[test]
    fn diagonal_extracts_diagonal() {
        let a = from_triplets::<f64>(3, 3, &[(0, 0, 2.0), (1, 0, 7.0), (2, 2, -1.0)]).unwrap();
        let d = diagonal(a.as_ref());
        assert_eq!((d[0], d[1], d[2]), (2.0, 0.0, -1.0));
    }

    #[test]
    fn triplet_export_is_parseable() {
        let a = from_triplets::<f64>(2, 2, &[(0, 1, 0.5), (1, 0, -0.25)]).unwrap();
        let mut buf = Vec::new();
        write_triplets(a.as_ref(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut total = 0.0;
        for line in text.lines() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            assert_eq!(fields.len(), 3);
            total += fields[2].parse::<f64>().unwrap();
        }
        assert_eq!(total, 0.25);
    }
}
