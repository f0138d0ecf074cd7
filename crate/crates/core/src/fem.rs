//! Spatial discretization on D = (−1,1)²: uniform bilinear-quad meshes with
//! homogeneous Dirichlet boundaries, stiffness matrices for pointwise
//! coefficients, the constant load vector, and bilinear prolongation between
//! consecutive mesh levels.
//!
//! Unknowns are the interior lattice nodes, ordered lexicographically by
//! (y, x); a grid at level k has mesh size h = 2^−k, 2^{k+1} cells per side,
//! and N_x = (2/h − 1)² interior nodes. Boundary rows and columns are
//! eliminated during assembly.

use faer::sparse::SparseColMat;
use faer::Col;

use crate::kl::KLExpansion;
use crate::{sparse, Error, Result, Scalar};

/// Uniform square mesh at a dyadic refinement level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    level: usize,
}

impl Grid {
    pub fn new(level: usize) -> Self {
        Self { level }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Mesh size h = 2^−level.
    pub fn h<T: Scalar>(&self) -> T {
        T::cast(2.0).powi(-(self.level as i32))
    }

    /// Cells per side: 2/h.
    pub fn cells_per_side(&self) -> usize {
        1 << (self.level + 1)
    }

    /// Interior lattice nodes per side: 2/h − 1.
    pub fn interior_per_side(&self) -> usize {
        self.cells_per_side() - 1
    }

    /// Number of unknowns N_x = (2/h − 1)².
    pub fn n_interior(&self) -> usize {
        let s = self.interior_per_side();
        s * s
    }

    /// Unknown index of the full-lattice node (gx, gy), if it is interior.
    fn interior_index(&self, gx: usize, gy: usize) -> Option<usize> {
        let cells = self.cells_per_side();
        if gx >= 1 && gx < cells && gy >= 1 && gy < cells {
            Some((gy - 1) * self.interior_per_side() + (gx - 1))
        } else {
            None
        }
    }

    /// Coordinates of the unknown with the given index.
    pub fn interior_coords<T: Scalar>(&self, index: usize) -> (T, T) {
        let s = self.interior_per_side();
        let (ix, iy) = (index % s, index / s);
        let h = self.h::<T>();
        (
            -T::one() + T::cast_usize(ix + 1) * h,
            -T::one() + T::cast_usize(iy + 1) * h,
        )
    }
}

/// Local corner offsets of one cell, in the fixed element-local order.
const LOCAL_NODES: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];

/// Reference-square gradients of the four bilinear shape functions at (ξ,η),
/// in the [`LOCAL_NODES`] corner order.
fn reference_gradients<T: Scalar>(xi: T, eta: T) -> [[T; 2]; 4] {
    let q = T::cast(0.25);
    let one = T::one();
    [
        [-q * (one - eta), -q * (one - xi)],
        [q * (one - eta), -q * (one + xi)],
        [q * (one + eta), q * (one + xi)],
        [-q * (one + eta), q * (one - xi)],
    ]
}

/// Stiffness matrix ∫_D coeff(x)·∇φ_i·∇φ_j dx over interior basis functions,
/// assembled element-by-element with 2×2 Gauss quadrature (the coefficient is
/// evaluated at the quadrature points).
pub fn assemble_stiffness<T: Scalar>(
    grid: &Grid,
    coeff: impl Fn(T, T) -> T,
) -> Result<SparseColMat<usize, T>> {
    let cells = grid.cells_per_side();
    let h = grid.h::<T>();
    let g = T::one() / T::cast(3.0).sqrt();
    let gauss = [(-g, -g), (g, -g), (g, g), (-g, g)];

    let mut triplets: Vec<(usize, usize, T)> = Vec::with_capacity(cells * cells * 16);
    for ey in 0..cells {
        for ex in 0..cells {
            let x0 = -T::one() + T::cast_usize(ex) * h;
            let y0 = -T::one() + T::cast_usize(ey) * h;
            // Element matrix: the (2/h)² gradient scaling cancels the (h/2)²
            // Jacobian, so each Gauss point contributes coeff·(∇̂φ_i·∇̂φ_j)
            // with unit weight.
            let mut local = [[T::zero(); 4]; 4];
            for &(xi, eta) in &gauss {
                let x = x0 + h * (T::one() + xi) / T::cast(2.0);
                let y = y0 + h * (T::one() + eta) / T::cast(2.0);
                let c = coeff(x, y);
                let grads = reference_gradients(xi, eta);
                for i in 0..4 {
                    for j in 0..4 {
                        local[i][j] +=
                            c * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                    }
                }
            }
            let global: [Option<usize>; 4] = std::array::from_fn(|k| {
                let (dx, dy) = LOCAL_NODES[k];
                grid.interior_index(ex + dx, ey + dy)
            });
            for i in 0..4 {
                let Some(gi) = global[i] else { continue };
                for j in 0..4 {
                    let Some(gj) = global[j] else { continue };
                    triplets.push((gi, gj, local[i][j]));
                }
            }
        }
    }
    sparse::from_triplets(grid.n_interior(), grid.n_interior(), &triplets)
}

/// The m+1 stiffness matrices of the expansion: K₀ from the constant mean
/// c₀ and, for each term l ≥ 1, K_l from the coefficient scale·√λ_l·c_l(x).
pub fn assemble_kl_stiffnesses<T: Scalar>(
    grid: &Grid,
    kl: &KLExpansion<T>,
) -> Result<Vec<SparseColMat<usize, T>>> {
    let mut out = Vec::with_capacity(kl.m() + 1);
    let c0 = kl.c0;
    out.push(assemble_stiffness(grid, |_, _| c0)?);
    for l in 0..kl.m() {
        out.push(assemble_stiffness(grid, |x, y| kl.term_coefficient(l, x, y))?);
    }
    Ok(out)
}

/// Load vector f₀(i) = ∫_D f·φ_i dx for a constant source term f.
pub fn assemble_load<T: Scalar>(grid: &Grid, f: T) -> Col<T> {
    let cells = grid.cells_per_side();
    let h = grid.h::<T>();
    let g = T::one() / T::cast(3.0).sqrt();
    let gauss = [(-g, -g), (g, -g), (g, g), (-g, g)];
    let w = h * h / T::cast(4.0);

    let mut load = Col::zeros(grid.n_interior());
    for ey in 0..cells {
        for ex in 0..cells {
            for &(xi, eta) in &gauss {
                let q = T::cast(0.25);
                let one = T::one();
                let shapes = [
                    q * (one - xi) * (one - eta),
                    q * (one + xi) * (one - eta),
                    q * (one + xi) * (one + eta),
                    q * (one - xi) * (one + eta),
                ];
                for (k, &(dx, dy)) in LOCAL_NODES.iter().enumerate() {
                    if let Some(gi) = grid.interior_index(ex + dx, ey + dy) {
                        load[gi] += f * w * shapes[k];
                    }
                }
            }
        }
    }
    load
}

/// Bilinear prolongation from the coarse grid's unknowns to the fine grid's:
/// coincident nodes get weight 1, edge midpoints 1/2 from each coarse
/// neighbor, cell centers 1/4 from each corner (contributions from boundary
/// coarse nodes are dropped, consistent with the homogeneous Dirichlet
/// condition).
pub fn prolongation<T: Scalar>(
    coarse: &Grid,
    fine: &Grid,
) -> Result<SparseColMat<usize, T>> {
    if fine.level() != coarse.level() + 1 {
        return Err(Error::InvalidConfig(format!(
            "prolongation needs consecutive levels, got {} → {}",
            coarse.level(),
            fine.level()
        )));
    }
    let fine_cells = fine.cells_per_side();
    let half = T::cast(0.5);
    let quarter = T::cast(0.25);

    let mut triplets: Vec<(usize, usize, T)> = Vec::new();
    for gy in 1..fine_cells {
        for gx in 1..fine_cells {
            let row = fine.interior_index(gx, gy).expect("interior fine node");
            let mut push = |cx: usize, cy: usize, w: T| {
                if let Some(col) = coarse.interior_index(cx, cy) {
                    triplets.push((row, col, w));
                }
            };
            match (gx % 2 == 0, gy % 2 == 0) {
                (true, true) => push(gx / 2, gy / 2, T::one()),
                (false, true) => {
                    push(gx / 2, gy / 2, half);
                    push(gx / 2 + 1, gy / 2, half);
                }
                (true, false) => {
                    push(gx / 2, gy / 2, half);
                    push(gx / 2, gy / 2 + 1, half);
                }
                (false, false) => {
                    push(gx / 2, gy / 2, quarter);
                    push(gx / 2 + 1, gy / 2, quarter);
                    push(gx / 2, gy / 2 + 1, quarter);
                    push(gx / 2 + 1, gy / 2 + 1, quarter);
                }
            }
        }
    }
    sparse::from_triplets(fine.n_interior(), coarse.n_interior(), &triplets)
}

/// Mesh levels with their stiffness matrices and inter-level prolongations,
/// ordered coarsest to finest.
#[derive(Debug, Clone)]
pub struct GridHierarchy<T> {
    grids: Vec<Grid>,
    /// `prolongations[i]` maps level `i` unknowns to level `i+1` unknowns.
    prolongations: Vec<SparseColMat<usize, T>>,
    /// `stiffnesses[i]` holds K₀…K_m on level `i`.
    stiffnesses: Vec<Vec<SparseColMat<usize, T>>>,
}

impl<T: Scalar> GridHierarchy<T> {
    /// Assemble all levels from `coarsest` to `finest` for the given
    /// expansion. Each level's matrices are discretized directly on that
    /// level (not projected from the finest).
    pub fn build(kl: &KLExpansion<T>, coarsest: usize, finest: usize) -> Result<Self> {
        if coarsest > finest {
            return Err(Error::InvalidConfig(format!(
                "coarsest level {coarsest} exceeds finest level {finest}"
            )));
        }
        let grids: Vec<Grid> = (coarsest..=finest).map(Grid::new).collect();
        let mut prolongations = Vec::with_capacity(grids.len().saturating_sub(1));
        for pair in grids.windows(2) {
            prolongations.push(prolongation(&pair[0], &pair[1])?);
        }
        let mut stiffnesses = Vec::with_capacity(grids.len());
        for grid in &grids {
            stiffnesses.push(assemble_kl_stiffnesses(grid, kl)?);
        }
        Ok(Self {
            grids,
            prolongations,
            stiffnesses,
        })
    }

    /// Number of levels.
    pub fn num_levels(&self) -> usize {
        self.grids.len()
    }

    /// Grid at hierarchy position `i` (0 = coarsest).
    pub fn grid(&self, i: usize) -> &Grid {
        &self.grids[i]
    }

    /// Finest grid.
    pub fn finest(&self) -> &Grid {
        self.grids.last().expect("hierarchy is never empty")
    }

    /// K₀…K_m on hierarchy position `i`.
    pub fn stiffnesses(&self, i: usize) -> &[SparseColMat<usize, T>] {
        &self.stiffnesses[i]
    }

    /// Prolongation from position `i` to `i+1`.
    pub fn prolongation(&self, i: usize) -> &SparseColMat<usize, T> {
        &self.prolongations[i]
    }

    /// Number of expansion terms m (stiffness count minus the mean term).
    pub fn num_terms(&self) -> usize {
        self.stiffnesses[0].len() - 1
    }

    /// The sub-hierarchy consisting of all levels up to the given absolute
    /// grid level (which must be present).
    pub fn sub_to_level(&self, finest: usize) -> Result<Self> {
        let count = self
            .grids
            .iter()
            .position(|g| g.level() == finest)
            .ok_or_else(|| {
                Error::InvalidConfig(format!("level {finest} not in hierarchy"))
            })?
            + 1;
        Ok(Self {
            grids: self.grids[..count].to_vec(),
            prolongations: self.prolongations[..count - 1].to_vec(),
            stiffnesses: self.stiffnesses[..count].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kl::{self, KLTerm};
    use crate::quadrature::gauss_legendre;
    use faer::{Mat, Side};

    /// Element stiffness for coeff ≡ 1 via high-order quadrature on one
    /// physical element, independent of `assemble_stiffness`.
    fn element_matrix_oracle(h: f64) -> [[f64; 4]; 4] {
        let (nodes, weights) = gauss_legendre::<f64>(6);
        let mut out = [[0.0; 4]; 4];
        for (&xi, &wx) in nodes.iter().zip(&weights) {
            for (&eta, &wy) in nodes.iter().zip(&weights) {
                let grads = reference_gradients(xi, eta);
                for i in 0..4 {
                    for j in 0..4 {
                        // Physical gradients scale by 2/h, the Jacobian is
                        // (h/2)²; quadrature weights are for [−1,1]².
                        out[i][j] += wx
                            * wy
                            * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1])
                            * (2.0 / h).powi(2)
                            * (h / 2.0).powi(2);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn element_matrix_matches_reference_values() {
        let expected = [
            [4.0, -1.0, -2.0, -1.0],
            [-1.0, 4.0, -1.0, -2.0],
            [-2.0, -1.0, 4.0, -1.0],
            [-1.0, -2.0, -1.0, 4.0],
        ];
        for h in [0.5, 0.125] {
            let oracle = element_matrix_oracle(h);
            for i in 0..4 {
                for j in 0..4 {
                    assert!(
                        (oracle[i][j] - expected[i][j] / 6.0).abs() < 1e-14,
                        "h={h}, entry ({i},{j}): {} vs {}",
                        oracle[i][j],
                        expected[i][j] / 6.0
                    );
                }
            }
        }
    }

    #[test]
    fn grid_dimensions() {
        let grid = Grid::new(5);
        assert_eq!(grid.h::<f64>(), 2f64.powi(-5));
        assert_eq!(grid.cells_per_side(), 64);
        assert_eq!(grid.n_interior(), 3969);
        let (x, y) = grid.interior_coords::<f64>(0);
        assert!((x - (-1.0 + 2f64.powi(-5))).abs() < 1e-15);
        assert!((y - (-1.0 + 2f64.powi(-5))).abs() < 1e-15);
    }

    #[test]
    fn constant_coefficient_assembly_matches_manual_scatter() {
        let grid = Grid::new(2);
        let built = sparse::to_dense(assemble_stiffness(&grid, |_, _| 1.0).unwrap().as_ref());
        let element = element_matrix_oracle(grid.h::<f64>());
        let mut manual: Mat<f64> = Mat::zeros(grid.n_interior(), grid.n_interior());
        let cells = grid.cells_per_side();
        for ey in 0..cells {
            for ex in 0..cells {
                for i in 0..4 {
                    let (dx, dy) = LOCAL_NODES[i];
                    let Some(gi) = grid.interior_index(ex + dx, ey + dy) else {
                        continue;
                    };
                    for j in 0..4 {
                        let (dx, dy) = LOCAL_NODES[j];
                        if let Some(gj) = grid.interior_index(ex + dx, ey + dy) {
                            manual[(gi, gj)] += element[i][j];
                        }
                    }
                }
            }
        }
        assert!((&built - &manual).norm_max() < 1e-13);
    }

    #[test]
    fn assembly_is_linear_in_the_coefficient() {
        let grid = Grid::new(2);
        let unit = sparse::to_dense(assemble_stiffness(&grid, |_: f64, _| 1.0).unwrap().as_ref());
        let scaled =
            sparse::to_dense(assemble_stiffness(&grid, |_: f64, _| 3.7).unwrap().as_ref());
        let mut worst = 0.0f64;
        for i in 0..unit.nrows() {
            for j in 0..unit.ncols() {
                worst = worst.max((scaled[(i, j)] - 3.7 * unit[(i, j)]).abs());
            }
        }
        assert!(worst < 1e-12);
    }

    #[test]
    fn stiffness_is_symmetric_positive_definite() {
        let grid = Grid::new(3);
        let k0 = sparse::to_dense(assemble_stiffness(&grid, |_, _| 1.0).unwrap().as_ref());
        assert!((&k0 - k0.transpose()).norm_max() < 1e-14 * k0.norm_max());
        let eigs = k0.self_adjoint_eigen(Side::Lower).unwrap();
        let min = (0..k0.nrows()).map(|i| eigs.S()[i]).fold(f64::MAX, f64::min);
        assert!(min > 0.0, "smallest eigenvalue {min} must be positive");
    }

    #[test]
    fn load_vector_is_h_squared_inside() {
        let grid = Grid::new(1);
        let f0 = assemble_load(&grid, 1.0f64);
        for i in 0..grid.n_interior() {
            assert!((f0[i] - 0.25).abs() < 1e-15, "entry {i} = {}", f0[i]);
        }
        // Scaling the source scales the load.
        let f3 = assemble_load(&grid, 3.0f64);
        for i in 0..grid.n_interior() {
            assert!((f3[i] - 3.0 * f0[i]).abs() < 1e-15);
        }
        // Total mass stays below the domain area.
        let grid = Grid::new(4);
        let f0 = assemble_load(&grid, 1.0);
        let total: f64 = (0..grid.n_interior()).map(|i| f0[i]).sum();
        assert!(total < 4.0 && total > 3.5);
    }

    #[test]
    fn prolongation_interpolates_coarse_hat_functions_exactly() {
        let coarse = Grid::new(2);
        let fine = Grid::new(3);
        let p = prolongation::<f64>(&coarse, &fine).unwrap();
        let hc = coarse.h::<f64>();
        // The coarse hat at node j, evaluated anywhere, is the product of two
        // 1D hats; its fine-grid interpolant must be reproduced exactly.
        for j in 0..coarse.n_interior() {
            let (cx, cy) = coarse.interior_coords::<f64>(j);
            let mut e = faer::Col::<f64>::zeros(coarse.n_interior());
            e[j] = 1.0;
            let pe = &p * &e;
            for i in 0..fine.n_interior() {
                let (fx, fy) = fine.interior_coords::<f64>(i);
                let hat = (1.0 - ((fx - cx) / hc).abs()).max(0.0)
                    * (1.0 - ((fy - cy) / hc).abs()).max(0.0);
                assert!(
                    (pe[i] - hat).abs() < 1e-14,
                    "node {i} of P·e_{j}: {} vs hat {hat}",
                    pe[i]
                );
            }
        }
    }

    #[test]
    fn prolongation_weights_and_row_sums() {
        let p = prolongation::<f64>(&Grid::new(2), &Grid::new(3)).unwrap();
        let mut row_sums = vec![0.0; p.nrows()];
        sparse::for_each_entry(p.as_ref(), |r, _, v| {
            assert!(
                [1.0, 0.5, 0.25].contains(&v),
                "unexpected interpolation weight {v}"
            );
            row_sums[r] += v;
        });
        for s in row_sums {
            assert!(s <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn galerkin_identity_for_constant_coefficient() {
        let coarse = Grid::new(3);
        let fine = Grid::new(4);
        let p = prolongation::<f64>(&coarse, &fine).unwrap();
        let kf = assemble_stiffness(&fine, |_, _| 1.0).unwrap();
        let kc = sparse::to_dense(assemble_stiffness(&coarse, |_, _| 1.0).unwrap().as_ref());
        let pd = sparse::to_dense(p.as_ref());
        let projected = pd.transpose() * sparse::to_dense(kf.as_ref()) * &pd;
        assert!(
            (&projected - &kc).norm_max() < 1e-12,
            "coarse assembly must equal the Galerkin projection for constant coefficients"
        );
    }

    #[test]
    fn kl_stiffness_norms_decay_with_the_eigenvalues() {
        let expansion = kl::exponential_expansion::<f64>(0.1, 4.0, Some(6)).unwrap();
        let grid = Grid::new(3);
        let mats = assemble_kl_stiffnesses(&grid, &expansion).unwrap();
        assert_eq!(mats.len(), 7);
        let frob = |m: &SparseColMat<usize, f64>| -> f64 {
            let mut s = 0.0;
            sparse::for_each_entry(m.as_ref(), |_, _, v| s += v * v);
            s.sqrt()
        };
        // The √λ_l scaling dominates: K₁ should already be well below K₀,
        // and the tail should keep decaying (allowing small non-monotone
        // wiggles from the eigenfunction shapes).
        assert!(frob(&mats[1]) < frob(&mats[0]));
        assert!(frob(&mats[6]) < frob(&mats[1]));
    }

    #[test]
    fn zero_variance_terms_assemble_to_zero_matrices() {
        let base = kl::exponential_expansion::<f64>(0.1, 4.0, Some(2)).unwrap();
        let zeroed = KLExpansion {
            c0: base.c0,
            scale: base.scale,
            terms: base
                .terms
                .iter()
                .map(|t| KLTerm {
                    lambda: 0.0,
                    eigenfunction: t.eigenfunction.clone(),
                })
                .collect(),
        };
        let grid = Grid::new(2);
        let mats = assemble_kl_stiffnesses(&grid, &zeroed).unwrap();
        for m in &mats[1..] {
            assert_eq!(m.compute_nnz(), 0);
        }
    }

    #[test]
    fn hierarchy_shapes_and_sub_hierarchy() {
        let expansion = kl::exponential_expansion::<f64>(0.01, 4.0, Some(3)).unwrap();
        let hier = GridHierarchy::build(&expansion, 2, 4).unwrap();
        assert_eq!(hier.num_levels(), 3);
        assert_eq!(hier.num_terms(), 3);
        assert_eq!(hier.finest().level(), 4);
        for i in 0..hier.num_levels() - 1 {
            let p = hier.prolongation(i);
            assert_eq!(p.nrows(), hier.grid(i + 1).n_interior());
            assert_eq!(p.ncols(), hier.grid(i).n_interior());
        }
        let sub = hier.sub_to_level(3).unwrap();
        assert_eq!(sub.num_levels(), 2);
        assert_eq!(sub.finest().level(), 3);
        assert!(hier.sub_to_level(7).is_err());
    }
}
