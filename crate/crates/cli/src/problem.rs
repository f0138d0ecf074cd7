//! Assembly of one benchmark problem: covariance expansion, chaos basis,
//! grid hierarchy, and the rank-one forcing at the configured scale.

use faer::Col;
use sgmg::solver::{MGConfig, OuterTruncation, SmootherConfig};
use sgmg::{chaos, fem, kl, operator, Error, FactoredMatrix, Hierarchy, Matrix, Result};

use crate::config::{Covariance, ExperimentConfig, Forcing};

/// Grid level of the direct coarse solve in every benchmark hierarchy.
pub const COARSEST_LEVEL: usize = 2;

/// A fully assembled benchmark problem. The stored forcing is the rank-one
/// matrix f₀g₀ᵀ (constant load, deterministic in the stochastic variables) at
/// the scale the config's `forcing` setting resolves to; reported residuals
/// are relative to ‖F‖ either way, and solution exports are rescaled by
/// [`Problem::physical_scale`] back to the assembled system's scale.
pub struct Problem {
    hierarchy: Hierarchy,
    m: usize,
    forcing_scale: Forcing,
    physical_scale: f64,
    forcing: FactoredMatrix,
}

impl Problem {
    /// Assembles the expansion, basis, and multigrid hierarchy for `cfg`.
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        if cfg.level < COARSEST_LEVEL {
            return Err(Error::InvalidConfig(format!(
                "grid level {} is below the direct-solve level {COARSEST_LEVEL}",
                cfg.level
            )));
        }
        let expansion = match cfg.cov {
            Covariance::Exp => kl::exponential_expansion(cfg.sigma, cfg.b, cfg.m)?,
            Covariance::Sqexp => kl::squared_exponential_expansion(cfg.sigma, cfg.b, cfg.m)?,
        };
        let m = expansion.m();
        let basis = chaos::build_basis(m, cfg.p)?;
        let matrices = chaos::build_matrices::<f64>(&basis);
        let grids = fem::GridHierarchy::build(&expansion, COARSEST_LEVEL, cfg.level)?;
        let load = fem::assemble_load(grids.finest(), 1.0f64);
        let hierarchy =
            Hierarchy::build(&grids, matrices.g_matrices(), operator::KRONECKER_DIMENSION_CAP)?;

        let forcing_scale = cfg.forcing.resolved(cfg.cov);
        let physical_scale = match forcing_scale {
            Forcing::Unit => load.norm_l2(),
            Forcing::Raw => 1.0,
            Forcing::Auto => unreachable!("resolved() never returns auto"),
        };
        let scaled_load = Col::from_fn(load.nrows(), |i| load[i] / physical_scale);
        let mean_column = Col::from_fn(hierarchy.n_xi(), |i| f64::from(u8::from(i == 0)));
        let forcing = FactoredMatrix::rank_one(scaled_load, mean_column);

        Ok(Self {
            hierarchy,
            m,
            forcing_scale,
            physical_scale,
            forcing,
        })
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    /// Expansion terms actually used (resolves an `m = auto` config).
    pub fn m(&self) -> usize {
        self.m
    }

    /// Spatial unknowns on the finest grid.
    pub fn n_x(&self) -> usize {
        self.hierarchy.nx(self.hierarchy.finest())
    }

    /// Stochastic basis dimension.
    pub fn n_xi(&self) -> usize {
        self.hierarchy.n_xi()
    }

    /// The concrete right-hand-side scale this problem was built with
    /// (never `auto`).
    pub fn forcing_scale(&self) -> Forcing {
        self.forcing_scale
    }

    /// Factor mapping solutions of the solved system back to the assembled
    /// (physical) system's scale: ‖f₀‖ under unit forcing, 1 under raw.
    pub fn physical_scale(&self) -> f64 {
        self.physical_scale
    }

    /// Rank-one forcing in factored form, at the configured scale.
    pub fn forcing(&self) -> &FactoredMatrix {
        &self.forcing
    }

    /// The forcing as a dense matrix, for the full solver.
    pub fn forcing_dense(&self) -> Matrix {
        self.forcing.to_dense()
    }

    /// Solver controls for this problem with the given tolerances.
    pub fn mg_config(&self, tol: f64, maxit: usize, eps_rel: f64, eps_abs: f64) -> MGConfig<f64> {
        MGConfig {
            tol,
            maxit,
            eps_rel,
            eps_abs,
            outer_truncation: OuterTruncation::Absolute,
            coarsest_level: COARSEST_LEVEL,
            smoother: SmootherConfig::default(),
        }
    }
}
