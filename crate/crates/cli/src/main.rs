//! `sgmg` — benchmark driver for the stochastic Galerkin multigrid solvers.
//!
//! One process runs one experiment (or one benchmark table preset) and
//! writes a CSV summary plus a JSON report; spectrum dumps write CSV data
//! for plotting. Everything is deterministic, and linear algebra is pinned
//! to sequential execution so reruns reproduce every numeric output
//! bit-for-bit apart from elapsed-time fields.

mod config;
mod problem;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Covariance, ExperimentConfig, Forcing, Mode};
use problem::Problem;

/// Which spectrum dump to produce instead of benchmark rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum DumpKind {
    /// Singular values of the solution matrix, descending.
    SolutionSpectrum,
    /// Singular values of every V-cycle correction of a full solve.
    CorrectionSpectra,
}

#[derive(Parser)]
#[command(
    name = "sgmg",
    version,
    about = "Multigrid benchmarks for stochastic Galerkin diffusion systems",
    after_help = "Exit codes: 0 success, 1 error, 2 finished without converging \
                  (outputs are still written).\n\
                  Config files are flat key=value lines using the long flag names \
                  (cov, sigma, b, level, p, m, forcing, eps_abs, eps_rel, tol, maxit, \
                  mode, out); flags override file entries."
)]
struct Cli {
    /// Flat key=value experiment file; flags override its entries
    #[arg(long, value_name = "FILE", conflicts_with = "table")]
    config: Option<PathBuf>,

    /// Covariance family of the random diffusion coefficient
    #[arg(long, value_enum, conflicts_with = "table")]
    cov: Option<Covariance>,

    /// Standard deviation of the coefficient field
    #[arg(long, conflicts_with = "table")]
    sigma: Option<f64>,

    /// Correlation length of the covariance kernel
    #[arg(long, conflicts_with = "table")]
    b: Option<f64>,

    /// Finest grid level; the mesh size is h = 2^-level
    #[arg(long, conflicts_with = "table")]
    level: Option<usize>,

    /// Total polynomial degree of the chaos basis
    #[arg(long, conflicts_with = "table")]
    p: Option<usize>,

    /// Expansion terms; omit to pick the smallest m capturing 95% of the
    /// covariance energy
    #[arg(long, conflicts_with = "table")]
    m: Option<usize>,

    /// Right-hand-side scale: `unit` normalizes the forcing to Frobenius
    /// norm 1, `raw` keeps the assembled load, `auto` picks the convention
    /// each covariance family is benchmarked under (exp: unit, sqexp: raw)
    #[arg(long, value_enum, conflicts_with = "table")]
    forcing: Option<Forcing>,

    /// Absolute rank-truncation tolerance of the low-rank outer loop
    #[arg(long, conflicts_with = "table")]
    eps_abs: Option<f64>,

    /// Relative rank-truncation tolerance inside V-cycles
    #[arg(long)]
    eps_rel: Option<f64>,

    /// Relative residual target
    #[arg(long)]
    tol: Option<f64>,

    /// Outer iteration cap
    #[arg(long)]
    maxit: Option<usize>,

    /// Solver selection; `both` follows the low-rank solve with a full solve
    /// matched to the residual the low-rank solve achieved
    #[arg(long, value_enum, conflicts_with_all = ["table", "dump"])]
    mode: Option<Mode>,

    /// Output path prefix; writes <out>.csv and <out>.json
    #[arg(long, value_name = "PREFIX")]
    out: Option<PathBuf>,

    /// Run a benchmark preset instead of a single experiment:
    /// 1 mesh-refinement study, 2 stochastic-dimension study,
    /// 3 coefficient-variance study, 4 squared-exponential study
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    table: Option<u8>,

    /// Include the preset rows beyond desk scale (slow; the largest
    /// mesh-study rows need several GB of memory)
    #[arg(long, requires = "table")]
    all: bool,

    /// Write a singular-value dump instead of benchmark rows (always solves
    /// with the full solver; --tol and --maxit control it)
    #[arg(long, value_enum, conflicts_with_all = ["table", "dump_matrices"])]
    dump: Option<DumpKind>,

    /// Also write the finest-level matrices K_l and G_l as plain-text
    /// `row col value` triplet files into this directory
    #[arg(long, value_name = "DIR", conflicts_with = "table")]
    dump_matrices: Option<PathBuf>,
}

fn main() -> ExitCode {
    faer::set_global_parallelism(faer::Par::Seq);
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("not all runs converged; see the written reports");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

/// Builds the effective configuration (defaults, then file, then flags) and
/// runs the requested action. Returns whether every solve converged.
fn dispatch(cli: Cli) -> anyhow::Result<bool> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    if let Some(v) = cli.cov {
        cfg.cov = v;
    }
    if let Some(v) = cli.sigma {
        cfg.sigma = v;
    }
    if let Some(v) = cli.b {
        cfg.b = v;
    }
    if let Some(v) = cli.level {
        cfg.level = v;
    }
    if let Some(v) = cli.p {
        cfg.p = v;
    }
    if let Some(v) = cli.m {
        cfg.m = Some(v);
    }
    if let Some(v) = cli.forcing {
        cfg.forcing = v;
    }
    if let Some(v) = cli.eps_abs {
        cfg.eps_abs = v;
    }
    if let Some(v) = cli.eps_rel {
        cfg.eps_rel = v;
    }
    if let Some(v) = cli.tol {
        cfg.tol = v;
    }
    if let Some(v) = cli.maxit {
        cfg.maxit = v;
    }
    if let Some(v) = cli.mode {
        cfg.mode = v;
    }

    if let Some(table) = cli.table {
        let action = if cli.all {
            format!("table-{table}-all")
        } else {
            format!("table-{table}")
        };
        cfg.out = cli.out.unwrap_or_else(|| PathBuf::from(format!("table{table}")));
        let runs = run::run_table(table, cli.all, &cfg)?;
        return run::write_benchmark_outputs(&action, &cfg, &runs);
    }

    if let Some(kind) = cli.dump {
        return match kind {
            DumpKind::SolutionSpectrum => {
                cfg.out = cli.out.unwrap_or_else(|| PathBuf::from("solution-spectrum"));
                run::dump_solution_spectrum(&cfg)
            }
            DumpKind::CorrectionSpectra => {
                cfg.out = cli
                    .out
                    .unwrap_or_else(|| PathBuf::from("correction-spectra"));
                run::dump_correction_spectra(&cfg)
            }
        };
    }

    if let Some(v) = cli.out {
        cfg.out = v;
    }
    let problem = Problem::build(&cfg)?;
    println!(
        "problem: N_x={}, N_xi={}, m={} (cov={}, sigma={}, b={}, h=2^-{}, p={})",
        problem.n_x(),
        problem.n_xi(),
        problem.m(),
        cfg.cov,
        cfg.sigma,
        cfg.b,
        cfg.level,
        cfg.p
    );
    if let Some(dir) = &cli.dump_matrices {
        run::dump_matrices(dir, &cfg, &problem)?;
    }
    let runs = run::run_experiment(&cfg, &problem)?;
    run::write_benchmark_outputs("solve", &cfg, &runs)
}
