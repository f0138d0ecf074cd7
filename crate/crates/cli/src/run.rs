//! Experiment execution and output files: benchmark rows, table presets,
//! singular-value dumps, and triplet matrix dumps.
//!
//! Every output file starts with a `# config=<hash>` line identifying the
//! invocation that produced it; rerunning the same configuration reproduces
//! every numeric field bit-for-bit except elapsed-time columns.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use sgmg::solver::SolveReport;
use sgmg::{sparse, Error};

use crate::config::{config_hash, Covariance, ExperimentConfig, Forcing, Mode};
use crate::problem::Problem;

/// Truncation tolerances exercised by every table preset row.
const PRESET_EPS_ABS: [f64; 2] = [1e-6, 1e-4];

/// Result of one solver run, together with the configuration identity that
/// distinguishes it inside a preset.
pub struct RunOutcome {
    /// Human-readable tag, e.g. `h=2^-5 lowrank eps_abs=1e-6`.
    pub label: String,
    /// `lowrank` or `full`.
    pub mode: &'static str,
    /// Right-hand-side scale the run was solved under (`unit` or `raw`).
    pub forcing: Forcing,
    /// Outer truncation tolerance; `None` for full (untruncated) runs.
    pub eps_abs: Option<f64>,
    /// Relative residual target of this run.
    pub tol: f64,
    pub level: usize,
    pub sigma: f64,
    pub b: f64,
    pub m: usize,
    pub p: usize,
    pub n_x: usize,
    pub n_xi: usize,
    /// Whether the outer loop aborted on the divergence guard.
    pub diverged: bool,
    pub report: SolveReport,
}

impl RunOutcome {
    pub fn rank(&self) -> usize {
        self.report.final_rank
    }

    pub fn iterations(&self) -> usize {
        self.report.iterations
    }

    pub fn elapsed(&self) -> f64 {
        self.report.wall_time
    }

    /// True relative residual of the returned iterate.
    pub fn rel_residual(&self) -> f64 {
        self.report
            .residual_history
            .last()
            .copied()
            .unwrap_or(f64::NAN)
    }

    pub fn converged(&self) -> bool {
        self.report.converged && !self.diverged
    }

    fn csv_line(&self) -> String {
        let eps_abs = self.eps_abs.map(fmt_float).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.mode,
            self.forcing,
            eps_abs,
            fmt_float(self.tol),
            self.level,
            fmt_float(self.sigma),
            fmt_float(self.b),
            self.m,
            self.p,
            self.n_x,
            self.n_xi,
            self.rank(),
            self.iterations(),
            fmt_float(self.elapsed()),
            fmt_float(self.rel_residual()),
        )
    }
}

/// Floating-point fields are written with 17 significant digits, enough to
/// round-trip an f64 exactly.
fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn outcome(
    label: String,
    mode: &'static str,
    eps_abs: Option<f64>,
    tol: f64,
    cfg: &ExperimentConfig,
    problem: &Problem,
    result: sgmg::Result<SolveReport>,
) -> anyhow::Result<RunOutcome> {
    let (diverged, report) = match result {
        Ok(report) => (false, report),
        Err(Error::Diverged { report, .. }) => (true, *report),
        Err(other) => return Err(other).with_context(|| format!("run {label} failed")),
    };
    let run = RunOutcome {
        label,
        mode,
        forcing: problem.forcing_scale(),
        eps_abs,
        tol,
        level: cfg.level,
        sigma: cfg.sigma,
        b: cfg.b,
        m: problem.m(),
        p: cfg.p,
        n_x: problem.n_x(),
        n_xi: problem.n_xi(),
        diverged,
        report,
    };
    announce(&run);
    Ok(run)
}

fn announce(run: &RunOutcome) {
    let status = if run.diverged {
        " [diverged]"
    } else if !run.report.converged {
        " [not converged]"
    } else {
        ""
    };
    println!(
        "{}: rank {}, {} iterations, rel residual {:.2e}, {:.2}s{}",
        run.label,
        run.rank(),
        run.iterations(),
        run.rel_residual(),
        run.elapsed(),
        status
    );
}

/// Runs the low-rank solver at the given truncation tolerance.
fn run_lowrank(
    problem: &Problem,
    cfg: &ExperimentConfig,
    eps_abs: f64,
    row_tag: &str,
) -> anyhow::Result<RunOutcome> {
    let mg = problem.mg_config(cfg.tol, cfg.maxit, cfg.eps_rel, eps_abs);
    let result = problem
        .hierarchy()
        .solve_lowrank(problem.forcing(), &mg)
        .map(|(_, report)| report);
    let label = format!("{row_tag}lowrank eps_abs={eps_abs:.0e}");
    outcome(label, "lowrank", Some(eps_abs), cfg.tol, cfg, problem, result)
}

/// Runs the full (untruncated) solver to the given residual target.
fn run_full(
    problem: &Problem,
    cfg: &ExperimentConfig,
    tol: f64,
    row_tag: &str,
    matched: bool,
) -> anyhow::Result<RunOutcome> {
    let mg = problem.mg_config(tol, cfg.maxit, cfg.eps_rel, cfg.eps_abs);
    let forcing = problem.forcing_dense();
    let result = problem
        .hierarchy()
        .solve_full(forcing.as_ref(), &mg)
        .map(|(_, report)| report);
    let label = if matched {
        format!("{row_tag}full matched tol={tol:.2e}")
    } else {
        format!("{row_tag}full tol={tol:.2e}")
    };
    outcome(label, "full", None, tol, cfg, problem, result)
}

/// Residual target for a full run compared against a finished low-rank run:
/// the residual the low-rank solver actually reached.
fn matched_tol(lowrank: &RunOutcome, fallback: f64) -> f64 {
    let achieved = lowrank.rel_residual();
    if achieved.is_finite() && achieved > 0.0 {
        achieved
    } else {
        fallback
    }
}

/// Runs a single experiment according to `cfg.mode`.
pub fn run_experiment(cfg: &ExperimentConfig, problem: &Problem) -> anyhow::Result<Vec<RunOutcome>> {
    let mut runs = Vec::new();
    match cfg.mode {
        Mode::Lowrank => runs.push(run_lowrank(problem, cfg, cfg.eps_abs, "")?),
        Mode::Full => runs.push(run_full(problem, cfg, cfg.tol, "", false)?),
        Mode::Both => {
            let lowrank = run_lowrank(problem, cfg, cfg.eps_abs, "")?;
            let tol = matched_tol(&lowrank, cfg.tol);
            runs.push(lowrank);
            runs.push(run_full(problem, cfg, tol, "", true)?);
        }
    }
    Ok(runs)
}

/// One table-preset row: a label and the experiment it solves. The base
/// config contributes the loop controls (tol, eps_rel, maxit); each row owns
/// its problem parameters.
pub fn preset_rows(table: u8, all: bool, base: &ExperimentConfig) -> Vec<(String, ExperimentConfig)> {
    let mut rows = Vec::new();
    let exp_base = ExperimentConfig {
        cov: Covariance::Exp,
        sigma: 0.01,
        b: 4.0,
        level: 6,
        p: 3,
        m: Some(11),
        ..base.clone()
    };
    match table {
        // Mesh refinement study: exponential covariance, sigma=0.01, b=4, m=11, p=3.
        1 => {
            let levels: &[usize] = if all { &[5, 6, 7, 8] } else { &[5, 6] };
            for &level in levels {
                let cfg = ExperimentConfig {
                    level,
                    ..exp_base.clone()
                };
                rows.push((format!("h=2^-{level} "), cfg));
            }
        }
        // Stochastic dimension study: sigma=0.01, h=2^-6, p=3, (b, m) varied.
        2 => {
            let pairs: &[(f64, usize)] = if all {
                &[(5.0, 8), (4.0, 11), (3.0, 16), (2.5, 22)]
            } else {
                &[(5.0, 8), (4.0, 11)]
            };
            for &(b, m) in pairs {
                let cfg = ExperimentConfig {
                    b,
                    m: Some(m),
                    ..exp_base.clone()
                };
                rows.push((format!("b={b} m={m} "), cfg));
            }
        }
        // Coefficient variance study: b=4, h=2^-6, m=11, p=3, sigma varied.
        3 => {
            let sigmas: &[f64] = if all {
                &[0.001, 0.01, 0.1, 0.3]
            } else {
                &[0.001, 0.01, 0.1]
            };
            for &sigma in sigmas {
                let cfg = ExperimentConfig {
                    sigma,
                    ..exp_base.clone()
                };
                rows.push((format!("sigma={sigma} "), cfg));
            }
        }
        // Squared exponential study: sigma=0.01, b=2, m=3, p=3, mesh varied.
        4 => {
            let levels: &[usize] = if all { &[6, 7, 8, 9] } else { &[6, 7] };
            for &level in levels {
                let cfg = ExperimentConfig {
                    cov: Covariance::Sqexp,
                    b: 2.0,
                    level,
                    m: Some(3),
                    ..exp_base.clone()
                };
                rows.push((format!("h=2^-{level} "), cfg));
            }
        }
        _ => unreachable!("clap restricts --table to 1..=4"),
    }
    rows
}

/// Runs a whole benchmark table: per row, the low-rank solver at both preset
/// truncation tolerances, then the full solver matched to the residual each
/// low-rank run achieved.
pub fn run_table(table: u8, all: bool, base: &ExperimentConfig) -> anyhow::Result<Vec<RunOutcome>> {
    let mut runs = Vec::new();
    for (tag, cfg) in preset_rows(table, all, base) {
        let problem = Problem::build(&cfg)?;
        println!(
            "-- table {table} row {}(N_x={}, N_xi={})",
            tag,
            problem.n_x(),
            problem.n_xi()
        );
        let mut lowrank_runs = Vec::new();
        for eps_abs in PRESET_EPS_ABS {
            lowrank_runs.push(run_lowrank(&problem, &cfg, eps_abs, &tag)?);
        }
        for lowrank in &lowrank_runs {
            let tol = matched_tol(lowrank, cfg.tol);
            runs.push(run_full(&problem, &cfg, tol, &tag, true)?);
        }
        // Present each row in table order: truncated runs first.
        let fulls = runs.split_off(runs.len() - lowrank_runs.len());
        runs.extend(lowrank_runs);
        runs.extend(fulls);
    }
    Ok(runs)
}

#[derive(Serialize)]
struct JsonRun<'a> {
    label: &'a str,
    mode: &'a str,
    forcing: Forcing,
    eps_abs: Option<f64>,
    tol: f64,
    level: usize,
    sigma: f64,
    b: f64,
    m: usize,
    p: usize,
    n_x: usize,
    n_xi: usize,
    rank: usize,
    iterations: usize,
    elapsed: f64,
    rel_residual: f64,
    converged: bool,
    diverged: bool,
    report: &'a SolveReport,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    config_hash: String,
    action: &'a str,
    config: &'a ExperimentConfig,
    runs: Vec<JsonRun<'a>>,
}

/// Writes `<out>.csv` and `<out>.json` for a list of finished runs and
/// returns whether every run converged.
pub fn write_benchmark_outputs(
    action: &str,
    cfg: &ExperimentConfig,
    runs: &[RunOutcome],
) -> anyhow::Result<bool> {
    let hash = config_hash(action, cfg);

    let csv_path = cfg.out.with_extension("csv");
    let mut csv = create_output(&csv_path, hash)?;
    writeln!(
        csv,
        "mode,forcing,eps_abs,tol,level,sigma,b,m,p,N_x,N_xi,rank,iterations,elapsed,rel_residual"
    )?;
    for run in runs {
        writeln!(csv, "{}", run.csv_line())?;
    }
    csv.flush()?;

    let json_path = cfg.out.with_extension("json");
    let report = JsonReport {
        config_hash: format!("{hash:016x}"),
        action,
        config: cfg,
        runs: runs
            .iter()
            .map(|run| JsonRun {
                label: &run.label,
                mode: run.mode,
                forcing: run.forcing,
                eps_abs: run.eps_abs,
                tol: run.tol,
                level: run.level,
                sigma: run.sigma,
                b: run.b,
                m: run.m,
                p: run.p,
                n_x: run.n_x,
                n_xi: run.n_xi,
                rank: run.rank(),
                iterations: run.iterations(),
                elapsed: run.elapsed(),
                rel_residual: run.rel_residual(),
                converged: run.converged(),
                diverged: run.diverged,
                report: &run.report,
            })
            .collect(),
    };
    let file = File::create(&json_path)
        .with_context(|| format!("cannot create {}", json_path.display()))?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, &report)?;
    writeln!(writer)?;
    writer.flush()?;

    println!(
        "wrote {} and {}",
        csv_path.display(),
        json_path.display()
    );
    Ok(runs.iter().all(RunOutcome::converged))
}

/// Opens an output file and stamps the configuration hash header line.
fn create_output(path: &Path, hash: u64) -> anyhow::Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("cannot create {}", parent.display()))?;
        }
    }
    let file =
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut writer = BufWriter::new(file);
    writeln!(writer, "# config={hash:016x}")?;
    Ok(writer)
}

/// Singular values of a dense matrix, non-increasing.
fn singular_values(u: faer::MatRef<'_, f64>) -> Vec<f64> {
    let svd = u.thin_svd().expect("SVD of a finite solution matrix");
    (0..svd.U().ncols()).map(|i| svd.S()[i]).collect()
}

/// Solves the experiment with the full solver and writes the singular-value
/// spectrum of the physical solution matrix to `<out>.csv` as
/// `index,sigma` rows in descending order. Returns whether the solve
/// converged.
pub fn dump_solution_spectrum(cfg: &ExperimentConfig) -> anyhow::Result<bool> {
    let problem = Problem::build(cfg)?;
    let mg = problem.mg_config(cfg.tol, cfg.maxit, cfg.eps_rel, cfg.eps_abs);
    let (solution, report) = problem
        .hierarchy()
        .solve_full(problem.forcing_dense().as_ref(), &mg)
        .context("solution-spectrum solve failed")?;

    let hash = config_hash("solution-spectrum", cfg);
    let csv_path = cfg.out.with_extension("csv");
    let mut csv = create_output(&csv_path, hash)?;
    writeln!(csv, "index,sigma")?;
    for (index, sigma) in singular_values(solution.as_ref()).iter().enumerate() {
        writeln!(csv, "{index},{}", fmt_float(sigma * problem.physical_scale()))?;
    }
    csv.flush()?;

    println!(
        "solution spectrum ({} values) written to {} after {} iterations (rel residual {:.2e})",
        solution.ncols().min(solution.nrows()),
        csv_path.display(),
        report.iterations,
        report.residual_history.last().copied().unwrap_or(f64::NAN),
    );
    Ok(report.converged)
}

/// Runs the full solver and writes the singular values of every V-cycle
/// correction (before it is applied, without truncation) to `<out>.csv` as
/// `iteration,index,sigma` rows. Iteration 0 is the first V-cycle applied to
/// the initial residual, i.e. the forcing itself. Returns whether the solve
/// converged.
pub fn dump_correction_spectra(cfg: &ExperimentConfig) -> anyhow::Result<bool> {
    let problem = Problem::build(cfg)?;
    let mg = problem.mg_config(cfg.tol, cfg.maxit, cfg.eps_rel, cfg.eps_abs);
    let mut spectra: Vec<Vec<f64>> = Vec::new();
    let (_, report) = problem
        .hierarchy()
        .solve_full_with_observer(problem.forcing_dense().as_ref(), &mg, |iteration, c| {
            debug_assert_eq!(iteration, spectra.len());
            spectra.push(singular_values(c));
        })
        .context("correction-spectra solve failed")?;

    let hash = config_hash("correction-spectra", cfg);
    let csv_path = cfg.out.with_extension("csv");
    let mut csv = create_output(&csv_path, hash)?;
    writeln!(csv, "iteration,index,sigma")?;
    for (iteration, sigma) in spectra.iter().enumerate() {
        for (index, value) in sigma.iter().enumerate() {
            writeln!(
                csv,
                "{iteration},{index},{}",
                fmt_float(value * problem.physical_scale())
            )?;
        }
    }
    csv.flush()?;

    println!(
        "correction spectra for {} iterations written to {}",
        spectra.len(),
        csv_path.display()
    );
    Ok(report.converged)
}

/// Writes the finest-level operator factors K_0..K_m and G_0..G_m as
/// plain-text `row col value` triplet files into `dir`.
pub fn dump_matrices(dir: &Path, cfg: &ExperimentConfig, problem: &Problem) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let hash = config_hash("solve", cfg);
    let op = problem.hierarchy().operator(problem.hierarchy().finest());
    for l in 0..=op.num_terms() {
        for (name, matrix) in [("K", op.k(l)), ("G", op.g(l))] {
            let path = dir.join(format!("{name}{l}.txt"));
            let mut out = create_output(&path, hash)?;
            sparse::write_triplets(matrix.as_ref(), &mut out)?;
            out.flush()?;
        }
    }
    println!(
        "wrote {} triplet files to {}",
        2 * (op.num_terms() + 1),
        dir.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_outcome() -> RunOutcome {
        RunOutcome {
            label: "unit".into(),
            mode: "lowrank",
            forcing: Forcing::Unit,
            eps_abs: Some(1e-6),
            tol: 1e-6,
            level: 5,
            sigma: 0.01,
            b: 4.0,
            m: 11,
            p: 3,
            n_x: 3969,
            n_xi: 364,
            diverged: false,
            report: SolveReport {
                iterations: 5,
                residual_history: vec![1.0, 1e-2, 2.94e-6],
                rank_history: vec![0, 14, 44],
                final_rank: 44,
                converged: true,
                wall_time: 1.5,
            },
        }
    }

    #[test]
    fn csv_line_has_the_documented_shape() {
        let line = sample_outcome().csv_line();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 15);
        assert_eq!(fields[0], "lowrank");
        assert_eq!(fields[1], "unit");
        assert_eq!(fields[4], "5");
        assert_eq!(fields[9], "3969");
        assert_eq!(fields[11], "44");
        assert_eq!(fields[14].parse::<f64>().unwrap(), 2.94e-6);
    }

    #[test]
    fn full_runs_leave_the_truncation_field_empty() {
        let mut run = sample_outcome();
        run.mode = "full";
        run.eps_abs = None;
        run.forcing = Forcing::Raw;
        let line = run.csv_line();
        assert!(line.starts_with("full,raw,,"));
    }

    #[test]
    fn floats_round_trip_through_the_csv_format() {
        for x in [2.94e-6, 0.1, 1.0 / 3.0, 6.62607015e-34] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn matched_tol_falls_back_when_the_residual_is_unusable() {
        let mut run = sample_outcome();
        assert_eq!(matched_tol(&run, 1e-6), 2.94e-6);
        run.report.residual_history = vec![1.0, f64::NAN];
        assert_eq!(matched_tol(&run, 1e-6), 1e-6);
    }

    #[test]
    fn preset_rows_cover_the_study_grid() {
        let base = ExperimentConfig::default();
        assert_eq!(preset_rows(1, false, &base).len(), 2);
        assert_eq!(preset_rows(1, true, &base).len(), 4);
        let table2 = preset_rows(2, false, &base);
        assert_eq!(table2[0].1.m, Some(8));
        assert_eq!(table2[1].1.b, 4.0);
        let table3 = preset_rows(3, false, &base);
        assert_eq!(table3.len(), 3);
        assert!(table3.windows(2).all(|w| w[0].1.sigma < w[1].1.sigma));
        let table4 = preset_rows(4, false, &base);
        assert!(table4
            .iter()
            .all(|(_, cfg)| cfg.cov == Covariance::Sqexp && cfg.m == Some(3)));
    }

    #[test]
    fn preset_rows_inherit_loop_controls_but_own_problem_parameters() {
        let base = ExperimentConfig {
            sigma: 0.5,
            maxit: 7,
            tol: 1e-4,
            ..ExperimentConfig::default()
        };
        for (_, cfg) in preset_rows(1, true, &base) {
            assert_eq!(cfg.maxit, 7);
            assert_eq!(cfg.tol, 1e-4);
            assert_eq!(cfg.sigma, 0.01, "rows pin their own problem parameters");
        }
    }
}
