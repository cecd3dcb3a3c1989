//! Path-level benchmarks comparing solvers.
//!
//! Every timed run rebuilds the problem from raw data, so the measured time
//! includes validation and the stepsize setup each solver needs (the
//! column-norm bound for the primal-dual schemes, power iteration for
//! forward-backward splitting).

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::path::{fit_path, PathOptions, SCHEMA_VERSION};
use crate::penalty::{PenaltyKind, PenaltySpec};
use crate::solvers::{Problem, SolverChoice};

/// A named problem; its penalty is replaced by each benchmarked penalty.
#[derive(Debug, Clone)]
pub struct BenchInstance {
    pub name: String,
    pub problem: Problem,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Timed repetitions per cell (at least 1).
    pub runs: usize,
    /// Benchmark instances concurrently (each keeps its own timers).
    pub parallel: bool,
    /// Path settings; `solver` is overridden per row.
    pub path: PathOptions,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            runs: 5,
            parallel: false,
            path: PathOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance: String,
    pub solver: String,
    pub penalty: PenaltyKind,
    pub supported: bool,
    /// Path iterations of the first successful run.
    pub total_iterations: Option<usize>,
    /// Convergence flag of every path point (first successful run).
    pub converged: Vec<bool>,
    pub median_seconds: Option<f64>,
    pub mean_seconds: Option<f64>,
    /// Runs that completed; failed runs are excluded from the timings.
    pub successful_runs: usize,
    pub errors: Vec<String>,
    pub op_norm: f64,
    pub spectral_norm: f64,
}

impl BenchRow {
    pub fn all_converged(&self) -> bool {
        self.supported && !self.converged.is_empty() && self.converged.iter().all(|c| *c)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub runs: usize,
    pub rows: Vec<BenchRow>,
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

fn bench_cell(
    inst: &BenchInstance,
    solver: SolverChoice,
    kind: &PenaltyKind,
    config: &BenchConfig,
) -> Result<BenchRow> {
    let base = &inst.problem;
    let mut row = BenchRow {
        instance: inst.name.clone(),
        solver: solver.name().to_string(),
        penalty: kind.clone(),
        supported: solver.supports(kind),
        total_iterations: None,
        converged: Vec::new(),
        median_seconds: None,
        mean_seconds: None,
        successful_runs: 0,
        errors: Vec::new(),
        op_norm: base.op_norm(),
        spectral_norm: base.spectral_norm(),
    };
    if !row.supported {
        return Ok(row);
    }
    let opts = PathOptions {
        solver,
        ..config.path.clone()
    };
    let penalty = PenaltySpec::new(kind.clone(), 0.0)?;
    let mut times = Vec::with_capacity(config.runs);
    for _ in 0..config.runs {
        let phi = base.phi().clone();
        let prior = base.prior().clone();
        let emp = base.emp_avg().to_vec();
        let penalty = penalty.clone();
        let started = Instant::now();
        let outcome = Problem::new(phi, prior, emp, penalty).and_then(|p| fit_path(&p, &opts));
        let elapsed = started.elapsed().as_secs_f64();
        match outcome {
            Ok(path) => {
                times.push(elapsed);
                if row.total_iterations.is_none() {
                    row.total_iterations = Some(path.total_iterations());
                    row.converged = path.records.iter().map(|r| r.converged).collect();
                }
            }
            Err(e) => row.errors.push(e.to_string()),
        }
    }
    row.successful_runs = times.len();
    if !times.is_empty() {
        row.mean_seconds = Some(times.iter().sum::<f64>() / times.len() as f64);
        row.median_seconds = Some(median(&mut times));
    }
    Ok(row)
}

/// Times full regularization paths for every (instance, solver, penalty)
/// combination. Unsupported combinations appear as rows marked
/// unsupported.
pub fn run_benchmark(
    instances: &[BenchInstance],
    solvers: &[SolverChoice],
    penalties: &[PenaltyKind],
    config: &BenchConfig,
) -> Result<BenchReport> {
    if config.runs == 0 {
        return Err(invalid("benchmark needs at least one run"));
    }
    let per_instance = |inst: &BenchInstance| -> Result<Vec<BenchRow>> {
        let mut rows = Vec::new();
        for kind in penalties {
            kind.validate(Some(inst.problem.phi().m()))?;
            for &solver in solvers {
                rows.push(bench_cell(inst, solver, kind, config)?);
            }
        }
        Ok(rows)
    };
    let nested: Vec<Vec<BenchRow>> = if config.parallel {
        instances.par_iter().map(per_instance).collect::<Result<_>>()?
    } else {
        instances.iter().map(per_instance).collect::<Result<_>>()?
    };
    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        runs: config.runs,
        rows: nested.into_iter().flatten().collect(),
    })
}

fn penalty_label(kind: &PenaltyKind) -> String {
    match kind {
        PenaltyKind::ElasticNet { alpha } => format!("elastic net a={alpha}"),
        PenaltyKind::GroupLasso { groups } => format!("group lasso ({} groups)", groups.len()),
        PenaltyKind::LInf => "l-infinity".to_string(),
    }
}

impl BenchReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned text table: one line per row, unsupported cells shown as N/A.
    pub fn table(&self) -> String {
        let header = ["instance", "penalty", "solver", "iterations", "median s", "mean s", "converged"];
        let cells: Vec<[String; 7]> = self
            .rows
            .iter()
            .map(|r| {
                let na = || "N/A".to_string();
                let fmt_time = |t: Option<f64>| t.map_or_else(na, |v| format!("{v:.3}"));
                [
                    r.instance.clone(),
                    penalty_label(&r.penalty),
                    r.solver.clone(),
                    r.total_iterations.map_or_else(na, |v| v.to_string()),
                    fmt_time(r.median_seconds),
                    fmt_time(r.mean_seconds),
                    if !r.supported {
                        na()
                    } else {
                        let ok = r.converged.iter().filter(|c| **c).count();
                        format!("{ok}/{}", r.converged.len())
                    },
                ]
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, fields: &[&str]| {
            let parts: Vec<String> = fields
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(k, (f, w))| if k < 3 { format!("{f:<w$}") } else { format!("{f:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&mut out, &header);
        for row in &cells {
            let fields: Vec<&str> = row.iter().map(String::as_str).collect();
            line(&mut out, &fields);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::FeatureMatrix;
    use crate::simplex::SimplexDistribution;

    #[test]
    fn single_instance_single_run() {
        let phi = FeatureMatrix::from_rows(&[vec![0.0, 1.0, 0.5], vec![1.0, 0.2, 0.4]]).unwrap();
        let prior = SimplexDistribution::uniform(3).unwrap();
        let emp = SimplexDistribution::new(vec![0.5, 0.3, 0.2]).unwrap();
        let spec = PenaltySpec::new(PenaltyKind::LInf, 1.0).unwrap();
        let problem = Problem::from_empirical(phi, prior, &emp, spec).unwrap();
        let inst = BenchInstance { name: "toy".into(), problem };
        let config = BenchConfig { runs: 1, ..BenchConfig::default() };
        let report = run_benchmark(
            &[inst],
            &[SolverChoice::NpdhgNonsmooth, SolverChoice::Structmaxent2],
            &[PenaltyKind::LInf],
            &config,
        )
        .unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows[0].supported && report.rows[0].total_iterations.is_some());
        assert!(!report.rows[1].supported);
        assert!(report.table().contains("N/A"));
    }
}
