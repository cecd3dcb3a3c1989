//! Regularization paths.
//!
//! A path solves the problem on a decreasing grid of hyperparameters starting
//! at `t_max`, the smallest `t` for which the prior itself is optimal. Each
//! solve is warm-started from the previous dual solution.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::penalty::PenaltyKind;
use crate::solvers::{self, check_optimality, Problem, SolverChoice, SolverOptions, TracePoint};

/// Number of hyperparameter values in [`make_schedule`].
pub const SCHEDULE_LEN: usize = 141;

/// Entries of `w` with magnitude at most this are counted as zero.
pub const NONZERO_THRESHOLD: f64 = 1e-10;

pub const SCHEMA_VERSION: u32 = 1;

/// Smallest `t` at which `w = 0` (the prior) solves the problem:
///
/// * elastic net: `|r0|_inf / alpha`
/// * group lasso: `max_g |r0_g|_2 / sqrt(m_g)`
/// * l-infinity: `|r0|_1`
///
/// with `r0 = emp_avg - E_prior[phi]`. The penalty's own `t` is ignored.
pub fn t_max(problem: &Problem) -> Result<f64> {
    let r0 = problem.residual(problem.prior())?;
    Ok(match &problem.penalty().kind {
        PenaltyKind::ElasticNet { alpha } => r0.iter().fold(0.0_f64, |a, r| a.max(r.abs())) / alpha,
        PenaltyKind::GroupLasso { groups } => (0..groups.len()).fold(0.0_f64, |a, g| {
            a.max(groups.group_norm(g, &r0) / (groups.groups()[g].len() as f64).sqrt())
        }),
        PenaltyKind::LInf => r0.iter().map(|r| r.abs()).sum(),
    })
}

/// The 141-point grid: `(1 - l/100) t0` for `l = 0..=50`, then
/// `(0.5 - (l - 50)/200) t0` for `l = 51..=140`, ending at `0.05 t0`.
pub fn make_schedule(t0: f64) -> Result<Vec<f64>> {
    if !(t0 > 0.0) || !t0.is_finite() {
        return Err(invalid(format!("schedule start must be positive and finite, got {t0}")));
    }
    Ok((0..SCHEDULE_LEN)
        .map(|l| {
            // Same values as the formulas above, written so that the anchor
            // fractions 1, 0.5 and 0.05 come out as exact literals.
            let l = l as f64;
            if l <= 50.0 {
                (100.0 - l) / 100.0 * t0
            } else {
                (150.0 - l) / 200.0 * t0
            }
        })
        .collect())
}

/// Anchors `(index, fraction of t0)` reproducing [`make_schedule`].
pub const DEFAULT_ANCHORS: [(usize, f64); 3] = [(0, 1.0), (50, 0.5), (140, 0.05)];

/// Piecewise-linear grid through `anchors`, given as `(index, fraction)`
/// pairs with strictly increasing indices starting at 0 and decreasing
/// positive fractions. The grid has `last index + 1` points.
pub fn make_schedule_with(t0: f64, anchors: &[(usize, f64)]) -> Result<Vec<f64>> {
    if !(t0 > 0.0) || !t0.is_finite() {
        return Err(invalid(format!("schedule start must be positive and finite, got {t0}")));
    }
    match anchors.first() {
        Some((0, _)) => {}
        _ => return Err(invalid("schedule anchors must start at index 0")),
    }
    if anchors.iter().any(|(_, f)| !(*f > 0.0) || !f.is_finite()) {
        return Err(invalid("schedule fractions must be positive and finite"));
    }
    if anchors.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 >= w[0].1) {
        return Err(invalid("schedule anchors need increasing indices and decreasing fractions"));
    }
    let mut out = vec![anchors[0].1 * t0];
    for w in anchors.windows(2) {
        let ((i0, f0), (i1, f1)) = (w[0], w[1]);
        let span = (i1 - i0) as f64;
        for l in i0 + 1..=i1 {
            let s = (l - i0) as f64 / span;
            out.push((f0 + s * (f1 - f0)) * t0);
        }
    }
    Ok(out)
}

/// Stretches the default anchors over `count` points (`count >= 3`).
pub fn scaled_anchors(count: usize) -> Result<Vec<(usize, f64)>> {
    if count < 3 {
        return Err(invalid("a schedule needs at least 3 points"));
    }
    let last = count - 1;
    let knee = ((50 * last) as f64 / 140.0).round() as usize;
    let knee = knee.clamp(1, last - 1);
    Ok(vec![(0, 1.0), (knee, 0.5), (last, 0.05)])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathOptions {
    pub solver: SolverChoice,
    /// Start each solve from the previous solution rather than from zero.
    pub warm_start: bool,
    pub solver_opts: SolverOptions,
    /// Overrides the computed `t_max`.
    pub t0: Option<f64>,
    /// Overrides [`make_schedule`]; must be positive and decreasing.
    pub schedule: Option<Vec<f64>>,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            solver: SolverChoice::Npdhg,
            warm_start: true,
            solver_opts: SolverOptions::default(),
            t0: None,
            schedule: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub t: f64,
    pub w: Vec<f64>,
    pub iterations: usize,
    /// Final value of the stopping test.
    pub residual: f64,
    pub nonzero_count: usize,
    #[serde(default = "default_true")]
    pub converged: bool,
    /// Objective values per iteration, kept only when the solver traced.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TracePoint>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub schema_version: u32,
    pub penalty: PenaltyKind,
    pub t0: f64,
    pub records: Vec<PathRecord>,
}

fn nonzero_count(w: &[f64]) -> usize {
    w.iter().filter(|v| v.abs() > NONZERO_THRESHOLD).count()
}

/// Fits the whole path. The first grid point is `t0` itself, where the
/// solution is known in closed form (`w = 0`), so it is recorded without
/// running a solver. The penalty's `t` in `problem` is ignored.
pub fn fit_path(problem: &Problem, opts: &PathOptions) -> Result<PathResult> {
    let kind = &problem.penalty().kind;
    if !opts.solver.supports(kind) {
        return Err(Error::UnsupportedPenalty {
            solver: opts.solver.name(),
            penalty: kind.name(),
        });
    }
    let t0 = match opts.t0 {
        Some(t0) => t0,
        None => t_max(problem)?,
    };
    let schedule = match &opts.schedule {
        Some(s) => {
            if s.is_empty() || s.iter().any(|t| !(*t > 0.0)) || s.windows(2).any(|w| w[1] > w[0]) {
                return Err(invalid("path schedule must be positive and nonincreasing"));
            }
            s.clone()
        }
        None => {
            if t0 == 0.0 {
                return Err(invalid(
                    "t_max is zero: the empirical average matches the prior, so the path is trivial",
                ));
            }
            make_schedule(t0)?
        }
    };

    let m = problem.phi().m();
    let zero = vec![0.0; m];
    let mut records = Vec::with_capacity(schedule.len());
    let mut prev_w = zero.clone();
    for (l, &t) in schedule.iter().enumerate() {
        let at_t = problem.with_t(t);
        if l == 0 && opts.schedule.is_none() {
            let r0 = at_t.residual(problem.prior())?;
            let check = check_optimality(at_t.penalty(), &r0, &zero, opts.solver_opts.tol);
            records.push(PathRecord {
                t,
                w: zero.clone(),
                iterations: 0,
                residual: check.value,
                nonzero_count: 0,
                converged: true,
                trace: Vec::new(),
            });
            continue;
        }
        let start = if opts.warm_start { &prev_w } else { &zero };
        let sol = solvers::solve(&at_t, opts.solver, start, start, &opts.solver_opts)?;
        records.push(PathRecord {
            t,
            nonzero_count: nonzero_count(&sol.w),
            iterations: sol.report.iterations,
            residual: sol.report.final_residual,
            converged: sol.report.converged,
            w: sol.w,
            trace: sol.report.trace,
        });
        prev_w.clone_from(&records.last().expect("just pushed").w);
    }
    Ok(PathResult {
        schema_version: SCHEMA_VERSION,
        penalty: kind.clone(),
        t0,
        records,
    })
}

/// When a feature (or group) first becomes active along a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryEvent {
    /// Feature index, or group index for [`PathResult::group_entry_order`].
    pub index: usize,
    /// Position in the path.
    pub step: usize,
    pub t: f64,
}

impl PathResult {
    pub fn total_iterations(&self) -> usize {
        self.records.iter().map(|r| r.iterations).sum()
    }

    pub fn all_converged(&self) -> bool {
        self.records.iter().all(|r| r.converged)
    }

    /// Features in the order they become and stay nonzero through the end
    /// of the path. Features inactive at the last record are omitted; ties
    /// keep index order.
    pub fn feature_entry_order(&self) -> Vec<EntryEvent> {
        let m = self.records.first().map_or(0, |r| r.w.len());
        self.entry_order(m, |rec, i| rec.w[i].abs() > NONZERO_THRESHOLD)
    }

    /// Groups in the order they become and stay nonzero. Empty for
    /// penalties other than the group lasso.
    pub fn group_entry_order(&self) -> Vec<EntryEvent> {
        let PenaltyKind::GroupLasso { groups } = &self.penalty else {
            return Vec::new();
        };
        self.entry_order(groups.len(), |rec, g| {
            groups.group_norm(g, &rec.w) > NONZERO_THRESHOLD
        })
    }

    /// Active-group mask of every record (group lasso only).
    pub fn group_masks(&self) -> Vec<Vec<bool>> {
        let PenaltyKind::GroupLasso { groups } = &self.penalty else {
            return Vec::new();
        };
        self.records
            .iter()
            .map(|rec| {
                (0..groups.len())
                    .map(|g| groups.group_norm(g, &rec.w) > NONZERO_THRESHOLD)
                    .collect()
            })
            .collect()
    }

    fn entry_order(&self, count: usize, active: impl Fn(&PathRecord, usize) -> bool) -> Vec<EntryEvent> {
        let mut events: Vec<EntryEvent> = (0..count)
            .filter_map(|i| {
                let last_inactive = self.records.iter().rposition(|rec| !active(rec, i));
                let step = match last_inactive {
                    None => 0,
                    Some(l) if l + 1 < self.records.len() => l + 1,
                    Some(_) => return None,
                };
                Some(EntryEvent {
                    index: i,
                    step,
                    t: self.records[step].t,
                })
            })
            .collect();
        events.sort_by_key(|e| (e.step, e.index));
        events
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "unsupported path schema version {} (expected {SCHEMA_VERSION})",
                r.schema_version
            )));
        }
        Ok(r)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// One row per record: `t,iterations,residual,nonzero_count`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["t", "iterations", "residual", "nonzero_count"])
            .map_err(csv_error)?;
        for r in &self.records {
            wtr.write_record(&[
                r.t.to_string(),
                r.iterations.to_string(),
                r.residual.to_string(),
                r.nonzero_count.to_string(),
            ])
            .map_err(csv_error)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => invalid(format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::FeatureMatrix;
    use crate::penalty::{GroupPartition, PenaltySpec};
    use crate::simplex::SimplexDistribution;

    fn problem(kind: PenaltyKind, emp: Vec<f64>) -> Problem {
        let phi = FeatureMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let prior = SimplexDistribution::uniform(3).unwrap();
        Problem::new(phi, prior, emp, PenaltySpec::new(kind, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn t_max_examples() {
        let third = 1.0 / 3.0;
        let emp = vec![third + 0.3, third - 0.1];
        let en = problem(PenaltyKind::ElasticNet { alpha: 0.5 }, emp.clone());
        assert!((t_max(&en).unwrap() - 0.6).abs() < 1e-12);
        let linf = problem(PenaltyKind::LInf, emp.clone());
        assert!((t_max(&linf).unwrap() - 0.4).abs() < 1e-12);
        let gl = problem(
            PenaltyKind::GroupLasso { groups: GroupPartition::contiguous(&[2]).unwrap() },
            emp,
        );
        assert!((t_max(&gl).unwrap() - (0.1f64).sqrt() / 2f64.sqrt()).abs() < 1e-12);
        let flat = problem(PenaltyKind::LInf, vec![third, third]);
        assert!(t_max(&flat).unwrap() < 1e-15);
    }

    #[test]
    fn schedule_anchors() {
        let s = make_schedule(2.0).unwrap();
        assert_eq!(s.len(), SCHEDULE_LEN);
        assert_eq!(s[0], 2.0);
        assert_eq!(s[50], 1.0);
        assert_eq!(s[140], 0.05 * 2.0);
        assert!(s.windows(2).all(|w| w[1] < w[0]));
        assert!(make_schedule(0.0).is_err());
        assert!(make_schedule(-1.0).is_err());
    }

    #[test]
    fn anchored_schedule_reproduces_default() {
        let a = make_schedule(1.7).unwrap();
        let b = make_schedule_with(1.7, &DEFAULT_ANCHORS).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
        assert_eq!(scaled_anchors(141).unwrap(), DEFAULT_ANCHORS.to_vec());
        assert_eq!(make_schedule_with(1.0, &scaled_anchors(11).unwrap()).unwrap().len(), 11);
        assert!(make_schedule_with(1.0, &[(1, 1.0)]).is_err());
        assert!(make_schedule_with(1.0, &[(0, 1.0), (5, 1.5)]).is_err());
        assert!(scaled_anchors(2).is_err());
    }

    #[test]
    fn degenerate_path_is_rejected() {
        let third = 1.0 / 3.0;
        let flat = problem(PenaltyKind::LInf, vec![third, third]);
        assert!(fit_path(&flat, &PathOptions::default()).is_err());
    }

    fn record(t: f64, w: Vec<f64>) -> PathRecord {
        PathRecord {
            t,
            nonzero_count: nonzero_count(&w),
            w,
            iterations: 1,
            residual: 0.0,
            converged: true,
            trace: Vec::new(),
        }
    }

    #[test]
    fn entry_order_uses_stays_active_rule() {
        let path = PathResult {
            schema_version: SCHEMA_VERSION,
            penalty: PenaltyKind::LInf,
            t0: 1.0,
            records: vec![
                record(1.0, vec![0.0, 0.0, 0.0]),
                record(0.9, vec![0.0, 0.2, 0.0]),
                record(0.8, vec![0.1, 0.0, 0.3]),
                record(0.7, vec![0.1, 0.2, 0.3]),
                record(0.6, vec![0.1, 0.2, 0.0]),
            ],
        };
        let order: Vec<(usize, usize)> =
            path.feature_entry_order().iter().map(|e| (e.index, e.step)).collect();
        assert_eq!(order, vec![(0, 2), (1, 3)]);
        let empty = PathResult { records: vec![record(1.0, vec![0.0; 3])], ..path };
        assert!(empty.feature_entry_order().is_empty());
    }

    #[test]
    fn json_round_trip() {
        let r = PathResult {
            schema_version: SCHEMA_VERSION,
            penalty: PenaltyKind::LInf,
            t0: 1.0,
            records: vec![PathRecord {
                t: 1.0,
                w: vec![0.0, 0.5],
                iterations: 3,
                residual: 0.9,
                nonzero_count: 1,
                converged: true,
                trace: Vec::new(),
            }],
        };
        let back = PathResult::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "t,iterations,residual,nonzero_count\n1,3,0.9,1\n");
    }
}
