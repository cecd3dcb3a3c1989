//! Solvers for the regularized maximum-entropy problem
//!
//! ```text
//! min_{p in simplex}  D_KL(p || prior) + t H*((emp_avg - A p) / t)
//! ```
//!
//! and its dual
//!
//! ```text
//! max_w  <w, emp_avg> - t H(w) - log sum_j prior(j) exp(<w, phi(j)>).
//! ```
//!
//! Four algorithms share the [`Problem`] description, the stopping rules in
//! [`check_optimality`], and the [`Solution`] output:
//!
//! * [`npdhg_nonsmooth`]: accelerated primal-dual iteration whose primal step
//!   is a KL proximal step (closed form: a Gibbs distribution).
//! * [`npdhg_smooth`]: constant-stepsize variant with a linear rate when the
//!   dual regularizer is strongly convex (elastic net with `alpha < 1`).
//! * [`fbs_solve`]: accelerated forward-backward splitting on the dual.
//! * [`structmaxent2_solve`]: cyclic coordinate descent on the dual
//!   (elastic net only).

mod coord;
mod fbs;
mod npdhg;

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

pub use coord::structmaxent2_solve;
pub use fbs::{fbs_solve, FbsStep};
pub use npdhg::{npdhg_nonsmooth, npdhg_smooth, smooth_stepsizes, NpdhgIteration, Schedule, SolverState};

use crate::error::{check_dim, invalid, Error, Result};
use crate::kernels::{self, Gibbs};
use crate::matrix::{FeatureMatrix, POWER_ITERATION_TOL};
use crate::penalty::{PenaltyKind, PenaltySpec};
use crate::simplex::SimplexDistribution;

/// Data shared by every hyperparameter value: features, prior and the
/// empirical feature average. Operator norms are computed on first use.
#[derive(Debug)]
struct ProblemData {
    phi: FeatureMatrix,
    prior: SimplexDistribution,
    emp_avg: Vec<f64>,
    op_norm: OnceLock<f64>,
    spectral_norm: OnceLock<f64>,
}

/// A maximum-entropy estimation problem at one hyperparameter value.
///
/// Cloning is cheap: the feature matrix is shared.
#[derive(Debug, Clone)]
pub struct Problem {
    data: Arc<ProblemData>,
    penalty: PenaltySpec,
}

impl Problem {
    pub fn new(
        phi: FeatureMatrix,
        prior: SimplexDistribution,
        emp_avg: Vec<f64>,
        penalty: PenaltySpec,
    ) -> Result<Self> {
        check_dim("prior length", phi.n(), prior.len())?;
        check_dim("empirical average length", phi.m(), emp_avg.len())?;
        prior.require_interior("prior")?;
        if emp_avg.iter().any(|v| !v.is_finite()) {
            return Err(invalid("empirical average has non-finite entries"));
        }
        penalty.validate(Some(phi.m()))?;
        Ok(Self {
            data: Arc::new(ProblemData {
                phi,
                prior,
                emp_avg,
                op_norm: OnceLock::new(),
                spectral_norm: OnceLock::new(),
            }),
            penalty,
        })
    }

    /// Builds the problem from an empirical distribution over the outcomes.
    pub fn from_empirical(
        phi: FeatureMatrix,
        prior: SimplexDistribution,
        empirical: &SimplexDistribution,
        penalty: PenaltySpec,
    ) -> Result<Self> {
        let emp_avg = phi.model_average(empirical)?;
        Self::new(phi, prior, emp_avg, penalty)
    }

    /// Same data, different hyperparameter.
    pub fn with_t(&self, t: f64) -> Self {
        Self {
            data: Arc::clone(&self.data),
            penalty: self.penalty.with_t(t),
        }
    }

    /// Same data, different penalty.
    pub fn with_penalty(&self, penalty: PenaltySpec) -> Result<Self> {
        penalty.validate(Some(self.phi().m()))?;
        Ok(Self {
            data: Arc::clone(&self.data),
            penalty,
        })
    }

    pub fn phi(&self) -> &FeatureMatrix {
        &self.data.phi
    }

    pub fn prior(&self) -> &SimplexDistribution {
        &self.data.prior
    }

    pub fn emp_avg(&self) -> &[f64] {
        &self.data.emp_avg
    }

    pub fn penalty(&self) -> &PenaltySpec {
        &self.penalty
    }

    pub fn t(&self) -> f64 {
        self.penalty.t
    }

    /// `max_j |phi(j)|_2`, cached.
    pub fn op_norm(&self) -> f64 {
        *self.data.op_norm.get_or_init(|| self.data.phi.operator_norm_1to2())
    }

    /// Largest singular value of the feature matrix, cached. Falls back to
    /// the best power-iteration estimate if the iteration cap is hit.
    pub fn spectral_norm(&self) -> f64 {
        *self.data.spectral_norm.get_or_init(|| {
            match self.data.phi.largest_singular_value(POWER_ITERATION_TOL) {
                Ok(s) => s,
                Err(Error::PowerIteration { estimate, .. }) => estimate,
                Err(_) => unreachable!("tolerance is positive"),
            }
        })
    }

    /// `emp_avg - E_p[phi]`.
    pub fn residual(&self, p: &SimplexDistribution) -> Result<Vec<f64>> {
        let avg = self.phi().model_average(p)?;
        Ok(self.emp_avg().iter().zip(&avg).map(|(e, a)| e - a).collect())
    }

    /// Cheap necessary condition for the empirical average to lie in the
    /// convex hull of the columns: each coordinate must fall inside the
    /// feature's range. Returns one message per violated coordinate.
    pub fn hull_warnings(&self) -> Vec<String> {
        self.phi()
            .feature_ranges()
            .iter()
            .zip(self.emp_avg())
            .enumerate()
            .filter(|(_, ((lo, hi), e))| **e < *lo || **e > *hi)
            .map(|(i, ((lo, hi), e))| {
                format!("empirical average of feature {i} is {e}, outside its range [{lo}, {hi}]")
            })
            .collect()
    }

    pub(crate) fn primal_at(&self, p: &[f64], residual: &[f64], slack: f64) -> f64 {
        kernels::kl_unchecked(p, self.prior().probs())
            + kernels::scaled_potential_with_slack(&self.penalty, residual, slack)
    }

    pub(crate) fn dual_at(&self, w: &[f64], log_partition: f64) -> f64 {
        let inner: f64 = w.iter().zip(self.emp_avg()).map(|(a, b)| a * b).sum();
        inner - self.penalty.t * self.penalty.kind.regularizer(w) - log_partition
    }
}

/// Which optimality test terminates a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// The per-penalty residual bounds of [`check_optimality`].
    #[default]
    Residual,
    /// Full subgradient inclusion `residual ∈ t ∂H(w)`, see [`kkt_violation`].
    Kkt,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    /// Iterations always run before the stopping test is consulted.
    pub min_iters: usize,
    pub max_iters: usize,
    /// Stride between stopping tests after the burn-in.
    pub check_every: usize,
    pub stop_rule: StopRule,
    /// Stepsize convention for [`fbs_solve`].
    pub fbs_step: FbsStep,
    /// Record objective values at every iteration (costly).
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            min_iters: 40,
            max_iters: 200_000,
            check_every: 1,
            stop_rule: StopRule::Residual,
            fbs_step: FbsStep::default(),
            trace: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(invalid(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.check_every == 0 {
            return Err(invalid("check_every must be >= 1"));
        }
        if self.max_iters < self.min_iters {
            return Err(invalid("max_iters must be >= min_iters"));
        }
        Ok(())
    }

    pub(crate) fn should_check(&self, iteration: usize) -> bool {
        iteration >= self.min_iters
            && ((iteration - self.min_iters) % self.check_every == 0 || iteration == self.max_iters)
    }
}

/// Objective values at one iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub primal: f64,
    pub dual: f64,
    /// `D_KL(p_k || prior)`.
    pub kl: f64,
    /// `|p_k - prior|_1`.
    pub l1_from_prior: f64,
}

impl TracePoint {
    pub fn gap(&self) -> f64 {
        self.primal - self.dual
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Value of the stopping test at the final iterate.
    pub final_residual: f64,
    pub converged: bool,
    /// Seconds.
    pub wall_time: f64,
    /// Primal objective at the final `p`. Indicator-type potentials count as
    /// satisfied within the relative solver tolerance.
    pub objective_primal: f64,
    pub objective_dual: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub p: SimplexDistribution,
    pub w: Vec<f64>,
    /// The primal parameter: `p = gibbs(prior, z)`.
    pub z: Vec<f64>,
    pub report: SolveReport,
}

/// Algorithm selector used by the path driver, the benchmark and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    /// [`npdhg_smooth`] for elastic nets with `alpha <= 0.5`, otherwise
    /// [`npdhg_nonsmooth`].
    Npdhg,
    NpdhgNonsmooth,
    NpdhgSmooth,
    Fbs,
    Structmaxent2,
}

impl SolverChoice {
    pub fn name(self) -> &'static str {
        match self {
            Self::Npdhg => "npdhg",
            Self::NpdhgNonsmooth => "npdhg_nonsmooth",
            Self::NpdhgSmooth => "npdhg_smooth",
            Self::Fbs => "fbs",
            Self::Structmaxent2 => "structmaxent2",
        }
    }

    /// Resolves [`SolverChoice::Npdhg`] against a penalty.
    pub fn resolve(self, kind: &PenaltyKind) -> Self {
        match (self, kind) {
            (Self::Npdhg, PenaltyKind::ElasticNet { alpha }) if *alpha <= 0.5 => Self::NpdhgSmooth,
            (Self::Npdhg, _) => Self::NpdhgNonsmooth,
            (other, _) => other,
        }
    }

    pub fn supports(self, kind: &PenaltyKind) -> bool {
        match self.resolve(kind) {
            Self::NpdhgSmooth => matches!(kind, PenaltyKind::ElasticNet { alpha } if *alpha < 1.0),
            Self::Structmaxent2 => matches!(kind, PenaltyKind::ElasticNet { .. }),
            _ => true,
        }
    }
}

/// Runs the selected solver from the given starting point. `init_z` is only
/// used by the NPDHG schemes.
pub fn solve(
    problem: &Problem,
    choice: SolverChoice,
    init_z: &[f64],
    init_w: &[f64],
    opts: &SolverOptions,
) -> Result<Solution> {
    match choice.resolve(&problem.penalty().kind) {
        SolverChoice::NpdhgNonsmooth | SolverChoice::Npdhg => {
            npdhg_nonsmooth(problem, init_z, init_w, opts)
        }
        SolverChoice::NpdhgSmooth => npdhg_smooth(problem, init_z, init_w, opts),
        SolverChoice::Fbs => fbs_solve(problem, init_w, opts),
        SolverChoice::Structmaxent2 => structmaxent2_solve(problem, init_w, opts),
    }
}

/// Outcome of a stopping test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalityCheck {
    pub passed: bool,
    /// The measured left-hand side.
    pub value: f64,
    /// The bound it was compared against.
    pub threshold: f64,
}

/// The per-penalty residual test used to stop every solver:
///
/// * elastic net: `|r - t(1 - alpha) w|_inf <= t alpha (1 + tol)`
/// * group lasso: `max_g |r_g|_2 / sqrt(m_g) <= t (1 + tol)`
/// * l-infinity: `|r|_1 <= t (1 + tol)`
///
/// where `r = emp_avg - E_p[phi]`.
pub fn check_optimality(penalty: &PenaltySpec, residual: &[f64], w: &[f64], tol: f64) -> OptimalityCheck {
    let t = penalty.t;
    let (value, threshold) = match &penalty.kind {
        PenaltyKind::ElasticNet { alpha } => {
            let shift = t * (1.0 - alpha);
            let value = residual
                .iter()
                .zip(w)
                .fold(0.0_f64, |acc, (r, wi)| acc.max((r - shift * wi).abs()));
            (value, t * alpha * (1.0 + tol))
        }
        PenaltyKind::GroupLasso { groups } => {
            let value = (0..groups.len()).fold(0.0_f64, |acc, g| {
                let size = groups.groups()[g].len() as f64;
                acc.max(groups.group_norm(g, residual) / size.sqrt())
            });
            (value, t * (1.0 + tol))
        }
        PenaltyKind::LInf => {
            let value: f64 = residual.iter().map(|r| r.abs()).sum();
            (value, t * (1.0 + tol))
        }
    };
    OptimalityCheck {
        passed: value <= threshold,
        value,
        threshold,
    }
}

/// Violation of the optimality condition `r ∈ t ∂H(w)`, measured in
/// residual units (zero exactly at a primal-dual solution pair).
///
/// * elastic net: per coordinate, distance of `r_i - t(1-alpha) w_i` from
///   `t alpha ∂|w_i|`.
/// * group lasso: per group, distance of `r_g` from `t sqrt(m_g) ∂|w_g|`,
///   divided by `sqrt(m_g)`.
/// * l-infinity: `max(|r|_1 - t, t - <r, w> / |w|_inf)`, the Fenchel-Young
///   gap of `r ∈ t ∂|w|_inf`.
pub fn kkt_violation(penalty: &PenaltySpec, residual: &[f64], w: &[f64]) -> f64 {
    let t = penalty.t;
    match &penalty.kind {
        PenaltyKind::ElasticNet { alpha } => {
            let shift = t * (1.0 - alpha);
            let radius = t * alpha;
            residual.iter().zip(w).fold(0.0_f64, |acc, (r, wi)| {
                let v = r - shift * wi;
                let d = if *wi > 0.0 {
                    (v - radius).abs()
                } else if *wi < 0.0 {
                    (v + radius).abs()
                } else {
                    (v.abs() - radius).max(0.0)
                };
                acc.max(d)
            })
        }
        PenaltyKind::GroupLasso { groups } => (0..groups.len()).fold(0.0_f64, |acc, g| {
            let members = &groups.groups()[g];
            let scale = (members.len() as f64).sqrt();
            let wnorm = groups.group_norm(g, w);
            let d = if wnorm > 0.0 {
                members
                    .iter()
                    .map(|&i| {
                        let target = t * scale * w[i] / wnorm;
                        (residual[i] - target).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt()
                    / scale
            } else {
                (groups.group_norm(g, residual) / scale - t).max(0.0)
            };
            acc.max(d)
        }),
        PenaltyKind::LInf => {
            let l1: f64 = residual.iter().map(|r| r.abs()).sum();
            let wmax = w.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            let mut d = (l1 - t).max(0.0);
            if wmax > 0.0 {
                let inner: f64 = residual.iter().zip(w).map(|(r, wi)| r * wi).sum();
                d = d.max(t - inner / wmax);
            }
            d
        }
    }
}

/// [`kkt_violation`] packaged as a stopping test against
/// `tol * t * alpha` (elastic net) or `tol * t` (other penalties).
pub fn check_kkt(penalty: &PenaltySpec, residual: &[f64], w: &[f64], tol: f64) -> OptimalityCheck {
    let scale = match penalty.kind {
        PenaltyKind::ElasticNet { alpha } => penalty.t * alpha,
        _ => penalty.t,
    };
    let value = kkt_violation(penalty, residual, w);
    let threshold = tol * scale;
    OptimalityCheck {
        passed: value <= threshold,
        value,
        threshold,
    }
}

pub(crate) fn stopping_test(
    rule: StopRule,
    penalty: &PenaltySpec,
    residual: &[f64],
    w: &[f64],
    tol: f64,
) -> OptimalityCheck {
    match rule {
        StopRule::Residual => check_optimality(penalty, residual, w, tol),
        StopRule::Kkt => check_kkt(penalty, residual, w, tol),
    }
}

/// Sets `residual = emp_avg - A p`, using `avg` as scratch.
pub(crate) fn residual_into(problem: &Problem, p: &[f64], avg: &mut [f64], residual: &mut [f64]) {
    problem.phi().weighted_sum_into(p, avg);
    for ((r, e), a) in residual.iter_mut().zip(problem.emp_avg()).zip(avg.iter()) {
        *r = e - a;
    }
}

/// Shared bookkeeping for the iterative solvers: stopping tests, tracing,
/// and the final report.
pub(crate) struct Monitor<'a> {
    problem: &'a Problem,
    opts: &'a SolverOptions,
    trace: Vec<TracePoint>,
    started: std::time::Instant,
    /// Gibbs buffers for dual-objective evaluation while tracing.
    dual_gibbs: Option<Gibbs>,
}

impl<'a> Monitor<'a> {
    pub fn new(problem: &'a Problem, opts: &'a SolverOptions) -> Result<Self> {
        opts.validate()?;
        Ok(Self {
            problem,
            opts,
            trace: Vec::new(),
            started: std::time::Instant::now(),
            dual_gibbs: opts.trace.then(|| Gibbs::new(problem.prior())),
        })
    }

    pub fn test(&self, residual: &[f64], w: &[f64]) -> OptimalityCheck {
        stopping_test(self.opts.stop_rule, self.problem.penalty(), residual, w, self.opts.tol)
    }

    /// Records objective values for `(p, w)` when tracing is on.
    pub fn record(&mut self, iteration: usize, p: &[f64], residual: &[f64], w: &[f64]) {
        let Some(gibbs) = self.dual_gibbs.as_mut() else {
            return;
        };
        let log_z = gibbs.evaluate(self.problem.phi(), w);
        let prior = self.problem.prior().probs();
        self.trace.push(TracePoint {
            iteration,
            primal: kernels::kl_unchecked(p, prior)
                + kernels::scaled_potential_strict(&self.problem.penalty, residual),
            dual: self.problem.dual_at(w, log_z),
            kl: kernels::kl_unchecked(p, prior),
            l1_from_prior: p.iter().zip(prior).map(|(a, b)| (a - b).abs()).sum(),
        });
    }

    /// Builds the solution from the final iterate.
    pub fn finish(
        self,
        iterations: usize,
        check: OptimalityCheck,
        p: Vec<f64>,
        residual: &[f64],
        w: Vec<f64>,
        z: Vec<f64>,
    ) -> Solution {
        let wall_time = self.started.elapsed().as_secs_f64();
        let objective_primal = self.problem.primal_at(&p, residual, self.opts.tol);
        let mut gibbs = Gibbs::new(self.problem.prior());
        let log_z = gibbs.evaluate(self.problem.phi(), &w);
        let objective_dual = self.problem.dual_at(&w, log_z);
        Solution {
            p: SimplexDistribution::from_normalized(p),
            w,
            z,
            report: SolveReport {
                iterations,
                final_residual: check.value,
                converged: check.passed,
                wall_time,
                objective_primal,
                objective_dual,
                trace: self.trace,
            },
        }
    }
}

pub(crate) fn check_init(problem: &Problem, v: &[f64], what: &'static str) -> Result<()> {
    check_dim(what, problem.phi().m(), v.len())?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(invalid(format!("{what} has non-finite entries")));
    }
    Ok(())
}

pub(crate) fn non_finite(iteration: usize, tau: f64, sigma: f64, max_logit: f64) -> Error {
    Error::NonFinite {
        iteration,
        tau,
        sigma,
        max_logit,
    }
}
