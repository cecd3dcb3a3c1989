//! Primal-dual iteration with a KL proximal step on the primal side.
//!
//! The primal iterate is kept in its natural parameterization `z`, with
//! `p = gibbs(prior, z)`. A KL proximal step from `p_k` against the linear
//! term `A^T w` is then just the averaging
//! `z <- (z + tau * w_bar) / (1 + tau)`.

use crate::error::{invalid, Error, Result};
use crate::kernels::Gibbs;
use crate::penalty::PenaltyKind;
use crate::prox::{prox_penalty_in_place, ProxScratch};

use super::{check_init, non_finite, residual_into, Monitor, Problem, SolverOptions, Solution};

/// Stepsize policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    /// Start from `theta = 0, tau = 2, sigma = 1 / (2 L^2)` and update
    /// `theta' = 1/sqrt(1 + tau), tau' = theta' tau, sigma' = sigma / theta'`.
    Accelerated,
    /// Fixed parameters.
    Constant { theta: f64, tau: f64, sigma: f64 },
}

/// Iterates of the primal-dual scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// Primal parameter, `p = gibbs(prior, z)`.
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    pub w_prev: Vec<f64>,
    pub theta: f64,
    pub tau: f64,
    pub sigma: f64,
    pub iteration: usize,
}

/// `(theta, tau, sigma)` for the constant-stepsize scheme with dual strong
/// convexity `gamma = 1 - alpha`, operator norm `op_norm` and
/// hyperparameter `t > 0`.
pub fn smooth_stepsizes(gamma: f64, op_norm: f64, t: f64) -> (f64, f64, f64) {
    let x = gamma * op_norm * op_norm / t;
    // theta = 1 - (sqrt(1 + 4x) - 1) / (2x), rewritten to avoid cancellation.
    let s = (1.0 + 4.0 * x).sqrt();
    let theta = (s - 1.0) / (s + 1.0);
    let tau = 2.0 / (s - 1.0);
    let sigma = gamma * tau / t;
    (theta, tau, sigma)
}

/// Step-by-step driver, exposed for inspection and testing.
pub struct NpdhgIteration<'a> {
    problem: &'a Problem,
    schedule: Schedule,
    state: SolverState,
    gibbs: Gibbs,
    scratch: ProxScratch,
    avg: Vec<f64>,
    residual: Vec<f64>,
}

impl<'a> NpdhgIteration<'a> {
    /// Starts at `(z0, w0)` with `w_{-1} = w0`.
    pub fn new(problem: &'a Problem, schedule: Schedule, z0: &[f64], w0: &[f64]) -> Result<Self> {
        check_init(problem, z0, "initial primal parameter")?;
        check_init(problem, w0, "initial dual vector")?;
        let (theta, tau, sigma) = match schedule {
            Schedule::Accelerated => {
                let l = problem.op_norm();
                if l == 0.0 {
                    return Err(invalid("feature matrix is identically zero"));
                }
                (0.0, 2.0, 1.0 / (2.0 * l * l))
            }
            Schedule::Constant { theta, tau, sigma } => (theta, tau, sigma),
        };
        let m = problem.phi().m();
        let mut it = Self {
            problem,
            schedule,
            state: SolverState {
                z: z0.to_vec(),
                w: w0.to_vec(),
                w_prev: w0.to_vec(),
                theta,
                tau,
                sigma,
                iteration: 0,
            },
            gibbs: Gibbs::new(problem.prior()),
            scratch: ProxScratch::default(),
            avg: vec![0.0; m],
            residual: vec![0.0; m],
        };
        it.gibbs.evaluate(problem.phi(), z0);
        residual_into(problem, &it.gibbs.probs, &mut it.avg, &mut it.residual);
        Ok(it)
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    /// Current primal distribution `gibbs(prior, z)`.
    pub fn p(&self) -> &[f64] {
        &self.gibbs.probs
    }

    /// `emp_avg - A p` for the current `p`.
    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn into_state(self) -> SolverState {
        self.state
    }

    /// One iteration: primal KL step, dual prox step, stepsize update.
    pub fn step(&mut self) -> Result<()> {
        let st = &mut self.state;
        let (theta, tau, sigma) = (st.theta, st.tau, st.sigma);
        for ((z, w), wp) in st.z.iter_mut().zip(&st.w).zip(&st.w_prev) {
            let w_bar = w + theta * (w - wp);
            *z = (*z + tau * w_bar) / (1.0 + tau);
        }
        let log_z = self.gibbs.evaluate(self.problem.phi(), &st.z);
        st.iteration += 1;
        if !log_z.is_finite() {
            return Err(non_finite(st.iteration, tau, sigma, self.gibbs.max_logit()));
        }
        residual_into(self.problem, &self.gibbs.probs, &mut self.avg, &mut self.residual);

        std::mem::swap(&mut st.w, &mut st.w_prev);
        for ((w, wp), r) in st.w.iter_mut().zip(&st.w_prev).zip(&self.residual) {
            *w = wp + sigma * r;
        }
        let penalty = self.problem.penalty();
        prox_penalty_in_place(&penalty.kind, &mut st.w, penalty.t * sigma, &mut self.scratch);
        if st.w.iter().any(|v| !v.is_finite()) {
            return Err(non_finite(st.iteration, tau, sigma, self.gibbs.max_logit()));
        }

        if self.schedule == Schedule::Accelerated {
            let theta = 1.0 / (1.0 + tau).sqrt();
            st.theta = theta;
            st.tau = theta * tau;
            st.sigma = sigma / theta;
        }
        Ok(())
    }
}

fn run(problem: &Problem, schedule: Schedule, z0: &[f64], w0: &[f64], opts: &SolverOptions) -> Result<Solution> {
    let mut monitor = Monitor::new(problem, opts)?;
    let mut it = NpdhgIteration::new(problem, schedule, z0, w0)?;
    monitor.record(0, it.p(), it.residual(), &it.state.w);
    let mut check = monitor.test(it.residual(), &it.state.w);
    for k in 1..=opts.max_iters {
        it.step()?;
        monitor.record(k, it.p(), it.residual(), &it.state.w);
        if opts.should_check(k) {
            check = monitor.test(it.residual(), &it.state.w);
            if check.passed {
                break;
            }
        }
    }
    let iterations = it.state.iteration;
    let p = it.gibbs.probs;
    let residual = it.residual;
    let SolverState { z, w, .. } = it.state;
    Ok(monitor.finish(iterations, check, p, &residual, w, z))
}

/// Accelerated primal-dual solver for any penalty. Converges at a sublinear
/// rate; starts from `(z0, w0)` (zeros for a cold start).
pub fn npdhg_nonsmooth(problem: &Problem, z0: &[f64], w0: &[f64], opts: &SolverOptions) -> Result<Solution> {
    run(problem, Schedule::Accelerated, z0, w0, opts)
}

/// Constant-stepsize primal-dual solver for elastic nets with `alpha < 1`
/// and `t > 0`, where the dual regularizer is strongly convex.
pub fn npdhg_smooth(problem: &Problem, z0: &[f64], w0: &[f64], opts: &SolverOptions) -> Result<Solution> {
    let alpha = match problem.penalty().kind {
        PenaltyKind::ElasticNet { alpha } if alpha < 1.0 => alpha,
        ref other => {
            return Err(Error::UnsupportedPenalty {
                solver: "npdhg_smooth",
                penalty: if matches!(other, PenaltyKind::ElasticNet { .. }) {
                    "elastic_net with alpha = 1"
                } else {
                    other.name()
                },
            })
        }
    };
    let t = problem.t();
    if !(t > 0.0) {
        return Err(invalid("the smooth scheme needs t > 0"));
    }
    let l = problem.op_norm();
    if l == 0.0 {
        return Err(invalid("feature matrix is identically zero"));
    }
    let (theta, tau, sigma) = smooth_stepsizes(1.0 - alpha, l, t);
    run(problem, Schedule::Constant { theta, tau, sigma }, z0, w0, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::FeatureMatrix;
    use crate::penalty::{PenaltyKind, PenaltySpec};
    use crate::simplex::SimplexDistribution;

    fn toy(kind: PenaltyKind, t: f64) -> Problem {
        let phi = FeatureMatrix::from_rows(&[vec![0.0, 1.0, 0.5, 0.2], vec![1.0, 0.3, 0.0, 0.6]]).unwrap();
        let prior = SimplexDistribution::uniform(4).unwrap();
        let emp = SimplexDistribution::new(vec![0.1, 0.5, 0.3, 0.1]).unwrap();
        Problem::from_empirical(phi, prior, &emp, PenaltySpec::new(kind, t).unwrap()).unwrap()
    }

    #[test]
    fn smooth_stepsize_example() {
        let (theta, tau, sigma) = smooth_stepsizes(1.0, 1.0, 4.0 / 3.0);
        assert!((theta - 1.0 / 3.0).abs() < 1e-14);
        assert!((tau - 2.0).abs() < 1e-14);
        assert!((sigma - 1.5).abs() < 1e-14);
    }

    #[test]
    fn accelerated_schedule_preserves_product() {
        let problem = toy(PenaltyKind::LInf, 0.05);
        let z0 = vec![0.0; 2];
        let mut it = NpdhgIteration::new(&problem, Schedule::Accelerated, &z0, &z0).unwrap();
        let product = it.state().tau * it.state().sigma;
        for _ in 0..50 {
            let before = it.state().tau;
            it.step().unwrap();
            let s = it.state();
            assert!((s.tau * s.sigma - product).abs() <= 1e-12 * product);
            assert!((s.theta - 1.0 / (1.0 + before).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn first_step_at_zero_keeps_prior() {
        // theta_0 = 0 and w_0 = 0 leave z at zero.
        let problem = toy(PenaltyKind::ElasticNet { alpha: 1.0 }, 0.1);
        let zero = vec![0.0; 2];
        let mut it = NpdhgIteration::new(&problem, Schedule::Accelerated, &zero, &zero).unwrap();
        it.step().unwrap();
        assert_eq!(it.state().z, zero);
        assert_eq!(it.p(), problem.prior().probs());
    }

    #[test]
    fn converges_on_toy_problems() {
        let opts = SolverOptions::default();
        for kind in [
            PenaltyKind::ElasticNet { alpha: 0.5 },
            PenaltyKind::ElasticNet { alpha: 1.0 },
            PenaltyKind::LInf,
        ] {
            let problem = toy(kind, 0.05);
            let sol = npdhg_nonsmooth(&problem, &[0.0; 2], &[0.0; 2], &opts).unwrap();
            assert!(sol.report.converged, "{:?}", problem.penalty());
            let gap = sol.report.objective_primal - sol.report.objective_dual;
            assert!(gap > -1e-9 && gap < 1e-3, "gap {gap}");
        }
    }

    #[test]
    fn smooth_rejects_lasso_and_other_families() {
        let opts = SolverOptions::default();
        for kind in [PenaltyKind::ElasticNet { alpha: 1.0 }, PenaltyKind::LInf] {
            let problem = toy(kind, 0.05);
            assert!(matches!(
                npdhg_smooth(&problem, &[0.0; 2], &[0.0; 2], &opts),
                Err(Error::UnsupportedPenalty { .. })
            ));
        }
        let problem = toy(PenaltyKind::ElasticNet { alpha: 0.5 }, 0.0);
        assert!(npdhg_smooth(&problem, &[0.0; 2], &[0.0; 2], &opts).is_err());
    }

    #[test]
    fn overflowing_start_is_reported() {
        let phi = FeatureMatrix::from_rows(&[vec![3.0, 0.0], vec![3.0, 1.0]]).unwrap();
        let prior = SimplexDistribution::uniform(2).unwrap();
        let spec = PenaltySpec::new(PenaltyKind::LInf, 0.05).unwrap();
        let problem = Problem::new(phi, prior, vec![1.0, 1.0], spec).unwrap();
        let huge = vec![f64::MAX, f64::MAX];
        let err = npdhg_nonsmooth(&problem, &huge, &[0.0; 2], &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }), "{err}");
    }
}
