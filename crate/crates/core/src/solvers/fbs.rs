//! Accelerated forward-backward splitting on the dual.
//!
//! Minimizes `F(w) + t H(w)` with the smooth part
//! `F(w) = log sum_j prior(j) exp(<w, phi(j)>) - <w, emp_avg>`, whose gradient
//! is `E_{gibbs(w)}[phi] - emp_avg` and is Lipschitz with constant at most
//! `|A|_2^2`. Momentum follows the FISTA variant that exploits strong
//! convexity of `t H` when it is available (elastic net with `alpha < 1`).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernels::Gibbs;
use crate::penalty::PenaltyKind;
use crate::prox::{prox_penalty_in_place, ProxScratch};

use super::{check_init, non_finite, residual_into, Monitor, Problem, SolverOptions, Solution};

/// Gradient stepsize convention.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum FbsStep {
    /// `1 / |A|_2^2`, the reciprocal of the gradient's Lipschitz bound.
    #[default]
    InverseSquaredNorm,
    /// `1 / |A|_2`.
    InverseNorm,
    Fixed(f64),
}

impl FbsStep {
    pub fn stepsize(self, spectral_norm: f64) -> Result<f64> {
        let step = match self {
            Self::InverseSquaredNorm => 1.0 / (spectral_norm * spectral_norm),
            Self::InverseNorm => 1.0 / spectral_norm,
            Self::Fixed(s) => s,
        };
        if !(step > 0.0) || !step.is_finite() {
            return Err(invalid(format!("FBS stepsize must be positive and finite, got {step}")));
        }
        Ok(step)
    }
}

/// Runs accelerated forward-backward splitting from `w0`. Each iteration
/// evaluates one Gibbs distribution at the extrapolated point, plus one at
/// the new iterate whenever the stopping test is due.
pub fn fbs_solve(problem: &Problem, w0: &[f64], opts: &SolverOptions) -> Result<Solution> {
    check_init(problem, w0, "initial dual vector")?;
    let mut monitor = Monitor::new(problem, opts)?;
    let step = opts.fbs_step.stepsize(problem.spectral_norm())?;
    let penalty = problem.penalty();
    let mu = match penalty.kind {
        PenaltyKind::ElasticNet { alpha } => penalty.t * (1.0 - alpha),
        _ => 0.0,
    };
    let q = step * mu / (1.0 + step * mu);

    let m = problem.phi().m();
    let mut x = w0.to_vec();
    let mut x_prev = w0.to_vec();
    let mut y = vec![0.0; m];
    let mut avg = vec![0.0; m];
    let mut residual = vec![0.0; m];
    let mut grad_gibbs = Gibbs::new(problem.prior());
    let mut gibbs = Gibbs::new(problem.prior());
    let mut scratch = ProxScratch::default();
    let mut tk = 1.0_f64;
    let mut beta = 0.0_f64;

    gibbs.evaluate(problem.phi(), &x);
    residual_into(problem, &gibbs.probs, &mut avg, &mut residual);
    monitor.record(0, &gibbs.probs, &residual, &x);
    let mut check = monitor.test(&residual, &x);
    let mut iterations = 0;

    for k in 1..=opts.max_iters {
        for ((yi, xi), xp) in y.iter_mut().zip(&x).zip(&x_prev) {
            *yi = xi + beta * (xi - xp);
        }
        let log_z = grad_gibbs.evaluate(problem.phi(), &y);
        if !log_z.is_finite() {
            return Err(non_finite(k, step, tk, grad_gibbs.max_logit()));
        }
        // Gradient step on -F: y + step * (emp_avg - E_y[phi]).
        residual_into(problem, &grad_gibbs.probs, &mut avg, &mut residual);
        std::mem::swap(&mut x, &mut x_prev);
        for ((xi, yi), r) in x.iter_mut().zip(&y).zip(&residual) {
            *xi = yi + step * r;
        }
        prox_penalty_in_place(&penalty.kind, &mut x, penalty.t * step, &mut scratch);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(non_finite(k, step, tk, grad_gibbs.max_logit()));
        }

        let a = 1.0 - q * tk * tk;
        let t_next = 0.5 * (a + (a * a + 4.0 * tk * tk).sqrt());
        beta = (tk - 1.0) / t_next * (1.0 + step * mu - t_next * step * mu);
        tk = t_next;
        iterations = k;

        let due = opts.should_check(k);
        if due || opts.trace {
            gibbs.evaluate(problem.phi(), &x);
            residual_into(problem, &gibbs.probs, &mut avg, &mut residual);
            monitor.record(k, &gibbs.probs, &residual, &x);
        }
        if due {
            check = monitor.test(&residual, &x);
            if check.passed {
                break;
            }
        }
    }
    if iterations == 0 || !opts.should_check(iterations) && !opts.trace {
        gibbs.evaluate(problem.phi(), &x);
        residual_into(problem, &gibbs.probs, &mut avg, &mut residual);
    }
    let z = x.clone();
    Ok(monitor.finish(iterations, check, gibbs.probs, &residual, x, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::FeatureMatrix;
    use crate::penalty::{GroupPartition, PenaltySpec};
    use crate::simplex::SimplexDistribution;
    use crate::solvers::npdhg_nonsmooth;

    fn toy(kind: PenaltyKind, t: f64) -> Problem {
        let phi = FeatureMatrix::from_rows(&[
            vec![0.0, 1.0, 0.5, 0.2, 0.9],
            vec![1.0, 0.3, 0.0, 0.6, 0.4],
            vec![0.2, 0.2, 0.8, 0.1, 0.5],
        ])
        .unwrap();
        let prior = SimplexDistribution::uniform(5).unwrap();
        let emp = SimplexDistribution::new(vec![0.1, 0.4, 0.3, 0.1, 0.1]).unwrap();
        Problem::from_empirical(phi, prior, &emp, PenaltySpec::new(kind, t).unwrap()).unwrap()
    }

    #[test]
    fn stepsize_rules() {
        assert_eq!(FbsStep::InverseSquaredNorm.stepsize(2.0).unwrap(), 0.25);
        assert_eq!(FbsStep::InverseNorm.stepsize(2.0).unwrap(), 0.5);
        assert!(FbsStep::Fixed(-1.0).stepsize(2.0).is_err());
        assert!(FbsStep::InverseNorm.stepsize(0.0).is_err());
    }

    #[test]
    fn agrees_with_primal_dual_solver() {
        let opts = SolverOptions {
            tol: 1e-8,
            stop_rule: crate::solvers::StopRule::Kkt,
            ..SolverOptions::default()
        };
        for kind in [
            PenaltyKind::ElasticNet { alpha: 0.4 },
            PenaltyKind::ElasticNet { alpha: 1.0 },
            PenaltyKind::GroupLasso {
                groups: GroupPartition::contiguous(&[2, 1]).unwrap(),
            },
            PenaltyKind::LInf,
        ] {
            let problem = toy(kind, 0.03);
            let a = fbs_solve(&problem, &[0.0; 3], &opts).unwrap();
            let b = npdhg_nonsmooth(&problem, &[0.0; 3], &[0.0; 3], &opts).unwrap();
            assert!(a.report.converged && b.report.converged);
            assert!(a.p.l1_distance(&b.p) < 1e-5, "{:?}", problem.penalty());
        }
    }
}
