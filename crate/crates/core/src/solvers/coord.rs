//! Cyclic coordinate descent on the elastic-net dual.
//!
//! Each coordinate step minimizes a quadratic upper bound of the log
//! partition function along that coordinate. Since feature `i` takes values
//! in `[a_i, b_i]`, Hoeffding's lemma gives
//! `log E_p exp(d phi_i) <= d E_p[phi_i] + d^2 (b_i - a_i)^2 / 8`, so the step
//! solves a one-dimensional elastic-net problem in closed form.

use crate::error::{Error, Result};
use crate::kernels::Gibbs;
use crate::penalty::PenaltyKind;

use super::{check_init, non_finite, residual_into, Monitor, Problem, SolverOptions, Solution};

/// Smallest curvature used for a feature that is constant over outcomes.
const MIN_CURVATURE: f64 = 1e-12;

/// Coordinate descent from `w0`. One iteration is a full sweep over the
/// features followed by an exact recomputation of the model distribution.
pub fn structmaxent2_solve(problem: &Problem, w0: &[f64], opts: &SolverOptions) -> Result<Solution> {
    let alpha = match problem.penalty().kind {
        PenaltyKind::ElasticNet { alpha } => alpha,
        ref other => {
            return Err(Error::UnsupportedPenalty {
                solver: "structmaxent2",
                penalty: other.name(),
            })
        }
    };
    check_init(problem, w0, "initial dual vector")?;
    let mut monitor = Monitor::new(problem, opts)?;
    let t = problem.t();
    let l1 = t * alpha;
    let l2 = t * (1.0 - alpha);
    let phi = problem.phi();
    let (m, n) = (phi.m(), phi.n());
    let curvature: Vec<f64> = phi
        .feature_ranges()
        .iter()
        .map(|(lo, hi)| ((hi - lo) * (hi - lo) / 4.0).max(MIN_CURVATURE))
        .collect();
    // Row-major copy so that a coordinate update touches contiguous memory.
    let rows = phi.to_row_major();
    let emp = problem.emp_avg();

    let mut w = w0.to_vec();
    let mut gibbs = Gibbs::new(problem.prior());
    let mut avg = vec![0.0; m];
    let mut residual = vec![0.0; m];
    gibbs.evaluate(phi, &w);
    residual_into(problem, &gibbs.probs, &mut avg, &mut residual);
    monitor.record(0, &gibbs.probs, &residual, &w);
    let mut check = monitor.test(&residual, &w);
    let mut iterations = 0;

    for k in 1..=opts.max_iters {
        for i in 0..m {
            let row = &rows[i * n..(i + 1) * n];
            let mean: f64 = row.iter().zip(&gibbs.probs).map(|(f, p)| f * p).sum();
            let grad = mean - emp[i];
            let c = curvature[i];
            let u = c * w[i] - grad;
            let shrunk = if u > l1 {
                u - l1
            } else if u < -l1 {
                u + l1
            } else {
                0.0
            };
            let updated = shrunk / (c + l2);
            let delta = updated - w[i];
            if delta != 0.0 {
                w[i] = updated;
                for (l, f) in gibbs.logits.iter_mut().zip(row) {
                    *l += delta * f;
                }
                let log_z = gibbs.normalize_logits();
                if !log_z.is_finite() {
                    return Err(non_finite(k, c, l2, gibbs.max_logit()));
                }
            }
        }
        // Refresh from scratch to keep rounding drift out of the logits.
        let log_z = gibbs.evaluate(phi, &w);
        if !log_z.is_finite() {
            return Err(non_finite(k, 0.0, l2, gibbs.max_logit()));
        }
        residual_into(problem, &gibbs.probs, &mut avg, &mut residual);
        monitor.record(k, &gibbs.probs, &residual, &w);
        iterations = k;
        if opts.should_check(k) {
            check = monitor.test(&residual, &w);
            if check.passed {
                break;
            }
        }
    }
    let z = w.clone();
    Ok(monitor.finish(iterations, check, gibbs.probs, &residual, w, z))
}
