//! Slow reference implementations used to check the fast code paths.
//!
//! Nothing here shares code with the solvers beyond the data types. Each
//! oracle certifies its own output (a first-order residual, restart
//! agreement, or a convergence sweep) and returns [`Error::Oracle`] if it
//! cannot.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{check_dim, invalid, Error, Result};
use crate::matrix::FeatureMatrix;
use crate::penalty::{GroupPartition, PenaltyKind, PenaltySpec};
use crate::simplex::SimplexDistribution;
use crate::solvers::Problem;

/// Largest number of outcomes the optimization oracles accept.
pub const MAX_ORACLE_N: usize = 10;

const MIRROR_DESCENT_CAP: usize = 1_000_000;

fn lse(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn normalize_log(logp: &mut [f64]) {
    let z = lse(logp);
    for l in logp {
        *l -= z;
    }
}

fn spread(v: &[f64]) -> f64 {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)));
    hi - lo
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn require_small(n: usize) -> Result<()> {
    if n > MAX_ORACLE_N {
        return Err(invalid(format!("oracles accept at most {MAX_ORACLE_N} outcomes, got {n}")));
    }
    Ok(())
}

/// Minimizes `tau D_KL(p || prior) - tau <w_bar, E_p[phi]> + D_KL(p || p_k)`
/// over the simplex by entropic mirror descent with slowly decaying steps.
/// Certified when the gradient is constant across outcomes to `1e-11`.
pub fn kl_prox_oracle(
    p_k: &SimplexDistribution,
    prior: &SimplexDistribution,
    phi: &FeatureMatrix,
    tau: f64,
    w_bar: &[f64],
) -> Result<SimplexDistribution> {
    let n = phi.n();
    require_small(n)?;
    check_dim("prior length", n, prior.len())?;
    check_dim("previous iterate length", n, p_k.len())?;
    check_dim("dual vector length", phi.m(), w_bar.len())?;
    prior.require_interior("prior")?;
    p_k.require_interior("previous iterate")?;
    if !(tau > 0.0) {
        return Err(invalid("tau must be positive"));
    }
    let log_prior: Vec<f64> = prior.probs().iter().map(|p| p.ln()).collect();
    let log_pk: Vec<f64> = p_k.probs().iter().map(|p| p.ln()).collect();
    let lin: Vec<f64> = (0..n).map(|j| tau * dot(w_bar, phi.column(j))).collect();

    let mut logp = vec![-(n as f64).ln(); n];
    let mut grad = vec![0.0; n];
    let eta0 = 0.5 / (1.0 + tau);
    for k in 0..MIRROR_DESCENT_CAP {
        for j in 0..n {
            grad[j] = tau * (logp[j] - log_prior[j]) + (logp[j] - log_pk[j]) - lin[j];
        }
        if spread(&grad) <= 1e-11 {
            return SimplexDistribution::new(logp.iter().map(|l| l.exp()).collect());
        }
        let eta = eta0 / (1.0 + k as f64 * 1e-5);
        for j in 0..n {
            logp[j] -= eta * grad[j];
        }
        normalize_log(&mut logp);
    }
    Err(Error::Oracle(format!(
        "KL prox mirror descent did not certify within {MIRROR_DESCENT_CAP} iterations"
    )))
}

/// `prox_{g / rho}(x)` for the potential `g(s) = t H*(s / t)`.
fn potential_prox(penalty: &PenaltySpec, x: &[f64], rho: f64) -> Vec<f64> {
    let t = penalty.t;
    match &penalty.kind {
        PenaltyKind::ElasticNet { alpha } if *alpha < 1.0 && t > 0.0 => {
            let a = t * alpha;
            let c = 1.0 / (2.0 * t * (1.0 - alpha));
            x.iter()
                .map(|&v| {
                    if v.abs() <= a {
                        v
                    } else {
                        v.signum() * (a + (v.abs() - a) / (1.0 + 2.0 * c / rho))
                    }
                })
                .collect()
        }
        PenaltyKind::ElasticNet { .. } => x.iter().map(|v| v.clamp(-t, t)).collect(),
        PenaltyKind::GroupLasso { groups } => {
            let mut s = x.to_vec();
            for (g, members) in groups.groups().iter().enumerate() {
                let radius = t * (members.len() as f64).sqrt();
                let norm = groups.group_norm(g, x);
                if norm > radius {
                    for &i in members {
                        s[i] = x[i] * radius / norm;
                    }
                }
            }
            s
        }
        PenaltyKind::LInf => project_l1_ball_sorted(x, t),
    }
}

/// Finite stand-in for the potential: indicator constraints become an
/// exact penalty `big * violation`.
fn penalized_potential(penalty: &PenaltySpec, r: &[f64], big: f64) -> f64 {
    let t = penalty.t;
    match &penalty.kind {
        PenaltyKind::ElasticNet { alpha } if *alpha < 1.0 && t > 0.0 => {
            r.iter().map(|v| (v.abs() - t * alpha).max(0.0).powi(2)).sum::<f64>()
                / (2.0 * t * (1.0 - alpha))
        }
        PenaltyKind::ElasticNet { .. } => {
            big * r.iter().map(|v| (v.abs() - t).max(0.0)).sum::<f64>()
        }
        PenaltyKind::GroupLasso { groups } => {
            big * (0..groups.len())
                .map(|g| {
                    let radius = t * (groups.groups()[g].len() as f64).sqrt();
                    (groups.group_norm(g, r) - radius).max(0.0)
                })
                .sum::<f64>()
        }
        PenaltyKind::LInf => big * (r.iter().map(|v| v.abs()).sum::<f64>() - t).max(0.0),
    }
}

/// Result of [`brute_force_primal`].
#[derive(Debug, Clone)]
pub struct PrimalOracle {
    pub p: SimplexDistribution,
    /// `D_KL(p || prior)` plus the potential, with indicator constraints
    /// treated as satisfied (the returned `p` violates them by at most
    /// `infeasibility`).
    pub objective: f64,
    pub infeasibility: f64,
    /// Objective values reached from each restart.
    pub restarts: Vec<f64>,
}

const RESTARTS: usize = 3;

/// Minimizes the primal objective directly. The potential is handled by an
/// augmented Lagrangian on the constraint `s = emp_avg - A p`; each inner
/// problem (KL plus a Moreau envelope) is solved by entropic mirror
/// descent. Three random restarts must agree to `1e-6` in objective.
pub fn brute_force_primal(problem: &Problem) -> Result<PrimalOracle> {
    require_small(problem.phi().n())?;
    if problem.phi().m() > 5 {
        return Err(invalid("brute-force oracle accepts at most 5 features"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut runs = Vec::with_capacity(RESTARTS);
    for _ in 0..RESTARTS {
        runs.push(augmented_lagrangian(problem, &mut rng)?);
    }
    let objectives: Vec<f64> = runs.iter().map(|r| r.objective).collect();
    if spread(&objectives) > 1e-6 {
        return Err(Error::Oracle(format!("restarts disagree: objectives {objectives:?}")));
    }
    let best = runs
        .into_iter()
        .min_by(|a, b| a.objective.total_cmp(&b.objective))
        .expect("at least one restart");
    Ok(PrimalOracle {
        restarts: objectives,
        ..best
    })
}

fn augmented_lagrangian(problem: &Problem, rng: &mut ChaCha8Rng) -> Result<PrimalOracle> {
    let phi = problem.phi();
    let (m, n) = (phi.m(), phi.n());
    let penalty = problem.penalty();
    let emp = problem.emp_avg();
    let log_prior: Vec<f64> = problem.prior().probs().iter().map(|p| p.ln()).collect();
    let l = (0..n).map(|j| dot(phi.column(j), phi.column(j))).fold(0.0, f64::max).sqrt();
    let rho = 50.0 / (1.0 + l * l);
    let eta = 1.0 / (1.0 + rho * l * l);

    let mut logp: Vec<f64> = (0..n).map(|_| rng.random::<f64>().ln()).collect();
    normalize_log(&mut logp);
    let mut w: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut v = vec![0.0; m];
    let mut x = vec![0.0; m];
    let mut s = vec![0.0; m];
    let mut grad = vec![0.0; n];

    let mut certified = false;
    let mut inner_total = 0usize;
    for _outer in 0..2000 {
        // Inner: minimize KL(p || prior) + rho/2 |x(p) - prox(x(p))|^2 + g(prox(x(p))).
        let mut inner_ok = false;
        while inner_total < 20 * MIRROR_DESCENT_CAP {
            inner_total += 1;
            let p: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
            for i in 0..m {
                let avg: f64 = (0..n).map(|j| p[j] * phi.get(i, j)).sum();
                v[i] = emp[i] - avg;
                x[i] = v[i] + w[i] / rho;
            }
            s = potential_prox(penalty, &x, rho);
            // d/dp of the envelope term: -A^T rho (x - s).
            let y: Vec<f64> = x.iter().zip(&s).map(|(a, b)| rho * (a - b)).collect();
            for j in 0..n {
                grad[j] = logp[j] - log_prior[j] - dot(&y, phi.column(j));
            }
            if spread(&grad) <= 1e-12 * (1.0 + grad.iter().fold(0.0_f64, |a, g| a.max(g.abs()))) {
                inner_ok = true;
                break;
            }
            for j in 0..n {
                logp[j] -= eta * grad[j];
            }
            normalize_log(&mut logp);
        }
        if !inner_ok {
            return Err(Error::Oracle("augmented-Lagrangian inner loop did not certify".into()));
        }
        let gap = v.iter().zip(&s).fold(0.0_f64, |a, (vi, si)| a.max((vi - si).abs()));
        for i in 0..m {
            w[i] += rho * (v[i] - s[i]);
        }
        if gap <= 1e-12 {
            certified = true;
            break;
        }
    }
    if !certified {
        return Err(Error::Oracle("augmented-Lagrangian multiplier did not settle".into()));
    }
    let p = SimplexDistribution::new(logp.iter().map(|l| l.exp()).collect())?;
    let residual = problem.residual(&p)?;
    let kl: f64 = p
        .probs()
        .iter()
        .zip(&log_prior)
        .filter(|(q, _)| **q > 0.0)
        .map(|(q, lp)| q * (q.ln() - lp))
        .sum();
    let smooth = matches!(penalty.kind, PenaltyKind::ElasticNet { alpha } if alpha < 1.0 && penalty.t > 0.0);
    let excess = penalized_potential(penalty, &residual, 1.0);
    let (potential, infeasibility) = if smooth { (excess, 0.0) } else { (0.0, excess) };
    Ok(PrimalOracle {
        p,
        objective: kl + potential,
        infeasibility,
        restarts: Vec::new(),
    })
}

/// Golden-section search over `p = (s, 1 - s)` for two-outcome problems,
/// with indicator constraints enforced by an exact penalty.
pub fn golden_section_n2(problem: &Problem) -> Result<SimplexDistribution> {
    let phi = problem.phi();
    if phi.n() != 2 {
        return Err(invalid("golden-section oracle needs exactly two outcomes"));
    }
    let prior = problem.prior().probs();
    let emp = problem.emp_avg();
    let penalty = problem.penalty();
    let objective = |s: f64| -> f64 {
        let p = [s, 1.0 - s];
        let kl: f64 = p
            .iter()
            .zip(prior)
            .filter(|(a, _)| **a > 0.0)
            .map(|(a, b)| a * (a / b).ln())
            .sum();
        let r: Vec<f64> = (0..phi.m())
            .map(|i| emp[i] - s * phi.get(i, 0) - (1.0 - s) * phi.get(i, 1))
            .collect();
        kl + penalized_potential(penalty, &r, 1e6)
    };
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0_f64, 1.0_f64);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    for _ in 0..200 {
        if b - a <= 1e-15 {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = objective(d);
        }
    }
    let s = 0.5 * (a + b);
    SimplexDistribution::new(vec![s, 1.0 - s])
}

/// Singular values in descending order by one-sided Jacobi rotations.
/// Accepts matrices with `m n <= 10^4`.
pub fn dense_svd_oracle(phi: &FeatureMatrix) -> Result<Vec<f64>> {
    let (m, n) = (phi.m(), phi.n());
    if m * n > 10_000 {
        return Err(invalid(format!("dense SVD oracle accepts m n <= 1e4, got {}", m * n)));
    }
    // Orthogonalize the columns of B, where B has min(m, n) columns.
    let (rows, cols, mut b) = if m <= n {
        let mut bt = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                bt[i * n + j] = phi.get(i, j);
            }
        }
        (n, m, bt)
    } else {
        (m, n, phi.as_col_major().to_vec())
    };
    for sweep in 0.. {
        if sweep == 100 {
            return Err(Error::Oracle("Jacobi SVD did not converge in 100 sweeps".into()));
        }
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (bp, bq) = (&b[p * rows..(p + 1) * rows], &b[q * rows..(q + 1) * rows]);
                let alpha = dot(bp, bp);
                let beta = dot(bq, bq);
                let gamma = dot(bp, bq);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..rows {
                    let x = b[p * rows + k];
                    let y = b[q * rows + k];
                    b[p * rows + k] = c * x - s * y;
                    b[q * rows + k] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..cols)
        .map(|p| dot(&b[p * rows..(p + 1) * rows], &b[p * rows..(p + 1) * rows]).sqrt())
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Finds the root of a nondecreasing function on `[lo, hi]` by bisection,
/// down to adjacent floating-point numbers.
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Scalar prox of `a |x| + b x^2 / 2` at `y`, by bisection on the
/// subgradient `x - y + a sign(x) + b x`.
fn scalar_prox(y: f64, a: f64, b: f64) -> f64 {
    if y.abs() <= a {
        return 0.0;
    }
    let bound = y.abs() + a + 1.0;
    if y > 0.0 {
        bisect(0.0, bound, |x| x - y + a + b * x)
    } else {
        bisect(-bound, 0.0, |x| x - y - a + b * x)
    }
}

/// Soft thresholding by bisection.
pub fn shrink1_oracle(w_hat: &[f64], lambda: f64) -> Vec<f64> {
    w_hat.iter().map(|&y| scalar_prox(y, lambda, 0.0)).collect()
}

/// Elastic-net prox by bisection.
pub fn prox_elastic_net_oracle(w_hat: &[f64], lambda: f64, alpha: f64) -> Vec<f64> {
    w_hat
        .iter()
        .map(|&y| scalar_prox(y, lambda * alpha, lambda * (1.0 - alpha)))
        .collect()
}

/// Group-lasso prox: within each group the solution is `c w_hat_g` with
/// `c` in `[0, 1]`, found by bisection on the derivative in `c`.
pub fn prox_group_lasso_oracle(w_hat: &[f64], lambda: f64, groups: &GroupPartition) -> Vec<f64> {
    let mut out = vec![0.0; w_hat.len()];
    for (g, members) in groups.groups().iter().enumerate() {
        let norm = groups.group_norm(g, w_hat);
        let weight = lambda * (members.len() as f64).sqrt();
        // d/dc [weight c |y| + (1 - c)^2 |y|^2 / 2] = weight |y| - (1 - c) |y|^2
        let deriv = |c: f64| weight * norm - (1.0 - c) * norm * norm;
        let c = if norm == 0.0 || deriv(0.0) >= 0.0 { 0.0 } else { bisect(0.0, 1.0, deriv) };
        for &i in members {
            out[i] = c * w_hat[i];
        }
    }
    out
}

/// Euclidean projection onto the l1 ball by sorting magnitudes.
pub fn project_l1_ball_sorted(y: &[f64], radius: f64) -> Vec<f64> {
    let l1: f64 = y.iter().map(|v| v.abs()).sum();
    if l1 <= radius {
        return y.to_vec();
    }
    if radius <= 0.0 {
        return vec![0.0; y.len()];
    }
    let mut mags: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, u) in mags.iter().enumerate() {
        cum += u;
        let candidate = (cum - radius) / (k as f64 + 1.0);
        if *u > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    y.iter().map(|v| (v.abs() - theta).max(0.0).copysign(*v)).collect()
}

/// Prox of `lambda |x|_inf`: the solution clips every magnitude at a level
/// `s`, found by bisection on `lambda - sum_i (|w_hat_i| - s)_+`.
pub fn prox_linf_oracle(w_hat: &[f64], lambda: f64) -> Vec<f64> {
    let l1: f64 = w_hat.iter().map(|v| v.abs()).sum();
    if lambda >= l1 {
        return vec![0.0; w_hat.len()];
    }
    let top = w_hat.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let level = bisect(0.0, top, |s| {
        lambda - w_hat.iter().map(|v| (v.abs() - s).max(0.0)).sum::<f64>()
    });
    w_hat.iter().map(|v| v.abs().min(level).copysign(*v)).collect()
}

/// One line of the validation table.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationRow {
    pub check: String,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn row(check: &str, cases: usize, worst: f64, tolerance: f64) -> ValidationRow {
    ValidationRow {
        check: check.to_string(),
        cases,
        worst,
        tolerance,
        passed: worst <= tolerance,
    }
}

fn l1_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn linf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Random interior distribution on `n` outcomes.
pub fn random_interior(rng: &mut impl Rng, n: usize) -> SimplexDistribution {
    let w: Vec<f64> = (0..n).map(|_| 0.05 + rng.random::<f64>()).collect();
    SimplexDistribution::from_weights(&w).expect("positive weights")
}

/// Random `m x n` feature matrix with entries in `[0, 1]`.
pub fn random_features(rng: &mut impl Rng, m: usize, n: usize) -> FeatureMatrix {
    let values = (0..m * n).map(|_| rng.random::<f64>()).collect();
    FeatureMatrix::from_col_major(m, n, values).expect("finite values")
}

/// Runs the oracle-equivalence checks on seeded random inputs and returns
/// one row per check. Takes a few seconds.
pub fn validation_suite(seed: u64) -> Result<Vec<ValidationRow>> {
    use crate::kernels::kl_prox_step;
    use crate::prox;
    use crate::solvers::{npdhg_nonsmooth, SolverOptions, StopRule};

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();

    let mut worst = 0.0_f64;
    let cases = 40;
    for _ in 0..cases {
        let n = rng.random_range(2..=6);
        let m = rng.random_range(1..=4);
        let phi = random_features(&mut rng, m, n);
        let prior = random_interior(&mut rng, n);
        let p_k = random_interior(&mut rng, n);
        let tau = rng.random_range(0.1..10.0);
        let w: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let closed = kl_prox_step(&p_k, &prior, &phi, tau, &w)?;
        let numeric = kl_prox_oracle(&p_k, &prior, &phi, tau, &w)?;
        worst = worst.max(closed.l1_distance(&numeric));
    }
    rows.push(row("KL proximal step vs mirror descent (l1)", cases, worst, 1e-6));

    let cases = 200;
    let (mut w_shrink, mut w_en, mut w_gl, mut w_proj, mut w_linf) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let mut scratch = prox::ProxScratch::default();
    for _ in 0..cases {
        let len = rng.random_range(1..=8);
        let y: Vec<f64> = (0..len).map(|_| rng.random_range(-3.0..3.0)).collect();
        let lambda = rng.random_range(0.0..2.0);
        let alpha = rng.random_range(0.05..=1.0);
        w_shrink = w_shrink.max(linf_dist(&prox::shrink1(&y, lambda)?, &shrink1_oracle(&y, lambda)));
        w_en = w_en.max(linf_dist(
            &prox::prox_elastic_net(&y, lambda, alpha)?,
            &prox_elastic_net_oracle(&y, lambda, alpha),
        ));
        let split = rng.random_range(1..=len);
        let groups = if split == len {
            GroupPartition::contiguous(&[len])?
        } else {
            GroupPartition::contiguous(&[split, len - split])?
        };
        w_gl = w_gl.max(linf_dist(
            &prox::prox_group_lasso(&y, lambda, &groups)?,
            &prox_group_lasso_oracle(&y, lambda, &groups),
        ));
        let mut proj = y.clone();
        prox::project_l1_ball_in_place(&mut proj, lambda, &mut scratch);
        w_proj = w_proj.max(linf_dist(&proj, &project_l1_ball_sorted(&y, lambda)));
        w_linf = w_linf.max(linf_dist(&prox::prox_linf(&y, lambda)?, &prox_linf_oracle(&y, lambda)));
    }
    rows.push(row("soft thresholding vs bisection", cases, w_shrink, 1e-9));
    rows.push(row("elastic-net prox vs bisection", cases, w_en, 1e-9));
    rows.push(row("group-lasso prox vs bisection", cases, w_gl, 1e-9));
    rows.push(row("l1-ball projection vs sorting", cases, w_proj, 1e-9));
    rows.push(row("l-infinity prox vs bisection", cases, w_linf, 1e-9));

    let cases = 10;
    let mut worst = 0.0_f64;
    for _ in 0..cases {
        let m = rng.random_range(1..=6);
        let n = rng.random_range(2..=12);
        let phi = random_features(&mut rng, m, n);
        let sv = dense_svd_oracle(&phi)?;
        let power = phi.largest_singular_value(1e-12).unwrap_or(f64::NAN);
        worst = worst.max((power - sv[0]).abs() / sv[0]);
        worst = worst.max((phi.operator_norm_1to2() - sv[0]).max(0.0));
    }
    rows.push(row("power iteration vs Jacobi SVD (relative)", cases, worst, 1e-6));

    let opts = SolverOptions {
        tol: 1e-9,
        stop_rule: StopRule::Kkt,
        max_iters: 2_000_000,
        ..SolverOptions::default()
    };
    let kinds = |m: usize| {
        vec![
            PenaltyKind::ElasticNet { alpha: 0.5 },
            PenaltyKind::ElasticNet { alpha: 1.0 },
            PenaltyKind::GroupLasso {
                groups: GroupPartition::contiguous(&if m > 1 { vec![1, m - 1] } else { vec![1] })
                    .expect("valid sizes"),
            },
            PenaltyKind::LInf,
        ]
    };
    let cases = 3;
    let mut worst = 0.0_f64;
    let mut count = 0;
    for _ in 0..cases {
        let m = rng.random_range(1..=3);
        let n = rng.random_range(2..=6);
        let phi = random_features(&mut rng, m, n);
        let prior = random_interior(&mut rng, n);
        let emp = random_interior(&mut rng, n);
        for kind in kinds(m) {
            let base = Problem::from_empirical(phi.clone(), prior.clone(), &emp, PenaltySpec::new(kind, 1.0)?)?;
            let t = 0.3 * crate::path::t_max(&base)?;
            if t == 0.0 {
                continue;
            }
            let problem = base.with_t(t);
            let oracle = brute_force_primal(&problem)?;
            let sol = npdhg_nonsmooth(&problem, &vec![0.0; m], &vec![0.0; m], &opts)?;
            worst = worst.max((sol.report.objective_primal - oracle.objective).abs());
            count += 1;
        }
    }
    rows.push(row("primal-dual solver vs brute-force primal (objective)", count, worst, 1e-6));

    let cases = 10;
    let mut worst = 0.0_f64;
    for _ in 0..cases {
        let m = rng.random_range(1..=3);
        let phi = random_features(&mut rng, m, 2);
        let prior = random_interior(&mut rng, 2);
        let emp = random_interior(&mut rng, 2);
        let base = Problem::from_empirical(phi, prior, &emp, PenaltySpec::new(PenaltyKind::ElasticNet { alpha: 0.5 }, 1.0)?)?;
        let t = 0.3 * crate::path::t_max(&base)?;
        if t == 0.0 {
            continue;
        }
        let problem = base.with_t(t);
        let golden = golden_section_n2(&problem)?;
        let brute = brute_force_primal(&problem)?;
        worst = worst.max(l1_dist(golden.probs(), brute.p.probs()));
    }
    rows.push(row("golden section vs brute-force primal, n = 2 (l1)", cases, worst, 1e-7));

    Ok(rows)
}
