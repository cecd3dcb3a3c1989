//! Entropy and Gibbs-distribution primitives.
//!
//! Every exponential is taken after subtracting the largest logit, so the
//! Gibbs weights `prior(j) * exp(<z, phi(j)>)` never overflow regardless of
//! the size of `z`.

use crate::error::{check_dim, Error, Result};
use crate::matrix::FeatureMatrix;
use crate::penalty::{PenaltyKind, PenaltySpec};
use crate::simplex::SimplexDistribution;

/// Slack allowed when deciding whether an indicator-type potential is
/// finite.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// `log(sum_j exp(x_j))`, stabilized by the maximum. Returns `-inf` for an
/// empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `D_KL(p || q) = sum_j p(j) log(p(j) / q(j))` with `0 log 0 = 0`.
pub fn kl_divergence(p: &SimplexDistribution, q: &SimplexDistribution) -> Result<f64> {
    check_dim("distribution length", q.len(), p.len())?;
    q.require_interior("reference distribution of the KL divergence")?;
    Ok(kl_unchecked(p.probs(), q.probs()))
}

pub(crate) fn kl_unchecked(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum::<f64>()
        .max(0.0)
}

/// Log-domain description of a Gibbs distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsCache {
    /// `<z, phi(j)> + log prior(j)` for each outcome.
    pub logits: Vec<f64>,
    /// `log sum_j exp(logits[j])`.
    pub log_partition: f64,
}

impl GibbsCache {
    pub fn log_prob(&self, j: usize) -> f64 {
        self.logits[j] - self.log_partition
    }
}

/// The distribution `p(j) ∝ prior(j) exp(<z, phi(j)>)`.
pub fn gibbs_distribution(
    prior: &SimplexDistribution,
    z: &[f64],
    phi: &FeatureMatrix,
) -> Result<(SimplexDistribution, GibbsCache)> {
    check_dim("prior length", phi.n(), prior.len())?;
    check_dim("dual vector length", phi.m(), z.len())?;
    prior.require_interior("prior")?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("dual vector has non-finite entries".into()));
    }
    let mut gibbs = Gibbs::new(prior);
    gibbs.evaluate(phi, z);
    let cache = GibbsCache {
        logits: gibbs.logits.clone(),
        log_partition: gibbs.log_partition,
    };
    Ok((SimplexDistribution::from_normalized(gibbs.probs), cache))
}

/// Reusable buffers for repeated Gibbs evaluations against one prior.
#[derive(Debug, Clone)]
pub(crate) struct Gibbs {
    log_prior: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub log_partition: f64,
}

impl Gibbs {
    pub fn new(prior: &SimplexDistribution) -> Self {
        let n = prior.len();
        Self {
            log_prior: prior.probs().iter().map(|p| p.ln()).collect(),
            logits: vec![0.0; n],
            probs: vec![0.0; n],
            log_partition: 0.0,
        }
    }

    /// Recomputes `probs` for the dual vector `z`; returns the log partition
    /// function, which is non-finite only if `z` is.
    pub fn evaluate(&mut self, phi: &FeatureMatrix, z: &[f64]) -> f64 {
        phi.column_dots_into(z, &mut self.logits);
        for (l, lp) in self.logits.iter_mut().zip(&self.log_prior) {
            *l += lp;
        }
        self.normalize_logits()
    }

    /// Normalizes whatever is currently in `logits`.
    pub fn normalize_logits(&mut self) -> f64 {
        let max = self.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (p, l) in self.probs.iter_mut().zip(&self.logits) {
            *p = (l - max).exp();
            total += *p;
        }
        for p in &mut self.probs {
            *p /= total;
        }
        self.log_partition = max + total.ln();
        self.log_partition
    }

    pub fn max_logit(&self) -> f64 {
        self.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The KL proximal step
///
/// ```text
/// argmin_p  tau D_KL(p || prior) - tau <w_bar, E_p[phi]> + D_KL(p || p_k),
/// ```
///
/// in closed form: `p(j) ∝ (prior(j)^tau p_k(j) exp(tau <w_bar, phi(j)>))^(1/(1+tau))`.
/// `p_k` and `prior` must be interior.
pub fn kl_prox_step(
    p_k: &SimplexDistribution,
    prior: &SimplexDistribution,
    phi: &FeatureMatrix,
    tau: f64,
    w_bar: &[f64],
) -> Result<SimplexDistribution> {
    check_dim("prior length", phi.n(), prior.len())?;
    check_dim("previous iterate length", phi.n(), p_k.len())?;
    check_dim("dual vector length", phi.m(), w_bar.len())?;
    prior.require_interior("prior")?;
    p_k.require_interior("previous iterate")?;
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("step tau must be positive and finite, got {tau}")));
    }
    let dots = phi.column_dots(w_bar)?;
    let logits: Vec<f64> = dots
        .iter()
        .zip(prior.probs().iter().zip(p_k.probs()))
        .map(|(d, (q, p))| (tau * q.ln() + p.ln() + tau * d) / (1.0 + tau))
        .collect();
    let lse = log_sum_exp(&logits);
    Ok(SimplexDistribution::from_normalized(
        logits.iter().map(|l| (l - lse).exp()).collect(),
    ))
}

/// `t * H*(residual / t)` for the penalty's potential `H*`. Returns
/// `f64::INFINITY` when an indicator-type potential is violated by more
/// than [`FEASIBILITY_TOL`].
pub fn scaled_potential(penalty: &PenaltySpec, residual: &[f64]) -> f64 {
    scaled_potential_with_slack(penalty, residual, 0.0)
}

/// Like [`scaled_potential`], with indicator constraints relaxed by the
/// relative amount `slack`.
pub(crate) fn scaled_potential_with_slack(penalty: &PenaltySpec, residual: &[f64], slack: f64) -> f64 {
    potential_with_tolerance(penalty, residual, slack, FEASIBILITY_TOL)
}

/// Indicator constraints checked without any tolerance, so the value is a
/// true upper bound and weak duality holds exactly.
pub(crate) fn scaled_potential_strict(penalty: &PenaltySpec, residual: &[f64]) -> f64 {
    potential_with_tolerance(penalty, residual, 0.0, 0.0)
}

fn potential_with_tolerance(penalty: &PenaltySpec, residual: &[f64], slack: f64, abs_tol: f64) -> f64 {
    let t = penalty.t;
    let feasible = |value: f64, bound: f64| {
        if value <= bound * (1.0 + slack) + abs_tol {
            0.0
        } else {
            f64::INFINITY
        }
    };
    match &penalty.kind {
        PenaltyKind::ElasticNet { alpha } if *alpha < 1.0 && t > 0.0 => {
            let excess: f64 = residual
                .iter()
                .map(|r| (r.abs() - t * alpha).max(0.0).powi(2))
                .sum();
            excess / (2.0 * t * (1.0 - alpha))
        }
        PenaltyKind::ElasticNet { .. } => {
            let linf = residual.iter().fold(0.0_f64, |a, r| a.max(r.abs()));
            feasible(linf, t)
        }
        PenaltyKind::GroupLasso { groups } => {
            let ok = (0..groups.len()).all(|g| {
                let bound = t * (groups.groups()[g].len() as f64).sqrt();
                feasible(groups.group_norm(g, residual), bound) == 0.0
            });
            if ok {
                0.0
            } else {
                f64::INFINITY
            }
        }
        PenaltyKind::LInf => {
            let l1: f64 = residual.iter().map(|r| r.abs()).sum();
            feasible(l1, t)
        }
    }
}

/// Primal objective `D_KL(p || prior) + t H*(residual / t)`, where
/// `residual = E_emp[phi] - E_p[phi]`.
pub fn primal_objective(
    p: &SimplexDistribution,
    prior: &SimplexDistribution,
    penalty: &PenaltySpec,
    residual: &[f64],
) -> Result<f64> {
    let kl = kl_divergence(p, prior)?;
    Ok(kl + scaled_potential(penalty, residual))
}

/// Dual objective `<w, emp_avg> - t H(w) - log sum_j prior(j) exp(<w, phi(j)>)`.
pub fn dual_objective(
    w: &[f64],
    prior: &SimplexDistribution,
    phi: &FeatureMatrix,
    penalty: &PenaltySpec,
    emp_avg: &[f64],
) -> Result<f64> {
    check_dim("dual vector length", phi.m(), w.len())?;
    check_dim("empirical average length", phi.m(), emp_avg.len())?;
    check_dim("prior length", phi.n(), prior.len())?;
    if w.iter().chain(emp_avg).any(|v| v.is_nan()) {
        return Err(Error::Domain("NaN in dual objective input".into()));
    }
    let mut logits = phi.column_dots(w)?;
    for (l, p) in logits.iter_mut().zip(prior.probs()) {
        *l += p.ln();
    }
    let inner: f64 = w.iter().zip(emp_avg).map(|(a, b)| a * b).sum();
    Ok(inner - penalty.t * penalty.kind.regularizer(w) - log_sum_exp(&logits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalty::GroupPartition;

    fn simplex(v: &[f64]) -> SimplexDistribution {
        SimplexDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn kl_examples() {
        let u = simplex(&[0.5, 0.5]);
        assert_eq!(kl_divergence(&u, &u).unwrap(), 0.0);
        let e = simplex(&[1.0, 0.0]);
        assert!((kl_divergence(&e, &u).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(matches!(kl_divergence(&u, &e), Err(Error::Domain(_))));
        assert!(matches!(
            kl_divergence(&u, &simplex(&[0.2, 0.3, 0.5])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn gibbs_examples() {
        let prior = SimplexDistribution::uniform(2).unwrap();
        let phi = FeatureMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let (p, cache) = gibbs_distribution(&prior, &[0.0], &phi).unwrap();
        assert_eq!(p.probs(), prior.probs());
        assert!(cache.log_partition.abs() < 1e-15);

        let (p, _) = gibbs_distribution(&prior, &[3f64.ln()], &phi).unwrap();
        assert!((p.probs()[0] - 0.75).abs() < 1e-15);
        assert!((p.probs()[1] - 0.25).abs() < 1e-15);

        assert!(gibbs_distribution(&prior, &[f64::NAN], &phi).is_err());
    }

    #[test]
    fn gibbs_survives_huge_logits() {
        let prior = SimplexDistribution::uniform(4).unwrap();
        let phi = FeatureMatrix::from_rows(&[vec![0.1, 0.9, 0.4, 0.7], vec![0.3, 0.2, 0.8, 0.5]])
            .unwrap();
        let z = [300.0, -400.0]; // |z| = 500
        let (p, cache) = gibbs_distribution(&prior, &z, &phi).unwrap();
        assert!(p.probs().iter().all(|v| v.is_finite()));
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(cache.log_partition.is_finite());
        let total: f64 = (0..4).map(|j| cache.log_prob(j).exp()).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn primal_objective_examples() {
        let prior = SimplexDistribution::uniform(3).unwrap();
        let en = PenaltySpec::new(PenaltyKind::ElasticNet { alpha: 0.5 }, 1.0).unwrap();
        assert_eq!(primal_objective(&prior, &prior, &en, &[0.0, 0.0]).unwrap(), 0.0);
        assert!((scaled_potential(&en, &[2.0, 0.0]) - 2.25).abs() < 1e-15);

        let linf = PenaltySpec::new(PenaltyKind::LInf, 1.0).unwrap();
        let p = simplex(&[0.5, 0.25, 0.25]);
        let kl = kl_divergence(&p, &prior).unwrap();
        assert_eq!(primal_objective(&p, &prior, &linf, &[0.4, -0.5]).unwrap(), kl);
        assert_eq!(scaled_potential(&linf, &[0.6, -0.5]), f64::INFINITY);

        let gl = PenaltySpec::new(
            PenaltyKind::GroupLasso { groups: GroupPartition::contiguous(&[2, 1]).unwrap() },
            1.0,
        )
        .unwrap();
        assert_eq!(scaled_potential(&gl, &[1.0, 1.0, 1.0]), 0.0);
        assert_eq!(scaled_potential(&gl, &[1.0, 1.0, 1.1]), f64::INFINITY);

        let zero_t = en.with_t(0.0);
        assert_eq!(scaled_potential(&zero_t, &[0.0, 0.0]), 0.0);
        assert_eq!(scaled_potential(&zero_t, &[0.1, 0.0]), f64::INFINITY);
    }

    #[test]
    fn dual_objective_examples() {
        let prior = SimplexDistribution::uniform(2).unwrap();
        let phi = FeatureMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let en = PenaltySpec::new(PenaltyKind::ElasticNet { alpha: 1.0 }, 1.0).unwrap();
        let d0 = dual_objective(&[0.0, 0.0], &prior, &phi, &en, &[0.3, 0.7]).unwrap();
        assert!(d0.abs() < 1e-15);
        let d = dual_objective(&[1.0, 0.0], &prior, &phi, &en, &[1.0, 0.0]).unwrap();
        let expected = 1.0 - 1.0 - ((1f64.exp() + 1.0) / 2.0).ln();
        assert!((d - expected).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
