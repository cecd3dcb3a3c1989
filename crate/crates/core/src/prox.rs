//! Closed-form proximal operators for the dual regularizers.
//!
//! Each operator solves `argmin_w lambda * R(w) + 1/2 |w - w_hat|^2` for its
//! regularizer `R`. Pure variants return a new vector; the `_in_place`
//! variants overwrite their input and are what the solvers call.

use crate::error::{check_dim, invalid, Result};
use crate::penalty::{GroupPartition, PenaltyKind};

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) {
        return Err(invalid(format!("prox parameter must be >= 0, got {lambda}")));
    }
    Ok(())
}

/// Soft thresholding: the prox of `lambda * |w|_1`.
pub fn shrink1(w_hat: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    let mut w = w_hat.to_vec();
    shrink1_in_place(&mut w, lambda);
    Ok(w)
}

pub fn shrink1_in_place(w: &mut [f64], lambda: f64) {
    for v in w {
        *v = if *v > lambda {
            *v - lambda
        } else if *v < -lambda {
            *v + lambda
        } else {
            0.0
        };
    }
}

/// Prox of `lambda * (alpha |w|_1 + (1 - alpha)/2 |w|_2^2)`.
pub fn prox_elastic_net(w_hat: &[f64], lambda: f64, alpha: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("elastic-net alpha must lie in (0, 1], got {alpha}")));
    }
    let mut w = w_hat.to_vec();
    prox_elastic_net_in_place(&mut w, lambda, alpha);
    Ok(w)
}

pub fn prox_elastic_net_in_place(w: &mut [f64], lambda: f64, alpha: f64) {
    shrink1_in_place(w, lambda * alpha);
    let scale = 1.0 + lambda * (1.0 - alpha);
    if scale != 1.0 {
        for v in w {
            *v /= scale;
        }
    }
}

/// Blockwise shrinkage: the prox of `lambda * sum_g sqrt(m_g) |w_g|_2`.
/// A zero block stays zero.
pub fn prox_group_lasso(w_hat: &[f64], lambda: f64, groups: &GroupPartition) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    check_dim("vector length for group partition", groups.dim(), w_hat.len())?;
    let mut w = w_hat.to_vec();
    prox_group_lasso_in_place(&mut w, lambda, groups);
    Ok(w)
}

pub fn prox_group_lasso_in_place(w: &mut [f64], lambda: f64, groups: &GroupPartition) {
    for (g, members) in groups.groups().iter().enumerate() {
        let norm = groups.group_norm(g, w);
        let threshold = lambda * (members.len() as f64).sqrt();
        let factor = if norm > threshold { 1.0 - threshold / norm } else { 0.0 };
        for &i in members {
            w[i] *= factor;
        }
    }
}

/// Euclidean projection onto `{w : |w|_1 <= radius}`. Points already inside
/// the ball are returned unchanged.
pub fn project_l1_ball(w_hat: &[f64], radius: f64) -> Result<Vec<f64>> {
    if !(radius >= 0.0) {
        return Err(invalid(format!("l1-ball radius must be >= 0, got {radius}")));
    }
    let mut w = w_hat.to_vec();
    project_l1_ball_in_place(&mut w, radius, &mut ProxScratch::default());
    Ok(w)
}

/// Prox of `lambda * |w|_inf`, via the Moreau identity
/// `prox(w_hat) = w_hat - P_{|.|_1 <= lambda}(w_hat)`.
pub fn prox_linf(w_hat: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    let mut w = w_hat.to_vec();
    prox_linf_in_place(&mut w, lambda, &mut ProxScratch::default());
    Ok(w)
}

pub fn prox_linf_in_place(w: &mut [f64], lambda: f64, scratch: &mut ProxScratch) {
    scratch.copy.clear();
    scratch.copy.extend_from_slice(w);
    let mut proj = std::mem::take(&mut scratch.copy);
    project_l1_ball_in_place(&mut proj, lambda, scratch);
    for (v, p) in w.iter_mut().zip(&proj) {
        *v -= p;
    }
    scratch.copy = proj;
}

/// Dispatches to the prox of `lambda * H` for the penalty family.
pub fn prox_penalty_in_place(kind: &PenaltyKind, w: &mut [f64], lambda: f64, scratch: &mut ProxScratch) {
    match kind {
        PenaltyKind::ElasticNet { alpha } => prox_elastic_net_in_place(w, lambda, *alpha),
        PenaltyKind::GroupLasso { groups } => prox_group_lasso_in_place(w, lambda, groups),
        PenaltyKind::LInf => prox_linf_in_place(w, lambda, scratch),
    }
}

/// Reusable buffers for the l1-ball projection.
#[derive(Debug, Default, Clone)]
pub struct ProxScratch {
    active: Vec<f64>,
    waiting: Vec<f64>,
    copy: Vec<f64>,
}

/// Condat's linear-time (in practice) projection onto the l1 ball: the
/// magnitudes are projected onto the scaled simplex and the signs restored.
pub fn project_l1_ball_in_place(w: &mut [f64], radius: f64, scratch: &mut ProxScratch) {
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    if l1 <= radius {
        return;
    }
    if radius <= 0.0 {
        w.fill(0.0);
        return;
    }
    let tau = condat_threshold(w, radius, scratch);
    for v in w.iter_mut() {
        let mag = (v.abs() - tau).max(0.0);
        *v = mag.copysign(*v);
    }
}

/// Threshold `tau` such that `sum_i max(|y_i| - tau, 0) = radius`, for
/// `|y|_1 > radius > 0`.
fn condat_threshold(y: &[f64], radius: f64, scratch: &mut ProxScratch) -> f64 {
    let v = &mut scratch.active;
    let vt = &mut scratch.waiting;
    v.clear();
    vt.clear();

    let mut iter = y.iter().map(|x| x.abs());
    let first = iter.next().expect("nonempty input");
    v.push(first);
    let mut rho = first - radius;
    for yn in iter {
        if yn > rho {
            rho += (yn - rho) / (v.len() as f64 + 1.0);
            if rho > yn - radius {
                v.push(yn);
            } else {
                vt.extend_from_slice(v);
                v.clear();
                v.push(yn);
                rho = yn - radius;
            }
        }
    }
    for &yt in vt.iter() {
        if yt > rho {
            v.push(yt);
            rho += (yt - rho) / v.len() as f64;
        }
    }
    loop {
        let before = v.len();
        let mut k = 0;
        while k < v.len() {
            let yk = v[k];
            if yk <= rho {
                v.swap_remove(k);
                rho += (rho - yk) / v.len() as f64;
            } else {
                k += 1;
            }
        }
        if v.len() == before {
            break;
        }
    }
    rho
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shrink_examples() {
        assert_eq!(shrink1(&[3.0, -0.5, 1.0], 1.0).unwrap(), vec![2.0, 0.0, 0.0]);
        assert_eq!(shrink1(&[3.0, -2.5], 0.0).unwrap(), vec![3.0, -2.5]);
        assert!(shrink1(&[1.0], -0.1).is_err());
    }

    #[test]
    fn elastic_net_examples() {
        let w = [3.0, -0.2, -4.0];
        assert_eq!(prox_elastic_net(&w, 0.7, 1.0).unwrap(), shrink1(&w, 0.7).unwrap());
        assert_eq!(prox_elastic_net(&[3.0], 2.0, 0.5).unwrap(), vec![1.0]);
        assert!(prox_elastic_net(&w, 1.0, 0.0).is_err());
        assert!(prox_elastic_net(&w, 1.0, 1.5).is_err());
    }

    #[test]
    fn group_lasso_examples() {
        let groups = GroupPartition::contiguous(&[2]).unwrap();
        // lambda * sqrt(2) = 2.5
        let lambda = 2.5 / 2f64.sqrt();
        let out = prox_group_lasso(&[3.0, 4.0], lambda, &groups).unwrap();
        assert!((out[0] - 1.5).abs() < 1e-12 && (out[1] - 2.0).abs() < 1e-12);
        assert_eq!(prox_group_lasso(&[3.0, 4.0], 0.0, &groups).unwrap(), vec![3.0, 4.0]);
        assert_eq!(prox_group_lasso(&[0.0, 0.0], 1.0, &groups).unwrap(), vec![0.0, 0.0]);
        assert_eq!(prox_group_lasso(&[1.0, 1.0], 5.0, &groups).unwrap(), vec![0.0, 0.0]);

        // Singleton groups scale rather than translate.
        let singles = GroupPartition::singletons(2);
        let out = prox_group_lasso(&[3.0, -0.5], 1.0, &singles).unwrap();
        assert_eq!(out, vec![2.0, 0.0]);
    }

    #[test]
    fn l1_projection_examples() {
        assert_eq!(project_l1_ball(&[2.0, 0.0], 1.0).unwrap(), vec![1.0, 0.0]);
        assert_eq!(project_l1_ball(&[0.2, -0.3], 1.0).unwrap(), vec![0.2, -0.3]);
        let out = project_l1_ball(&[3.0, -3.0, 1.0], 2.0).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-15 && (out[1] + 1.0).abs() < 1e-15 && out[2] == 0.0);
        assert_eq!(project_l1_ball(&[1.0, 2.0], 0.0).unwrap(), vec![0.0, 0.0]);
        assert!(project_l1_ball(&[1.0], -1.0).is_err());
    }

    #[test]
    fn linf_examples() {
        assert_eq!(prox_linf(&[2.0, 0.0], 1.0).unwrap(), vec![1.0, 0.0]);
        assert_eq!(prox_linf(&[0.3, -0.2], 1.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(prox_linf(&[0.3, -0.2], 0.0).unwrap(), vec![0.3, -0.2]);
        // Two tied maxima are lowered together.
        let out = prox_linf(&[3.0, -3.0, 1.0], 2.0).unwrap();
        assert_eq!(out, vec![2.0, -2.0, 1.0]);
    }
}
