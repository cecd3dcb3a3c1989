//! Penalty families and their hyperparameters.
//!
//! Each penalty is described on the dual side by a convex regularizer `H`:
//!
//! | kind        | `H(w)`                                      |
//! |-------------|---------------------------------------------|
//! | elastic net | `alpha * |w|_1 + (1 - alpha) / 2 * |w|_2^2` |
//! | group lasso | `sum_g sqrt(m_g) * |w_g|_2`                 |
//! | l-infinity  | `|w|_inf`                                   |
//!
//! The primal potential is the convex conjugate `H*`, applied to the scaled
//! mismatch `(E_emp[phi] - E_p[phi]) / t`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A partition of the feature indices `0..m` into disjoint groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupPartition {
    groups: Vec<Vec<usize>>,
}

impl GroupPartition {
    /// Validates that `groups` are nonempty, disjoint and cover `0..m`.
    pub fn new(groups: Vec<Vec<usize>>, m: usize) -> Result<Self> {
        let p = Self { groups };
        p.validate(m)?;
        Ok(p)
    }

    /// Consecutive groups with the given sizes.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        let mut start = 0;
        let groups = sizes
            .iter()
            .map(|&s| {
                let g: Vec<usize> = (start..start + s).collect();
                start += s;
                g
            })
            .collect();
        Self::new(groups, start)
    }

    /// One group per feature.
    pub fn singletons(m: usize) -> Self {
        Self {
            groups: (0..m).map(|i| vec![i]).collect(),
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let mut seen = vec![false; m];
        for (g, group) in self.groups.iter().enumerate() {
            if group.is_empty() {
                return Err(invalid(format!("group {g} is empty")));
            }
            for &i in group {
                if i >= m {
                    return Err(invalid(format!("group {g} names feature {i}, but m = {m}")));
                }
                if seen[i] {
                    return Err(invalid(format!("feature {i} appears in more than one group")));
                }
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(invalid(format!("feature {i} is not in any group")));
        }
        Ok(())
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Total number of features covered.
    pub fn dim(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Euclidean norm of `v` restricted to group `g`.
    pub fn group_norm(&self, g: usize, v: &[f64]) -> f64 {
        self.groups[g].iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt()
    }
}

/// The penalty family, without its hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltyKind {
    /// Elastic net with mixing `alpha` in `(0, 1]`; `alpha = 1` is the lasso.
    ElasticNet { alpha: f64 },
    /// Non-overlapping group lasso.
    GroupLasso { groups: GroupPartition },
    /// l-infinity regularization (l1-ball constraint on the mismatch).
    #[serde(rename = "linf")]
    LInf,
}

impl PenaltyKind {
    pub fn elastic_net(alpha: f64) -> Result<Self> {
        let k = Self::ElasticNet { alpha };
        k.validate(None)?;
        Ok(k)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::ElasticNet { .. } => "elastic_net",
            Self::GroupLasso { .. } => "group_lasso",
            Self::LInf => "linf",
        }
    }

    /// Checks parameter ranges, and the partition against `m` when given.
    pub fn validate(&self, m: Option<usize>) -> Result<()> {
        match self {
            Self::ElasticNet { alpha } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(invalid(format!("elastic-net alpha must lie in (0, 1], got {alpha}")));
                }
            }
            Self::GroupLasso { groups } => {
                if let Some(m) = m {
                    groups.validate(m)?;
                }
            }
            Self::LInf => {}
        }
        Ok(())
    }

    /// The dual regularizer `H(w)`.
    pub fn regularizer(&self, w: &[f64]) -> f64 {
        match self {
            Self::ElasticNet { alpha } => {
                let l1: f64 = w.iter().map(|v| v.abs()).sum();
                let l2sq: f64 = w.iter().map(|v| v * v).sum();
                alpha * l1 + 0.5 * (1.0 - alpha) * l2sq
            }
            Self::GroupLasso { groups } => (0..groups.len())
                .map(|g| (groups.groups()[g].len() as f64).sqrt() * groups.group_norm(g, w))
                .sum(),
            Self::LInf => w.iter().fold(0.0_f64, |a, v| a.max(v.abs())),
        }
    }
}

/// A penalty family together with its hyperparameter `t >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    #[serde(flatten)]
    pub kind: PenaltyKind,
    pub t: f64,
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, t: f64) -> Result<Self> {
        let spec = Self { kind, t };
        spec.validate(None)?;
        Ok(spec)
    }

    pub fn validate(&self, m: Option<usize>) -> Result<()> {
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return Err(invalid(format!("hyperparameter t must be finite and >= 0, got {}", self.t)));
        }
        self.kind.validate(m)
    }

    /// Same family at a different `t`.
    pub fn with_t(&self, t: f64) -> Self {
        Self {
            kind: self.kind.clone(),
            t,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_validation() {
        assert!(GroupPartition::new(vec![vec![0, 1], vec![2]], 3).is_ok());
        assert!(GroupPartition::new(vec![vec![0, 1], vec![1, 2]], 3).is_err());
        assert!(GroupPartition::new(vec![vec![0], vec![2]], 3).is_err());
        assert!(GroupPartition::new(vec![vec![0, 3]], 3).is_err());
        assert!(GroupPartition::new(vec![vec![], vec![0]], 1).is_err());
        let p = GroupPartition::contiguous(&[2, 3]).unwrap();
        assert_eq!(p.groups(), &[vec![0, 1], vec![2, 3, 4]]);
        assert_eq!(p.dim(), 5);
    }

    #[test]
    fn elastic_net_alpha_range() {
        assert!(PenaltyKind::elastic_net(0.0).is_err());
        assert!(PenaltyKind::elastic_net(1.2).is_err());
        assert!(PenaltyKind::elastic_net(1.0).is_ok());
        assert!(PenaltySpec::new(PenaltyKind::LInf, -1.0).is_err());
        assert!(PenaltySpec::new(PenaltyKind::LInf, 0.0).is_ok());
    }

    #[test]
    fn regularizer_values() {
        let w = [3.0, -4.0];
        let en = PenaltyKind::ElasticNet { alpha: 0.5 };
        assert!((en.regularizer(&w) - (0.5 * 7.0 + 0.25 * 25.0)).abs() < 1e-15);
        let gl = PenaltyKind::GroupLasso {
            groups: GroupPartition::contiguous(&[2]).unwrap(),
        };
        assert!((gl.regularizer(&w) - 2f64.sqrt() * 5.0).abs() < 1e-12);
        assert_eq!(PenaltyKind::LInf.regularizer(&w), 4.0);
    }

    #[test]
    fn json_shape() {
        let spec = PenaltySpec::new(PenaltyKind::ElasticNet { alpha: 0.95 }, 0.5).unwrap();
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(s, r#"{"kind":"elastic_net","alpha":0.95,"t":0.5}"#);
        let back: PenaltySpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
        let linf: PenaltySpec = serde_json::from_str(r#"{"kind":"linf","t":1.0}"#).unwrap();
        assert_eq!(linf.kind, PenaltyKind::LInf);
        let gl: PenaltySpec =
            serde_json::from_str(r#"{"kind":"group_lasso","groups":[[0,1],[2]],"t":1.0}"#).unwrap();
        assert_eq!(gl.kind.name(), "group_lasso");
    }
}
