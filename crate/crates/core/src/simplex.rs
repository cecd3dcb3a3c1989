//! Probability vectors on the unit simplex.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed absolute deviation of the entry sum from one.
pub const SUM_TOL: f64 = 1e-12;

/// Largest sum drift that construction silently renormalizes away.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// A nonnegative vector whose entries sum to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SimplexDistribution {
    probs: Vec<f64>,
}

impl SimplexDistribution {
    /// Validates `probs`. Sums off by less than [`RENORMALIZE_TOL`] are
    /// renormalized; anything further is rejected.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::NotSimplex("empty vector".into()));
        }
        for (j, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::NotSimplex(format!("entry {j} is {p}")));
            }
        }
        let sum: f64 = probs.iter().sum();
        let drift = (sum - 1.0).abs();
        if drift >= RENORMALIZE_TOL {
            return Err(Error::NotSimplex(format!("entries sum to {sum}")));
        }
        if drift > SUM_TOL {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        Ok(Self { probs })
    }

    /// Like [`SimplexDistribution::new`] but also requires every entry to be
    /// strictly positive.
    pub fn interior(probs: Vec<f64>) -> Result<Self> {
        let d = Self::new(probs)?;
        d.require_interior("distribution")?;
        Ok(d)
    }

    /// Normalizes nonnegative weights with a positive total.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::NotSimplex(format!("weights sum to {total}")));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
            return Err(Error::NotSimplex(format!("negative or NaN weight {w}")));
        }
        Ok(Self {
            probs: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::NotSimplex("empty vector".into()));
        }
        Ok(Self {
            probs: vec![1.0 / n as f64; n],
        })
    }

    /// Point mass on outcome `j`.
    pub fn unit(n: usize, j: usize) -> Result<Self> {
        if j >= n {
            return Err(Error::NotSimplex(format!("index {j} out of range for n = {n}")));
        }
        let mut probs = vec![0.0; n];
        probs[j] = 1.0;
        Ok(Self { probs })
    }

    /// Wraps a vector already known to lie on the simplex.
    pub(crate) fn from_normalized(probs: Vec<f64>) -> Self {
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn is_interior(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    pub fn require_interior(&self, what: &str) -> Result<()> {
        match self.probs.iter().position(|&p| p <= 0.0) {
            Some(j) => Err(Error::Domain(format!(
                "{what} must be strictly positive, entry {j} is {}",
                self.probs[j]
            ))),
            None => Ok(()),
        }
    }

    /// `l1` distance to another distribution of the same length.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

impl<'de> Deserialize<'de> for SimplexDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let probs = Vec::<f64>::deserialize(de)?;
        Self::new(probs).map_err(serde::de::Error::custom)
    }
}
