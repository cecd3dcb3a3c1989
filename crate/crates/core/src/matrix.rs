//! Dense feature matrices.
//!
//! A [`FeatureMatrix`] stores the feature map as an `m x n` array in
//! column-major order, so column `j` is the feature vector of outcome `j`.
//! Viewed as a linear operator it maps a distribution `p` to the model
//! average `sum_j p(j) * column(j)`.

use rayon::prelude::*;

use crate::error::{check_dim, invalid, Error, Result};
use crate::simplex::SimplexDistribution;

/// Columns per block in reductions over columns. Partial sums are always
/// formed per block and combined in block order, so results do not depend
/// on whether the blocks were processed in parallel.
const BLOCK: usize = 1024;

/// Column count from which column loops are spread over the rayon pool.
const PAR_COLUMNS: usize = 16 * BLOCK;

/// Iteration cap for [`FeatureMatrix::largest_singular_value`].
pub const POWER_ITERATION_CAP: usize = 10_000;

/// Default relative tolerance for [`FeatureMatrix::largest_singular_value`].
pub const POWER_ITERATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    m: usize,
    n: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    /// Builds a matrix from column-major values (`values[j * m + i]` is
    /// feature `i` of outcome `j`).
    pub fn from_col_major(m: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if m < 1 {
            return Err(invalid("feature matrix needs at least one feature (m >= 1)"));
        }
        if n < 2 {
            return Err(invalid("feature matrix needs at least two outcomes (n >= 2)"));
        }
        check_dim("feature matrix entries", m * n, values.len())?;
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite feature value at feature {}, outcome {}",
                pos % m,
                pos / m
            )));
        }
        Ok(Self { m, n, values })
    }

    /// Builds a matrix from `m` rows of length `n` (row `i` holds feature `i`
    /// across all outcomes).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        for row in rows {
            check_dim("feature row length", n, row.len())?;
        }
        let mut values = vec![0.0; m * n];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                values[j * m + i] = v;
            }
        }
        Self::from_col_major(m, n, values)
    }

    /// Builds a matrix from `n` columns of length `m`.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let n = cols.len();
        let m = cols.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(m * n);
        for col in cols {
            check_dim("feature column length", m, col.len())?;
            values.extend_from_slice(col);
        }
        Self::from_col_major(m, n, values)
    }

    /// Number of features.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of outcomes (cells).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.m + i]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.m..(j + 1) * self.m]
    }

    pub fn columns(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.m)
    }

    pub fn as_col_major(&self) -> &[f64] {
        &self.values
    }

    /// Row-major copy of the entries (`out[i * n + j]`).
    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.m * self.n];
        for (j, col) in self.columns().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                out[i * self.n + j] = v;
            }
        }
        out
    }

    /// `A p` for an arbitrary weight vector of length `n`.
    pub fn weighted_sum(&self, weights: &[f64]) -> Result<Vec<f64>> {
        check_dim("weight vector length", self.n, weights.len())?;
        let mut out = vec![0.0; self.m];
        self.weighted_sum_into(weights, &mut out);
        Ok(out)
    }

    /// Unchecked `out = A weights`. Lengths must already match.
    pub(crate) fn weighted_sum_into(&self, weights: &[f64], out: &mut [f64]) {
        let m = self.m;
        let block = |(cols, ws): (&[f64], &[f64])| {
            let mut acc = vec![0.0; m];
            for (col, &w) in cols.chunks_exact(m).zip(ws) {
                if w != 0.0 {
                    for (a, &c) in acc.iter_mut().zip(col) {
                        *a += w * c;
                    }
                }
            }
            acc
        };
        out.fill(0.0);
        if self.n >= PAR_COLUMNS {
            let partials: Vec<Vec<f64>> = self
                .values
                .par_chunks(m * BLOCK)
                .zip(weights.par_chunks(BLOCK))
                .map(block)
                .collect();
            for part in &partials {
                for (o, &v) in out.iter_mut().zip(part) {
                    *o += v;
                }
            }
        } else {
            for part in self
                .values
                .chunks(m * BLOCK)
                .zip(weights.chunks(BLOCK))
                .map(block)
            {
                for (o, &v) in out.iter_mut().zip(&part) {
                    *o += v;
                }
            }
        }
    }

    /// `A^T z`: the inner products `<z, column(j)>` for every outcome.
    pub fn column_dots(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim("dual vector length", self.m, z.len())?;
        let mut out = vec![0.0; self.n];
        self.column_dots_into(z, &mut out);
        Ok(out)
    }

    pub(crate) fn column_dots_into(&self, z: &[f64], out: &mut [f64]) {
        let m = self.m;
        let dot = |col: &[f64]| col.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
        if self.n >= PAR_COLUMNS {
            out.par_iter_mut()
                .zip(self.values.par_chunks_exact(m))
                .for_each(|(o, col)| *o = dot(col));
        } else {
            for (o, col) in out.iter_mut().zip(self.values.chunks_exact(m)) {
                *o = dot(col);
            }
        }
    }

    /// The model average `E_p[features]`.
    pub fn model_average(&self, p: &SimplexDistribution) -> Result<Vec<f64>> {
        check_dim("distribution length", self.n, p.len())?;
        self.weighted_sum(p.probs())
    }

    /// Norm of the operator from `(R^n, l1)` to `(R^m, l2)`: the largest
    /// Euclidean column norm. One pass over the entries.
    pub fn operator_norm_1to2(&self) -> f64 {
        self.columns()
            .map(|col| col.iter().map(|v| v * v).sum::<f64>())
            .fold(0.0_f64, f64::max)
            .sqrt()
    }

    /// Spectral norm estimate by power iteration on `A^T A`, stopping once
    /// the relative change of the estimate drops below `tol`.
    pub fn largest_singular_value(&self, tol: f64) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(invalid("power-iteration tolerance must be positive"));
        }
        let m = self.m;
        // Fixed, non-degenerate start vector.
        let mut x: Vec<f64> = (0..m).map(|i| 1.0 + 0.5 * ((i + 1) as f64).sin()).collect();
        let norm = l2(&x);
        x.iter_mut().for_each(|v| *v /= norm);

        let mut y = vec![0.0; self.n];
        let mut next = vec![0.0; m];
        let mut estimate = 0.0_f64;
        for _ in 0..POWER_ITERATION_CAP {
            self.column_dots_into(&x, &mut y);
            self.weighted_sum_into(&y, &mut next);
            let len = l2(&next);
            if len == 0.0 {
                // x is orthogonal to every column; only possible for A = 0
                // given the start vector, or by cancellation.
                if self.values.iter().all(|&v| v == 0.0) {
                    return Ok(0.0);
                }
                for (i, v) in x.iter_mut().enumerate() {
                    *v = if i % 2 == 0 { 1.0 } else { -1.0 };
                }
                continue;
            }
            let sigma = len.sqrt();
            let change = (sigma - estimate).abs() / sigma;
            estimate = sigma;
            for (xi, ni) in x.iter_mut().zip(&next) {
                *xi = ni / len;
            }
            if change < tol {
                return Ok(estimate);
            }
        }
        Err(Error::PowerIteration {
            iterations: POWER_ITERATION_CAP,
            estimate,
        })
    }

    /// Per-feature `(min, max)` over all outcomes.
    pub fn feature_ranges(&self) -> Vec<(f64, f64)> {
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); self.m];
        for col in self.columns() {
            for (r, &v) in ranges.iter_mut().zip(col) {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
        ranges
    }
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
