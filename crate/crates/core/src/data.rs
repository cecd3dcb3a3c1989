//! Input tables, empirical distributions, feature scaling, synthetic
//! instances and problem files.
//!
//! Cell tables are CSV files with the header
//!
//! ```text
//! cell_id,ecoregion,fire[,prior],f_1,...,f_m
//! ```
//!
//! where `fire` is `0`/`1` (or `false`/`true`) and the optional `prior`
//! column holds unnormalized positive prior weights.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::matrix::{FeatureMatrix, POWER_ITERATION_TOL};
use crate::penalty::PenaltySpec;
use crate::simplex::SimplexDistribution;
use crate::solvers::Problem;

/// One row per spatial cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTable {
    cell_ids: Vec<String>,
    ecoregions: Vec<String>,
    fire: Vec<bool>,
    prior: Option<Vec<f64>>,
    /// Row-major, one row of `m` features per cell.
    features: Vec<f64>,
    m: usize,
}

impl CellTable {
    pub fn new(
        cell_ids: Vec<String>,
        ecoregions: Vec<String>,
        fire: Vec<bool>,
        prior: Option<Vec<f64>>,
        features: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = cell_ids.len();
        if n == 0 {
            return Err(invalid("cell table has no rows"));
        }
        check_dim("ecoregion column length", n, ecoregions.len())?;
        check_dim("fire column length", n, fire.len())?;
        check_dim("feature row count", n, features.len())?;
        if let Some(p) = &prior {
            check_dim("prior column length", n, p.len())?;
            if let Some(j) = p.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(invalid(format!("prior weight of cell {j} must be positive, got {}", p[j])));
            }
        }
        let m = features[0].len();
        if m == 0 {
            return Err(invalid("cell table has no feature columns"));
        }
        let mut flat = Vec::with_capacity(n * m);
        for (j, row) in features.iter().enumerate() {
            check_dim("features per cell", m, row.len())?;
            if row.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("cell {j} has a non-finite feature")));
            }
            flat.extend_from_slice(row);
        }
        Ok(Self {
            cell_ids,
            ecoregions,
            fire,
            prior,
            features: flat,
            m,
        })
    }

    pub fn n(&self) -> usize {
        self.cell_ids.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn cell_ids(&self) -> &[String] {
        &self.cell_ids
    }

    pub fn ecoregions(&self) -> &[String] {
        &self.ecoregions
    }

    pub fn fire(&self) -> &[bool] {
        &self.fire
    }

    pub fn features_of(&self, j: usize) -> &[f64] {
        &self.features[j * self.m..(j + 1) * self.m]
    }

    /// Features as an `m x n` matrix, one column per cell.
    pub fn feature_matrix(&self) -> Result<FeatureMatrix> {
        FeatureMatrix::from_col_major(self.m, self.n(), self.features.clone())
    }

    /// The normalized prior column, or the uniform distribution if absent.
    pub fn prior(&self) -> Result<SimplexDistribution> {
        match &self.prior {
            Some(w) => SimplexDistribution::from_weights(w),
            None => SimplexDistribution::uniform(self.n()),
        }
    }

    pub fn has_prior(&self) -> bool {
        self.prior.is_some()
    }

    /// Assembles a problem: features (min-max scaled if `scale`), prior and
    /// the empirical distribution of [`build_empirical`].
    pub fn to_problem(&self, penalty: PenaltySpec, scale: bool) -> Result<Problem> {
        let mut phi = self.feature_matrix()?;
        if scale {
            phi = minmax_scale(&phi)?.0;
        }
        Problem::from_empirical(phi, self.prior()?, &build_empirical(self)?, penalty)
    }
}

/// Region-balanced empirical distribution: each fire cell in region `r`
/// gets mass `1 / (Z n_r)`, where `n_r` is the number of cells in `r` and
/// `Z = sum_r fires_r / n_r`. Cells without fire get zero mass.
pub fn build_empirical(table: &CellTable) -> Result<SimplexDistribution> {
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (region, &fire) in table.ecoregions.iter().zip(&table.fire) {
        let entry = counts.entry(region.as_str()).or_default();
        entry.0 += 1;
        entry.1 += usize::from(fire);
    }
    let z: f64 = counts
        .values()
        .map(|&(total, fires)| fires as f64 / total as f64)
        .sum();
    if z == 0.0 {
        return Err(invalid("no cell has a recorded fire, so the empirical distribution is undefined"));
    }
    let probs = table
        .ecoregions
        .iter()
        .zip(&table.fire)
        .map(|(region, &fire)| {
            if fire {
                1.0 / (z * counts[region.as_str()].0 as f64)
            } else {
                0.0
            }
        })
        .collect();
    SimplexDistribution::new(probs)
}

/// Per-feature affine map onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub min: f64,
    pub max: f64,
}

/// Maps every feature (row) affinely onto `[0, 1]`. Constant features are
/// rejected.
pub fn minmax_scale(phi: &FeatureMatrix) -> Result<(FeatureMatrix, Vec<ScaleParams>)> {
    let params: Vec<ScaleParams> = phi
        .feature_ranges()
        .into_iter()
        .map(|(min, max)| ScaleParams { min, max })
        .collect();
    if let Some(i) = params.iter().position(|p| !(p.max > p.min)) {
        return Err(invalid(format!("feature {i} is constant and cannot be min-max scaled")));
    }
    Ok((apply_scaling(phi, &params)?, params))
}

/// Applies recorded scaling parameters.
pub fn apply_scaling(phi: &FeatureMatrix, params: &[ScaleParams]) -> Result<FeatureMatrix> {
    check_dim("scaling parameter count", phi.m(), params.len())?;
    let m = phi.m();
    let values = phi
        .as_col_major()
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let p = params[k % m];
            (v - p.min) / (p.max - p.min)
        })
        .collect();
    FeatureMatrix::from_col_major(m, phi.n(), values)
}

/// A generated instance and the norm ratio it achieved.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub phi: FeatureMatrix,
    pub prior: SimplexDistribution,
    pub emp_avg: Vec<f64>,
    /// `|A|_2 / |A|_op` of `phi`.
    pub achieved_ratio: f64,
}

impl Synthetic {
    pub fn problem(&self, penalty: PenaltySpec) -> Result<Problem> {
        Problem::new(self.phi.clone(), self.prior.clone(), self.emp_avg.clone(), penalty)
    }
}

/// Largest pull toward the common center.
const MAX_COHERENCE: f64 = 0.5;

/// Seeded instance with a tunable norm ratio `|A|_2 / |A|_op`.
///
/// For `n <= m` the columns are `beta u + (1 - beta) e_j` with `u` the
/// normalized all-ones vector, so `beta = 0` gives ratio 1. For `n > m` the
/// entries start as independent uniforms on `[0, 1]`, whose shared mean makes
/// the columns coherent (ratio about `0.87 sqrt(n)`). Lower targets shift the
/// entries toward zero mean, higher ones contract them toward `1/2`. The
/// knob is tuned by bisection; unreachable targets give the closest ratio in
/// range, which is reported. The prior is uniform and the empirical average
/// comes from a random interior distribution.
pub fn synth_problem(n: usize, m: usize, seed: u64, ratio_target: f64) -> Result<Synthetic> {
    if n < 2 || m < 1 {
        return Err(invalid(format!("synthetic problems need n >= 2 and m >= 1, got n = {n}, m = {m}")));
    }
    if !(ratio_target > 0.0) {
        return Err(invalid(format!("norm ratio target must be positive, got {ratio_target}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let orthonormal = n <= m;
    let base: Vec<f64> = if orthonormal {
        let mut e = vec![0.0; m * n];
        for j in 0..n {
            e[j * m + j] = 1.0;
        }
        e
    } else {
        (0..m * n).map(|_| rng.random::<f64>()).collect()
    };
    let unit = 1.0 / (m as f64).sqrt();
    // knob < 0 shifts toward zero mean, knob > 0 contracts toward the center.
    let build = |knob: f64| {
        let values = base
            .iter()
            .map(|&v| {
                if orthonormal {
                    knob * unit + (1.0 - knob) * v
                } else if knob < 0.0 {
                    v + 0.5 * knob
                } else {
                    0.5 * knob + (1.0 - knob) * v
                }
            })
            .collect();
        FeatureMatrix::from_col_major(m, n, values)
    };
    let ratio_of = |phi: &FeatureMatrix| -> f64 {
        let spectral = match phi.largest_singular_value(POWER_ITERATION_TOL) {
            Ok(s) => s,
            Err(Error::PowerIteration { estimate, .. }) => estimate,
            Err(_) => f64::NAN,
        };
        spectral / phi.operator_norm_1to2()
    };

    let (mut lo, mut hi) = (if orthonormal { 0.0 } else { -1.0 }, MAX_COHERENCE);
    let mut best = (f64::INFINITY, 0.0_f64, 0.0_f64);
    let mut consider = |knob: f64| -> Result<f64> {
        let ratio = ratio_of(&build(knob)?);
        let miss = (ratio - ratio_target).abs();
        if miss < best.0 {
            best = (miss, knob, ratio);
        }
        Ok(ratio)
    };
    let r_lo = consider(lo)?;
    let r_hi = consider(hi)?;
    if r_lo < ratio_target && ratio_target < r_hi {
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if consider(mid)? < ratio_target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let (_, knob, achieved_ratio) = best;
    let phi = build(knob)?;

    let prior = SimplexDistribution::uniform(n)?;
    let weights: Vec<f64> = (0..n).map(|_| (2.0 * rng.random::<f64>()).exp()).collect();
    let q = SimplexDistribution::from_weights(&weights)?;
    let emp_avg = phi.model_average(&q)?;
    Ok(Synthetic {
        phi,
        prior,
        emp_avg,
        achieved_ratio,
    })
}

/// Product design on `n = 2^m` outcomes: `phi_i(j)` is bit `i` of `j`.
/// Under a uniform prior the features are independent, so the dual
/// separates by coordinate.
pub fn product_design(m: usize) -> Result<FeatureMatrix> {
    if m == 0 || m > 20 {
        return Err(invalid(format!("product design needs 1 <= m <= 20, got {m}")));
    }
    let n = 1usize << m;
    let values = (0..n)
        .flat_map(|j| (0..m).map(move |i| ((j >> i) & 1) as f64))
        .collect();
    FeatureMatrix::from_col_major(m, n, values)
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        message: message.into(),
    }
}

fn parse_fire(s: &str) -> Option<bool> {
    match s.trim() {
        "1" | "true" | "TRUE" | "True" => Some(true),
        "0" | "false" | "FALSE" | "False" => Some(false),
        _ => None,
    }
}

/// Reads a cell table from CSV.
pub fn read_table<R: Read>(input: R) -> Result<CellTable> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < 3 || names[..3] != ["cell_id", "ecoregion", "fire"] {
        return Err(parse_err(1, "header must start with cell_id,ecoregion,fire"));
    }
    let has_prior = names.get(3) == Some(&"prior");
    let first_feature = if has_prior { 4 } else { 3 };
    for (k, name) in names[first_feature..].iter().enumerate() {
        let expected = format!("f_{}", k + 1);
        if *name != expected {
            return Err(parse_err(1, format!("unknown column `{name}` (expected `{expected}`)")));
        }
    }
    let m = names.len() - first_feature;
    if m == 0 {
        return Err(parse_err(1, "no feature columns f_1..f_m"));
    }

    let (mut ids, mut regions, mut fire, mut features) = (vec![], vec![], vec![], vec![]);
    let mut prior = has_prior.then(Vec::new);
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != names.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", names.len(), rec.len()),
            ));
        }
        ids.push(rec[0].to_string());
        regions.push(rec[1].to_string());
        fire.push(parse_fire(&rec[2]).ok_or_else(|| parse_err(line, format!("fire flag `{}` is not 0/1", &rec[2])))?);
        let number = |k: usize| -> Result<f64> {
            let v: f64 = rec[k]
                .parse()
                .map_err(|_| parse_err(line, format!("column `{}`: `{}` is not a number", names[k], &rec[k])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column `{}` is not finite", names[k])));
            }
            Ok(v)
        };
        if let Some(p) = prior.as_mut() {
            let v = number(3)?;
            if !(v > 0.0) {
                return Err(parse_err(line, format!("prior weight must be positive, got {v}")));
            }
            p.push(v);
        }
        features.push((first_feature..names.len()).map(number).collect::<Result<Vec<_>>>()?);
    }
    if ids.is_empty() {
        return Err(parse_err(2, "table has no data rows"));
    }
    CellTable::new(ids, regions, fire, prior, features)
}

pub fn load_table(path: impl AsRef<Path>) -> Result<CellTable> {
    read_table(std::fs::File::open(path)?)
}

/// Writes a cell table as CSV; parsed values round-trip exactly.
pub fn write_table<W: Write>(table: &CellTable, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["cell_id".to_string(), "ecoregion".into(), "fire".into()];
    if table.has_prior() {
        header.push("prior".into());
    }
    header.extend((1..=table.m()).map(|k| format!("f_{k}")));
    let io = |e: csv::Error| invalid(e.to_string());
    wtr.write_record(&header).map_err(io)?;
    for j in 0..table.n() {
        let mut row = vec![
            table.cell_ids[j].clone(),
            table.ecoregions[j].clone(),
            u8::from(table.fire[j]).to_string(),
        ];
        if let Some(p) = &table.prior {
            row.push(p[j].to_string());
        }
        row.extend(table.features_of(j).iter().map(f64::to_string));
        wtr.write_record(&row).map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_table(table: &CellTable, path: impl AsRef<Path>) -> Result<()> {
    write_table(table, std::fs::File::create(path)?)
}

/// On-disk problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub m: usize,
    pub n: usize,
    /// Row-major: feature `i` of outcome `j` is at `i * n + j`.
    pub phi: Vec<f64>,
    pub prior: Vec<f64>,
    pub emp_avg: Vec<f64>,
    pub penalty: PenaltySpec,
}

impl ProblemFile {
    pub fn from_problem(problem: &Problem) -> Self {
        let phi = problem.phi();
        Self {
            m: phi.m(),
            n: phi.n(),
            phi: phi.to_row_major(),
            prior: problem.prior().probs().to_vec(),
            emp_avg: problem.emp_avg().to_vec(),
            penalty: problem.penalty().clone(),
        }
    }

    pub fn into_problem(self) -> Result<Problem> {
        check_dim("phi entries (m * n)", self.m * self.n, self.phi.len())?;
        let mut col_major = vec![0.0; self.phi.len()];
        for i in 0..self.m {
            for j in 0..self.n {
                col_major[j * self.m + i] = self.phi[i * self.n + j];
            }
        }
        let phi = FeatureMatrix::from_col_major(self.m, self.n, col_major)?;
        let prior = SimplexDistribution::new(self.prior)?;
        Problem::new(phi, prior, self.emp_avg, self.penalty)
    }
}

pub fn save_problem(problem: &Problem, path: impl AsRef<Path>) -> Result<()> {
    let s = serde_json::to_string(&ProblemFile::from_problem(problem))?;
    std::fs::write(path, s)?;
    Ok(())
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<Problem> {
    let file: ProblemFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    file.into_problem()
}
