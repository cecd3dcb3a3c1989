//! Regularized maximum-entropy density estimation.
//!
//! Given features `phi(j)` of `n` outcomes, a prior, and the empirical feature
//! average, the crate fits distributions
//! `p(j) ∝ prior(j) exp(<w, phi(j)>)` whose mismatch with the data is
//! controlled by an elastic-net, group-lasso or l-infinity penalty, either at a
//! single hyperparameter or along a warm-started path.
//!
//! ```
//! use maxent::{FeatureMatrix, PenaltyKind, PenaltySpec, Problem, SimplexDistribution};
//! use maxent::solvers::{npdhg_nonsmooth, SolverOptions};
//!
//! let phi = FeatureMatrix::from_rows(&[vec![0.0, 1.0, 0.5], vec![1.0, 0.0, 0.5]])?;
//! let prior = SimplexDistribution::uniform(3)?;
//! let emp = SimplexDistribution::new(vec![0.6, 0.2, 0.2])?;
//! let penalty = PenaltySpec::new(PenaltyKind::LInf, 0.05)?;
//! let problem = Problem::from_empirical(phi, prior, &emp, penalty)?;
//! let sol = npdhg_nonsmooth(&problem, &[0.0; 2], &[0.0; 2], &SolverOptions::default())?;
//! assert!(sol.report.converged);
//! # Ok::<(), maxent::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod data;
pub mod error;
pub mod kernels;
pub mod matrix;
pub mod oracle;
pub mod path;
pub mod penalty;
pub mod prox;
pub mod simplex;
pub mod solvers;

pub use error::{Error, Result};
pub use matrix::FeatureMatrix;
pub use penalty::{GroupPartition, PenaltyKind, PenaltySpec};
pub use simplex::SimplexDistribution;
pub use solvers::{Problem, Solution, SolveReport, SolverChoice, SolverOptions};

/// The guide's chapters, compiled so that their snippets run as doc-tests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/problem.md")]
    pub mod problem {}
    #[doc = include_str!("../../../book/src/penalties.md")]
    pub mod penalties {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    pub mod solvers {}
    #[doc = include_str!("../../../book/src/paths.md")]
    pub mod paths {}
    #[doc = include_str!("../../../book/src/data.md")]
    pub mod data {}
    #[doc = include_str!("../../../book/src/validation.md")]
    pub mod validation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
