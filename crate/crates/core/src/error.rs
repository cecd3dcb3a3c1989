use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("not a probability distribution: {0}")]
    NotSimplex(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("penalty not supported by {solver}: {penalty}")]
    UnsupportedPenalty {
        solver: &'static str,
        penalty: &'static str,
    },

    #[error(
        "non-finite iterate at iteration {iteration} \
         (tau = {tau:e}, sigma = {sigma:e}, max logit = {max_logit:e})"
    )]
    NonFinite {
        iteration: usize,
        tau: f64,
        sigma: f64,
        max_logit: f64,
    },

    #[error("power iteration did not converge after {iterations} iterations (best estimate {estimate})")]
    PowerIteration { iterations: usize, estimate: f64 },

    #[error("oracle failed to certify its result: {0}")]
    Oracle(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { what, expected, got });
    }
    Ok(())
}
