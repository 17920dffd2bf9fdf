use thiserror::Error;

/// Errors raised by the estimators, fitters and the simulation harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Too few observations (or exceedances) to fit.
    #[error("insufficient data: need at least {needed} {what}, got {got}")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    /// All excesses are identical, so the likelihood has no interior maximiser.
    #[error("degenerate sample: all {0} values are equal")]
    DegenerateSample(usize),

    /// An iterative fit ran out of iterations; `best` is the best iterate found.
    #[error("{what} did not converge after {iterations} iterations (best iterate {best:?})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        best: Vec<f64>,
    },

    /// Every replicate failed at some quantile level.
    #[error("aggregation error at tau = {tau}: {reason}")]
    Aggregation { tau: f64, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if p.is_finite() && p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        domain(format!("{name} must lie in (0, 1), got {p}"))
    }
}
