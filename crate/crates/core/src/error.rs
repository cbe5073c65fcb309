use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Variants are grouped by how a caller should react: configuration problems,
/// violated mathematical preconditions (the input is outside the regime where
/// the construction is meaningful), failed audits, and numerical faults.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("point {point:?} leaves the chart (|x| - 2h = {clearance:.6} < inner radius {inner:.6})")]
    Domain {
        point: Vec<f64>,
        clearance: f64,
        inner: f64,
    },

    #[error("metric is degenerate at {point:?}: {detail}")]
    Degenerate { point: Vec<f64>, detail: String },

    #[error("positivity violation: {0}")]
    Positivity(String),

    #[error("precondition failed: {inequality} (lhs = {lhs:.6e}, rhs = {rhs:.6e}) [{anchor}]")]
    Precondition {
        inequality: String,
        lhs: f64,
        rhs: f64,
        anchor: String,
    },

    #[error("regime violation: {0}")]
    Regime(String),

    #[error("audit failed: {check} at {location} (value = {value:.6e}, bound = {bound:.6e})")]
    Audit {
        check: String,
        location: String,
        value: f64,
        bound: f64,
    },

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("estimation did not converge after {iterations} iterations: {detail}")]
    Estimation { iterations: usize, detail: String },

    #[error("expansion coefficient mismatch: A_integral = {integral:.6e}, A_fit = {fit:.6e}")]
    ExpansionMismatch { integral: f64, fit: f64 },

    #[error("non-convergence: {detail} (trend {trend:?})")]
    NonConvergence { detail: String, trend: Vec<f64> },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True when the error signals a numerical fault rather than a rejected input.
    pub fn is_numerical_fault(&self) -> bool {
        matches!(
            self,
            Error::Solver(_)
                | Error::Estimation { .. }
                | Error::ExpansionMismatch { .. }
                | Error::Degenerate { .. }
                | Error::NonConvergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
