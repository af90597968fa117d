//! Error type shared across the crate.

use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid argument or configuration value.
    Parameter(String),
    /// A design column is constant (or otherwise degenerate); carries the
    /// offending column index.
    DegenerateColumn(usize),
    /// Mismatched vector/matrix dimensions.
    Dimension(String),
    /// The selected model block X_g' X_g is singular; carries the support.
    SingularModel(String),
    /// Enumeration over 2^p models was requested for p beyond the budget.
    Budget(String),
    /// An iterative solver failed to converge; carries diagnostics.
    Convergence(String),
    /// A sampler produced a non-finite value; carries the iteration index.
    NonFinite { iteration: usize, what: String },
    /// Posterior draws violate an invariant (e.g. a PIP outside [0,1]).
    CorruptDraws(String),
    /// Weight construction is undefined for the given inputs.
    WeightDomain(String),
    /// Metric requires ground truth that the dataset does not carry.
    MetricUnavailable(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::DegenerateColumn(j) => write!(f, "degenerate column x{}", j + 1),
            Error::Dimension(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::SingularModel(msg) => write!(f, "singular model block: {msg}"),
            Error::Budget(msg) => write!(f, "enumeration budget exceeded: {msg}"),
            Error::Convergence(msg) => write!(f, "failed to converge: {msg}"),
            Error::NonFinite { iteration, what } => {
                write!(f, "non-finite {what} at iteration {iteration}")
            }
            Error::CorruptDraws(msg) => write!(f, "corrupt posterior draws: {msg}"),
            Error::WeightDomain(msg) => write!(f, "weight undefined: {msg}"),
            Error::MetricUnavailable(msg) => write!(f, "metric unavailable: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
