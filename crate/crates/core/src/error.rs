//! Error type shared by every module of the crate.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong when specifying or fitting a model.
#[derive(Clone, Debug, PartialEq)]
#[non_exhaustive]
pub enum Error {
    /// A variable name was not found in the factor space.
    UnknownVariable(String),
    /// Variable names must be unique and nonempty, levels at least 2.
    InvalidSpace(String),
    /// A level index is outside `0..levels` for its variable.
    LevelOutOfRange { variable: String, level: usize },
    /// The operation received a table of the wrong kind (counts vs probabilities).
    KindMismatch { expected: &'static str },
    /// A malformed specification: bad subsets, mismatched lengths, bad coordinates.
    Spec(String),
    /// A cell that must be strictly positive is zero or negative.
    NonPositiveCell { index: usize, value: f64 },
    /// Conditioning slice carries no probability mass.
    DegenerateConditioning,
    /// An all-zero table cannot be normalized.
    DegenerateTable,
    /// A matrix expected to be symmetric positive definite failed to factor.
    NotPositiveDefinite { pivot: usize, value: f64 },
    /// A square system is singular to working precision.
    Singular { condition: f64 },
    /// Constraint rows are linearly dependent.
    RankDeficientConstraints { rank: usize, rows: usize },
    /// An iteration hit its cap without meeting its tolerance.
    NoConvergence {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },
    /// Pairwise marginals disagree on a shared one-way marginal.
    InconsistentMarginals { max_gap: f64 },
    /// Too many bootstrap replicates failed to fit.
    UnreliableBootstrap { failures: usize, total: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::UnknownVariable(name) => write!(f, "unknown variable `{name}`"),
            Error::InvalidSpace(msg) => write!(f, "invalid factor space: {msg}"),
            Error::LevelOutOfRange { variable, level } => {
                write!(f, "level {level} out of range for variable `{variable}`")
            }
            Error::KindMismatch { expected } => {
                write!(f, "table kind mismatch: operation requires {expected}")
            }
            Error::Spec(msg) => write!(f, "invalid specification: {msg}"),
            Error::NonPositiveCell { index, value } => {
                write!(f, "cell {index} must be strictly positive (value {value:e})")
            }
            Error::DegenerateConditioning => {
                write!(f, "conditioning slice has zero probability mass")
            }
            Error::DegenerateTable => write!(f, "table has zero total mass"),
            Error::NotPositiveDefinite { pivot, value } => write!(
                f,
                "matrix is not positive definite (pivot {pivot}, value {value:e})"
            ),
            Error::Singular { condition } => {
                write!(f, "singular system (condition estimate {condition:e})")
            }
            Error::RankDeficientConstraints { rank, rows } => {
                write!(f, "constraint matrix has rank {rank} < {rows} rows")
            }
            Error::NoConvergence {
                iterations,
                residual,
                ..
            } => write!(
                f,
                "no convergence after {iterations} iterations (residual {residual:e})"
            ),
            Error::InconsistentMarginals { max_gap } => write!(
                f,
                "pairwise marginals disagree on shared one-way marginals (max gap {max_gap:e})"
            ),
            Error::UnreliableBootstrap { failures, total } => {
                write!(f, "{failures} of {total} bootstrap replicates failed to fit")
            }
        }
    }
}

impl core::error::Error for Error {}
