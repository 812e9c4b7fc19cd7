use thiserror::Error;

use crate::expr::{EvalError, ParseError};
use crate::special::SpecialError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error("{name} {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("psi is not strictly increasing near t = {t}")]
    NotIncreasing { t: f64 },
    #[error("supplied psi' = {supplied} disagrees with finite difference {finite_difference} at t = {t}")]
    DerivativeMismatch { t: f64, supplied: f64, finite_difference: f64 },
    #[error("{what} is not finite at t = {t}")]
    NonFinite { what: &'static str, t: f64 },
    #[error("t = {t} is not a mesh node")]
    NotOnMesh { t: f64 },
    #[error("node index {index} out of range (mesh has {len} nodes)")]
    NodeOutOfRange { index: usize, len: usize },
    #[error("grid functions are defined on different grids or fractional orders")]
    GridMismatch,
    #[error("node {node} lies in the differentiation exclusion zone (first admissible node {first})")]
    ExclusionZone { node: usize, first: usize },
    #[error("leading power u^{exponent} is not integrable")]
    NotIntegrable { exponent: f64 },
    #[error("function is not in the weighted space: leading power u^{exponent} blows up after weighting")]
    NotInWeightedSpace { exponent: f64 },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("root bracketing failed at node {node}: {reason}")]
    Bracketing { node: usize, reason: String },
    #[error("solver did not converge at ladder level {level} (eps = {eps})")]
    LadderNotConverged { level: usize, eps: f64 },
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// Short machine-readable category used in JSON error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse",
            Error::Eval(_) => "eval",
            Error::Special(_) => "special_function",
            Error::InvalidParameter { .. } => "validation",
            Error::NotIncreasing { .. } | Error::DerivativeMismatch { .. } => "psi_validation",
            Error::NonFinite { .. } => "non_finite",
            Error::NotOnMesh { .. } | Error::NodeOutOfRange { .. } => "mesh",
            Error::GridMismatch => "grid_mismatch",
            Error::ExclusionZone { .. } => "exclusion_zone",
            Error::NotIntegrable { .. } | Error::NotInWeightedSpace { .. } => "function_space",
            Error::Hypothesis(_) => "hypothesis",
            Error::Precondition(_) => "precondition",
            Error::Bracketing { .. } => "bracketing",
            Error::LadderNotConverged { .. } => "non_convergence",
        }
    }
}
