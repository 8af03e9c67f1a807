use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::audit::Assumption;

/// Failures of the dense kernels in [`crate::linalg`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("matrix is singular at pivot {pivot}")]
    Singular { pivot: usize },
}

/// One violated instance invariant.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    #[error("dimension must be positive: {field}")]
    EmptyDimension { field: &'static str },
    #[error("dimension mismatch in {field}: expected {expected}, found {found}")]
    DimensionMismatch {
        field: &'static str,
        expected: String,
        found: String,
    },
    #[error("nonpositive marginal {field}[{index}] = {value}")]
    NonPositiveMarginal {
        field: &'static str,
        index: usize,
        value: f64,
    },
    #[error("negative cost {field}[{row}][{col}] = {value}")]
    NegativeCost {
        field: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("negative penalty weight {field}[{index}] = {value}")]
    NegativePenalty {
        field: &'static str,
        index: usize,
        value: f64,
    },
    #[error("non-finite value in {field}")]
    NonFinite { field: &'static str },
    #[error("instance too large: NL = {nl} exceeds the cap of {cap}")]
    TooLarge { nl: usize, cap: usize },
}

/// Every invariant violated by an instance, in discovery order.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationErrors(pub Vec<ValidationError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl core::error::Error for ValidationErrors {}

/// Which rank-1 correction of the inverse update failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankOneUpdate {
    /// Supply penalty of type `i` (0-based).
    Supply(usize),
    /// Capacity penalty of school `j` (0-based).
    Capacity(usize),
}

impl fmt::Display for RankOneUpdate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankOneUpdate::Supply(i) => write!(f, "supply update i={}", i + 1),
            RankOneUpdate::Capacity(j) => write!(f, "capacity update j={}", j + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    Invalid(ValidationErrors),
    #[error("instance is unbalanced (sum mu - sum nu = {imbalance})")]
    Unbalanced { imbalance: f64 },
    #[error("quadratic cost a[{row}][{col}] = {value} must be strictly positive")]
    NonPositiveQuadCost { row: usize, col: usize, value: f64 },
    #[error("plan shape {found:?} does not match instance shape {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("marginal {field}[{index}] = {value} is not integral")]
    NonIntegral {
        field: &'static str,
        index: usize,
        value: f64,
    },
    #[error("total mass {mass} exceeds the enumeration cap of {cap}")]
    EnumerationCap { mass: u64, cap: u64 },
    #[error("{assumption} does not hold: {detail}")]
    Gate { assumption: Assumption, detail: String },
    #[error("simplex cycling guard tripped after {iterations} pivots")]
    CyclingGuard { iterations: usize },
    #[error("no convergence within {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("plan is not interior: cell ({row}, {col}) = {value:e}")]
    NonInterior { row: usize, col: usize, value: f64 },
    #[error("Sherman-Morrison pivot vanished at {update}: 1 + w'A^-1 w = {value:e}")]
    PivotVanished { update: RankOneUpdate, value: f64 },
    #[error("finite-difference step must be nonzero and finite, got {step}")]
    InvalidStep { step: f64 },
    #[error("parameter coordinate out of range: {detail}")]
    BadCoordinate { detail: String },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

impl From<ValidationErrors> for Error {
    fn from(v: ValidationErrors) -> Self {
        Error::Invalid(v)
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
