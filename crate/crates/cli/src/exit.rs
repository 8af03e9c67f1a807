//! Exit statuses and the mapping from solver errors onto them.

use std::fmt;

use congested_ot_core::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExitKind {
    Ok = 0,
    /// Malformed input, violated invariant or incompatible options.
    Validation = 1,
    NonConvergence = 2,
    /// A structural assumption needed by the requested method does not hold.
    Gate = 3,
}

impl ExitKind {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn of(err: &Error) -> ExitKind {
        match err {
            Error::Invalid(_)
            | Error::Unbalanced { .. }
            | Error::NonPositiveQuadCost { .. }
            | Error::ShapeMismatch { .. }
            | Error::NonIntegral { .. }
            | Error::EnumerationCap { .. }
            | Error::InvalidStep { .. }
            | Error::BadCoordinate { .. } => ExitKind::Validation,
            Error::CyclingGuard { .. }
            | Error::NotConverged { .. }
            | Error::PivotVanished { .. }
            | Error::Linalg(_) => ExitKind::NonConvergence,
            Error::Gate { .. } | Error::NonInterior { .. } => ExitKind::Gate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ExitKind, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
        }
    }

    pub fn context(self, what: &str) -> Self {
        CliError {
            kind: self.kind,
            message: format!("{what}: {}", self.message),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::new(ExitKind::of(&e), e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}
