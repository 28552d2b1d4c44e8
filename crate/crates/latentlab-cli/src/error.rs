//! Failure categories, exit codes, and the machine-readable error line.
//!
//! Every failure path funnels into [`CliError`], which fixes both the process
//! exit code and the one-line JSON report printed to stderr. Nothing else is
//! ever written to stderr, so callers can parse it blindly.

use std::fmt;

/// What went wrong, coarsely: decides the exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid configuration, flags, or input documents. Exit 2.
    Config(String),
    /// The math gave out: degenerate data, vanishing directions, training
    /// that never reached its floor. Exit 3.
    Degeneracy(String),
    /// Filesystem trouble. Exit 4.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Degeneracy(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Degeneracy(_) => "degeneracy",
            CliError::Io(_) => "io",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Degeneracy(m) | CliError::Io(m) => m,
        }
    }

    /// The single line printed to stderr on failure.
    pub fn to_stderr_line(&self) -> String {
        serde_json::json!({
            "category": self.category(),
            "message": self.message(),
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.category(), self.message())
    }
}

impl std::error::Error for CliError {}

impl From<latentlab::Error> for CliError {
    fn from(err: latentlab::Error) -> Self {
        use latentlab::Error::*;
        match &err {
            // The caller handed us something malformed or self-contradictory.
            DimensionMismatch { .. } | InvalidModel(_) | InvalidConfig(_) | UnknownAttribute(_)
            | AttributeMismatch { .. } | NoAttributePairs | Serialization(_) => {
                CliError::Config(err.to_string())
            }
            // The inputs were fine; the numbers were not.
            ZeroGradient { .. } | DegenerateData | NonFiniteLoss { .. } | EmptySampleSet(_)
            | DegenerateCombination(_) | DegenerateProjection(_) | InfeasibleAngles(_)
            | BiasUnreachable(_) | ClassifierTrainingFailed { .. } | EditAborted { .. } => {
                CliError::Degeneracy(err.to_string())
            }
        }
    }
}

/// Wrap an I/O error with what we were doing at the time.
pub fn io_error(context: &str, err: std::io::Error) -> CliError {
    CliError::Io(format!("{context}: {err}"))
}
