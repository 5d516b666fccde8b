//! Process-level error classes; each maps to a distinct exit code.

use std::fmt;

/// Exit code 0 is success; these are the failure classes.
#[derive(Debug)]
pub enum CliError {
    /// Unusable configuration or input file: bad JSON, unknown preset or
    /// field, out-of-range parameter, unwritable output directory,
    /// malformed CSV input. Exit code 2.
    Config(String),
    /// The configured run itself failed: numerical breakdown, exhausted
    /// budget, an optimizer that cannot reach its target, or an artifact
    /// that cannot be written mid-run. Exit code 3.
    Solver(String),
    /// A requested comparison ran and exceeded its tolerance. Exit code 4.
    Comparison(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Solver(_) => 3,
            Self::Comparison(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "config error: {m}"),
            Self::Solver(m) => write!(f, "solver error: {m}"),
            Self::Comparison(m) => write!(f, "comparison failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Library errors raised while an experiment is executing.
///
/// Precondition violations are configuration mistakes even when the
/// library only notices them mid-run (a readout grid off the step lattice,
/// say); genuine numerical or IO breakdowns are solver failures.
pub fn from_run(e: eetsim::Error) -> CliError {
    match e {
        eetsim::Error::InvalidInput(_) | eetsim::Error::Unsupported(_) | eetsim::Error::Parse(_) => {
            CliError::Config(e.to_string())
        }
        eetsim::Error::NumericalFailure(_)
        | eetsim::Error::BudgetExceeded(_)
        | eetsim::Error::Io(_) => CliError::Solver(e.to_string()),
    }
}
