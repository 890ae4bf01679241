//! Exit codes: 0 ok, 2 infeasible, 3 non-convergence, 4 bad config.

use inspect_core::Error;

pub const INFEASIBLE: i32 = 2;
pub const NON_CONVERGENCE: i32 = 3;
pub const BAD_CONFIG: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
    /// Structured detail printed to stderr after the message.
    pub detail: Option<String>,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: BAD_CONFIG,
            message: message.into(),
            detail: None,
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError::config(message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Infeasible { .. }
            | Error::WrongRegime(_)
            | Error::Unsupported(_)
            | Error::InfeasibleConstraint(_)
            | Error::DivergentCost(_) => INFEASIBLE,
            Error::NonConvergence(_) => NON_CONVERGENCE,
            Error::InvalidParams(_)
            | Error::InvalidPolicy(_)
            | Error::InvalidStrategy(_)
            | Error::PreconditionViolated(_) => BAD_CONFIG,
        };
        let detail = match &e {
            Error::Infeasible {
                report: Some(report),
                ..
            } => serde_json::to_string_pretty(report).ok(),
            _ => None,
        };
        CliError {
            code,
            message: e.to_string(),
            detail,
        }
    }
}
