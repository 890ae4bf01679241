use thiserror::Error;

use crate::model::AssumptionReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("infeasible: {reason}")]
    Infeasible {
        reason: String,
        report: Option<Box<AssumptionReport>>,
    },
    #[error("wrong regime: {0}")]
    WrongRegime(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("divergent cost: E exp(-lambda1 T) = {0} >= 1")]
    DivergentCost(f64),
    #[error("constraint cannot be met: {0}")]
    InfeasibleConstraint(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn infeasible(reason: impl Into<String>, report: AssumptionReport) -> Self {
        Error::Infeasible {
            reason: reason.into(),
            report: Some(Box::new(report)),
        }
    }
}
