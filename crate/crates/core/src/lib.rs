//! Optimal inspection schedules for a principal who monitors an agent whose
//! effort changes the arrival rates of project-ending breakthroughs and
//! breakdowns.
//!
//! The crate solves for the cost-minimizing incentive-compatible renewal
//! policy (periodic, exponential, or delayed-exponential) and checks the
//! answer with independent machinery: a discretized dynamic program for the
//! agent, an exhaustive grid LP for the relaxed problem, residual checks of
//! the indifference conditions, and Monte Carlo simulation.

pub mod error;
pub mod expsum;
pub mod model;
pub mod oracle;
pub mod payoffs;
pub mod roots;
mod serde_ext;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
pub use model::{
    check_assumptions, classify_regime, derive, microfound, AssumptionReport, DerivedParams,
    Detectability, Microfoundation, ModelParams, Regime,
};
pub use payoffs::{ActionStrategy, InspectionPolicy};
