//! Independent checks of the solver: a discretized agent dynamic program,
//! exact deviation payoffs, a grid LP for the relaxed problem, and residuals
//! of the indifference conditions.

pub mod deviation;
pub mod dp;
pub mod lp;
pub mod residuals;

pub use deviation::{
    best_deviation_scan, deviation_profile, renewal_payoff, strategy_payoff, DeviationFamily, DeviationOptimum,
};
pub use dp::{agent_dp, DPConfig, DPSolution};
pub use lp::{relaxed_lp, LpSolution};
pub use residuals::{
    absorbing_shirk_check, verify_binding_constraints, verify_fixed_point, verify_hjb,
    FixedPointKind, GridSpec, HjbReport, ResidualReport,
};
