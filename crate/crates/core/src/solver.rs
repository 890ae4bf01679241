//! Schedule parameters of the optimal inspection policy.
//!
//! Closed forms are used where they exist. The period under imperfect
//! detection, the breakdown-rate cutoff, and the atom probability of the
//! delayed-exponential policy are boundaries of monotone conditions and are
//! found by bisection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expsum::ExpSum;
use crate::model::{
    check_assumptions, classify_regime, derive, AssumptionReport, DerivedParams, Detectability,
    ModelParams, Regime,
};
use crate::payoffs::{
    policy_cost, u_shirk_work, u_shirk_work_expsum, u_shirk_work_shirk,
    u_shirk_work_shirk_expsum, InspectionPolicy,
};
use crate::roots::{bisect, bisect_predicate, expand_upper, ARG_TOL};

/// Which deviation holds the agent exactly at the on-path value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingDeviation {
    ShirkToEnd,
    ShirkThenWork,
    WorkThenShirk,
    ShirkWorkShirk,
    /// Shirking for an instant right after an inspection.
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySolution {
    pub regime: Regime,
    pub policy: InspectionPolicy,
    #[serde(with = "crate::serde_ext::opt_ext_f64", default)]
    pub tau_star: Option<f64>,
    /// Time at which the binding shirk-then-work deviation returns to work;
    /// infinite when shirking to the end binds.
    #[serde(with = "crate::serde_ext::opt_ext_f64", default)]
    pub t_bar: Option<f64>,
    pub gamma_star: Option<f64>,
    pub tau_hat: Option<f64>,
    pub pi_star: Option<f64>,
    pub lambda_bar_b: Option<f64>,
    pub cost: f64,
    pub binding_deviation: BindingDeviation,
    pub assumptions: AssumptionReport,
    /// Defining conditions re-evaluated at the solution; all near zero.
    pub residuals: BTreeMap<String, f64>,
}

/// Period of a periodic policy together with the return-to-work time of
/// the binding deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicSolution {
    pub tau_star: f64,
    pub t_bar: f64,
    pub binding: BindingDeviation,
}

fn require_a1(d: &DerivedParams) -> Result<()> {
    if d.U0 > d.U1 {
        Ok(())
    } else {
        Err(Error::Infeasible {
            reason: format!("U0 = {} must exceed U1 = {}", d.U0, d.U1),
            report: None,
        })
    }
}

/// Period from perfect inspections when shirking until the inspection binds:
/// `exp(-lambda0 tau) = (U0 - U1)/U0`.
fn perfect_shirk_to_end_period(d: &DerivedParams) -> f64 {
    -(d.mu).ln() / d.lambda0
}

/// Optimal period under perfect inspections when `lambda1 > lambda0`.
pub fn solve_perfect_innovation(d: &DerivedParams) -> Result<PeriodicSolution> {
    if d.lambda1 <= d.lambda0 || d.rates_degenerate() {
        return Err(Error::WrongRegime(format!(
            "periodic perfect-inspection solution needs lambda1 > lambda0, got {} <= {}",
            d.lambda1, d.lambda0
        )));
    }
    require_a1(d)?;
    let (l0, l1) = (d.lambda0, d.lambda1);
    if d.U1 * l1 <= d.U0 * l0 {
        return Ok(PeriodicSolution {
            tau_star: perfect_shirk_to_end_period(d),
            t_bar: f64::INFINITY,
            binding: BindingDeviation::ShirkToEnd,
        });
    }
    let ratio = (l1 - l0) / l1;
    let t_bar = -ratio.ln() / l0;
    let inner = l0 * (d.U0 - d.U1) / (d.U1 * (l1 - l0));
    let log_x = ratio.ln() + (l0 / l1) * inner.ln();
    Ok(PeriodicSolution {
        tau_star: -log_x / l0,
        t_bar,
        binding: BindingDeviation::ShirkThenWork,
    })
}

/// Hazard of the optimal exponential policy under perfect inspections.
pub fn solve_perfect_maintenance(d: &DerivedParams) -> Result<f64> {
    if d.lambda0 <= d.lambda1 || d.rates_degenerate() {
        return Err(Error::WrongRegime(format!(
            "exponential perfect-inspection solution needs lambda0 > lambda1, got {} <= {}",
            d.lambda0, d.lambda1
        )));
    }
    require_a1(d)?;
    Ok(d.lambda0 * (d.U0 - d.U1) / d.U1)
}

fn finite_delta(delta: Detectability) -> Result<f64> {
    delta
        .finite()
        .ok_or_else(|| Error::WrongRegime("needs a finite detectability rate".into()))
}

/// Length of the inspection-free interval of the delayed-exponential policy.
pub fn solve_tau_hat(d: &DerivedParams, delta: Detectability) -> Result<f64> {
    let delta = finite_delta(delta)?;
    if d.lambda0 <= d.lambda1 || d.rates_degenerate() {
        return Err(Error::WrongRegime(format!(
            "the inspection-free interval is finite only when lambda0 > lambda1, got {} <= {}",
            d.lambda0, d.lambda1
        )));
    }
    Ok((delta / (d.lambda0 - d.lambda1)).ln_1p() / delta)
}

/// Hazard in the exponential phase that leaves the agent indifferent
/// between working and shirking.
pub fn solve_gamma_star_imperfect(d: &DerivedParams, delta: Detectability) -> Result<f64> {
    let delta = finite_delta(delta)?;
    let denom = d.U1 * (d.lambda0 + delta) - d.U0 * d.lambda0;
    if !(denom > 0.0) {
        return Err(Error::Infeasible {
            reason: format!(
                "detectability too low: U1 (lambda0 + delta) - U0 lambda0 = {denom} <= 0"
            ),
            report: None,
        });
    }
    Ok((d.U0 - d.U1) * d.lambda0 * (d.lambda0 + delta) / denom)
}

/// Slack used when comparing a deviation payoff against `U1`.
fn value_eps(d: &DerivedParams) -> f64 {
    64.0 * f64::EPSILON * (d.U0.abs() + d.U1.abs())
}

/// Best shirk-then-work payoff against a periodic inspection at `tau`:
/// `(argmax, max)` over `t` in `[0, tau]`, preferring the latest maximizer.
pub fn max_shirk_work(tau: f64, d: &DerivedParams, delta: Detectability) -> (f64, f64) {
    let s = u_shirk_work_expsum(tau, d, delta);
    let (t, v) = s.maximize(0.0, tau, 1e-9 * d.U1.abs().max(1.0));
    // the sum is only the right limit at zero when detection is perfect
    if t == 0.0 {
        return (0.0, u_shirk_work(0.0, tau, d, delta));
    }
    (t, v)
}

/// Longest period under which no shirk-then-work deviation beats `U1`.
pub fn solve_tau_star_imperfect(d: &DerivedParams, delta: Detectability) -> Result<PeriodicSolution> {
    finite_delta(delta)?;
    require_a1(d)?;
    let eps = value_eps(d);
    let exceeds = |tau: f64| {
        let s: ExpSum = u_shirk_work_expsum(tau, d, delta);
        let (_, v) = s.maximize(0.0, tau, 0.0);
        v > d.U1 + eps
    };
    let start = 1.0 / d.lambda1.max(d.lambda0);
    let hi = expand_upper(exceeds, start, 1e6 * start)?;
    let (lo, _) = bisect_predicate(exceeds, 0.0, hi, ARG_TOL)?;
    if lo <= 0.0 {
        return Err(Error::NonConvergence(
            "no positive period keeps the agent working".into(),
        ));
    }
    let (t_bar, _) = max_shirk_work(lo, d, delta);
    let binding = if t_bar >= lo * (1.0 - 1e-9) {
        BindingDeviation::ShirkToEnd
    } else if t_bar <= lo * 1e-9 {
        BindingDeviation::Local
    } else {
        BindingDeviation::ShirkThenWork
    };
    let t_bar = if binding == BindingDeviation::ShirkToEnd {
        f64::INFINITY
    } else {
        t_bar
    };
    Ok(PeriodicSolution {
        tau_star: lo,
        t_bar,
        binding,
    })
}

#[allow(non_snake_case)]
fn threshold_gap(lambda0: f64, lambda1: f64, u0: f64, U1: f64, delta: f64) -> f64 {
    let U0 = u0 / lambda0;
    let d = DerivedParams::from_values(lambda0, lambda1, U0, U1);
    let tau_hat = (delta / (lambda0 - lambda1)).ln_1p() / delta;
    u_shirk_work(tau_hat, tau_hat, &d, Detectability::Finite(delta)) - U1
}

/// Breakdown rate above which the delayed-exponential policy is optimal.
///
/// The cutoff is found by moving `lambda_b` with the flow utilities, the
/// breakthrough rate, the discount rate and the detectability held fixed,
/// so `U0 = u0 / (lambda_b + r)` moves with it. The value of `lambda_b` in
/// `params` is ignored.
pub fn solve_lambda_bar_b(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let delta = finite_delta(params.delta)?;
    let lambda1 = params.lambda_g + params.r;
    let big_u1 = params.u1 / lambda1;
    let f = |l0: f64| threshold_gap(l0, lambda1, params.u0, big_u1, delta);
    let lo = lambda1 * (1.0 + 1e-6);
    if !(f(lo) > 0.0) {
        return Err(Error::NonConvergence(format!(
            "threshold condition already fails next to lambda1 (gap {})",
            f(lo)
        )));
    }
    let mut hi = lo;
    loop {
        hi *= 2.0;
        if hi > lambda1 * 2f64.powi(40) {
            return Err(Error::NonConvergence(
                "no sign change of the threshold condition".into(),
            ));
        }
        if f(hi) < 0.0 {
            break;
        }
    }
    let l0 = bisect(f, lo, hi, ARG_TOL)?;
    Ok(l0 - params.r)
}

/// Smallest atom probability at the end of the inspection-free interval
/// under which no shirk-work-shirk deviation beats `U1`.
pub fn solve_pi_star(d: &DerivedParams, delta: Detectability, rho: f64) -> Result<f64> {
    if delta.is_perfect() {
        return Ok(0.0);
    }
    let tau_hat = solve_tau_hat(d, delta)?;
    let eps = value_eps(d);
    if u_shirk_work(tau_hat, tau_hat, d, delta) > d.U1 + eps && rho == 0.0 {
        return Err(Error::WrongRegime(
            "a sure inspection at the end of the inspection-free interval does not deter shirking; periodic inspection is optimal".into(),
        ));
    }
    let ok = |pi: f64| {
        let s = u_shirk_work_shirk_expsum(tau_hat, pi, d, delta, rho);
        let (_, v) = s.maximize(0.0, tau_hat, 0.0);
        v <= d.U1 + eps
    };
    if ok(0.0) {
        return Ok(0.0);
    }
    if !ok(1.0) {
        return Err(Error::NonConvergence(
            "no atom probability in [0, 1] deters shirking".into(),
        ));
    }
    let (_, hi) = bisect_predicate(ok, 0.0, 1.0, ARG_TOL)?;
    Ok(hi)
}

/// The atom probability that solves `U_SWS(tau_hat) = U1`, which is linear
/// in the probability.
pub fn pi_from_endpoint(d: &DerivedParams, delta: Detectability, rho: f64) -> Result<f64> {
    let tau_hat = solve_tau_hat(d, delta)?;
    let a = u_shirk_work_shirk(tau_hat, tau_hat, 0.0, d, delta, rho);
    let b = u_shirk_work_shirk(tau_hat, tau_hat, 1.0, d, delta, rho);
    Ok((a - d.U1) / (a - b))
}

/// Hazard of the optimal exponential policy when evidence fades fast enough
/// (`rho + lambda_g >= delta + lambda_b`).
pub fn solve_recovery_exponential(params: &ModelParams) -> Result<f64> {
    let d = derive(params)?;
    let delta = finite_delta(params.delta)?;
    let rho = params.rho;
    if rho + params.lambda_g < delta + params.lambda_b {
        return Err(Error::WrongRegime(format!(
            "needs rho + lambda_g >= delta + lambda_b, got {} < {}",
            rho + params.lambda_g,
            delta + params.lambda_b
        )));
    }
    let denom = d.U1 * (d.lambda0 + delta) - d.U0 * d.lambda0;
    if !(denom > 0.0) {
        return Err(Error::infeasible(
            format!("U1 (lambda0 + delta) - U0 lambda0 = {denom} <= 0"),
            check_assumptions(params),
        ));
    }
    Ok(d.lambda0 * (d.lambda1 + rho) * (d.U0 - d.U1) / denom)
}

/// Margins of the sufficient conditions under which the no-recovery
/// solution stays optimal with recovery rate `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    /// `delta + lambda0 - 2 lambda1 - 2 rho`.
    pub local_curvature: f64,
    /// `U0 lambda0 - lambda1 U1 - rho U1 - exp(-delta tau) (lambda0 + delta - lambda1 - rho) U1`.
    pub global_deviation: f64,
    /// `lambda0 (U0 - U1)/U1 - rho`, present when `lambda0 > lambda1`.
    pub recovery_bound: Option<f64>,
    pub all_hold: bool,
}

pub fn recovery_robustness(params: &ModelParams, tau_star: f64) -> Result<RobustnessReport> {
    let d = derive(params)?;
    let delta = finite_delta(params.delta)?;
    let rho = params.rho;
    let (l0, l1) = (d.lambda0, d.lambda1);
    let local_curvature = delta + l0 - 2.0 * l1 - 2.0 * rho;
    let global_deviation = d.U0 * l0
        - l1 * d.U1
        - rho * d.U1
        - (-delta * tau_star).exp() * (l0 + delta - l1 - rho) * d.U1;
    let recovery_bound = (l0 > l1).then(|| l0 * (d.U0 - d.U1) / d.U1 - rho);
    let all_hold =
        local_curvature > 0.0 && global_deviation > 0.0 && recovery_bound.is_none_or(|m| m > 0.0);
    Ok(RobustnessReport {
        local_curvature,
        global_deviation,
        recovery_bound,
        all_hold,
    })
}

fn periodic_solution(
    regime: Regime,
    assumptions: AssumptionReport,
    d: &DerivedParams,
    ps: PeriodicSolution,
    mut residuals: BTreeMap<String, f64>,
    delta: Detectability,
) -> Result<PolicySolution> {
    let policy = InspectionPolicy::Periodic { tau: ps.tau_star };
    let cost = policy_cost(&policy, d)?;
    let (_, best) = max_shirk_work(ps.tau_star, d, delta);
    residuals.insert("period_best_deviation_gap".into(), best - d.U1);
    Ok(PolicySolution {
        regime,
        policy,
        tau_star: Some(ps.tau_star),
        t_bar: Some(ps.t_bar),
        gamma_star: None,
        tau_hat: None,
        pi_star: None,
        lambda_bar_b: None,
        cost,
        binding_deviation: ps.binding,
        assumptions,
        residuals,
    })
}

fn exponential_solution(
    regime: Regime,
    assumptions: AssumptionReport,
    d: &DerivedParams,
    gamma: f64,
    residuals: BTreeMap<String, f64>,
) -> Result<PolicySolution> {
    let policy = InspectionPolicy::Exponential { gamma };
    let cost = policy_cost(&policy, d)?;
    Ok(PolicySolution {
        regime,
        policy,
        tau_star: None,
        t_bar: None,
        gamma_star: Some(gamma),
        tau_hat: None,
        pi_star: None,
        lambda_bar_b: None,
        cost,
        binding_deviation: BindingDeviation::WorkThenShirk,
        assumptions,
        residuals,
    })
}

/// Optimal policy without evidence recovery.
fn solve_without_recovery(
    params: &ModelParams,
    d: &DerivedParams,
    regime: Regime,
    report: AssumptionReport,
) -> Result<PolicySolution> {
    let mut residuals = BTreeMap::new();
    let delta = params.delta;
    let Detectability::Finite(dval) = delta else {
        return match regime {
            Regime::Innovation => {
                let ps = solve_perfect_innovation(d)?;
                periodic_solution(regime, report, d, ps, residuals, delta)
            }
            Regime::Neutral => {
                let ps = PeriodicSolution {
                    tau_star: perfect_shirk_to_end_period(d),
                    t_bar: f64::INFINITY,
                    binding: BindingDeviation::ShirkToEnd,
                };
                periodic_solution(regime, report, d, ps, residuals, delta)
            }
            Regime::Maintenance => {
                let gamma = solve_perfect_maintenance(d)?;
                residuals.insert(
                    "hazard_indifference".into(),
                    gamma * d.U1 - d.lambda0 * (d.U0 - d.U1),
                );
                exponential_solution(regime, report, d, gamma, residuals)
            }
        };
    };
    if !report.a2b_holds {
        return Err(Error::Unsupported(format!(
            "detectability {dval} violates the curvature condition (margin {}); local deviations may bind and the policy classes here are not known to be optimal",
            report.margins.a2b
        )));
    }
    if d.lambda0 <= d.lambda1 || d.rates_degenerate() {
        let ps = solve_tau_star_imperfect(d, delta)?;
        return periodic_solution(regime, report, d, ps, residuals, delta);
    }
    let tau_hat = solve_tau_hat(d, delta)?;
    let lambda_bar_b = solve_lambda_bar_b(params).ok();
    residuals.insert(
        "tau_hat_defining_eq".into(),
        (-dval * tau_hat).exp() - (d.lambda0 - d.lambda1) / (d.lambda0 - d.lambda1 + dval),
    );
    let threshold = u_shirk_work(tau_hat, tau_hat, d, delta) - d.U1;
    if threshold >= 0.0 {
        let ps = solve_tau_star_imperfect(d, delta)?;
        let mut sol = periodic_solution(regime, report, d, ps, residuals, delta)?;
        sol.tau_hat = Some(tau_hat);
        sol.lambda_bar_b = lambda_bar_b;
        return Ok(sol);
    }
    let gamma = solve_gamma_star_imperfect(d, delta)?;
    let pi = solve_pi_star(d, delta, 0.0)?;
    let pi_lin = pi_from_endpoint(d, delta, 0.0)?;
    residuals.insert(
        "hazard_defining_eq".into(),
        gamma * (d.U1 * (d.lambda0 + dval) - d.U0 * d.lambda0)
            - (d.U0 - d.U1) * d.lambda0 * (d.lambda0 + dval),
    );
    residuals.insert(
        "atom_endpoint_gap".into(),
        u_shirk_work_shirk(tau_hat, tau_hat, pi, d, delta, 0.0) - d.U1,
    );
    residuals.insert("atom_vs_endpoint_solve".into(), pi - pi_lin);
    let policy = InspectionPolicy::DelayedExponential {
        tau_hat,
        pi,
        gamma,
    };
    let cost = policy_cost(&policy, d)?;
    Ok(PolicySolution {
        regime,
        policy,
        tau_star: None,
        t_bar: None,
        gamma_star: Some(gamma),
        tau_hat: Some(tau_hat),
        pi_star: Some(pi),
        lambda_bar_b,
        cost,
        binding_deviation: BindingDeviation::ShirkWorkShirk,
        assumptions: report,
        residuals,
    })
}

/// Cost-minimizing incentive-compatible renewal policy.
pub fn solve_optimal(params: &ModelParams) -> Result<PolicySolution> {
    let d = derive(params)?;
    let report = check_assumptions(params);
    let regime = classify_regime(params);
    if !report.a1_holds {
        return Err(Error::infeasible(
            "shirking forever is not more attractive than working (U0 <= U1): no inspections needed, no incentive problem to solve",
            report,
        ));
    }
    if !report.a2a_holds {
        return Err(Error::infeasible(
            "detectability too low for any inspection policy to deter shirking",
            report,
        ));
    }
    if params.rho == 0.0 {
        return solve_without_recovery(params, &d, regime, report);
    }
    if params.delta.is_perfect() {
        return Err(Error::Unsupported(
            "evidence recovery under perfect detection".into(),
        ));
    }
    let delta = params.delta.rate();
    if params.rho + params.lambda_g >= delta + params.lambda_b {
        let gamma = solve_recovery_exponential(params)?;
        return exponential_solution(regime, report, &d, gamma, BTreeMap::new());
    }
    let base = params.with_rho(0.0);
    let sol = solve_without_recovery(&base, &d, regime, report)?;
    let tau = sol.tau_star.or(sol.tau_hat).unwrap_or(0.0);
    let rob = recovery_robustness(params, tau)?;
    if rob.all_hold {
        Ok(sol)
    } else {
        Err(Error::Unsupported(format!(
            "recovery rate {} outside the range where the no-recovery policy is known to stay optimal ({rob:?})",
            params.rho
        )))
    }
}
