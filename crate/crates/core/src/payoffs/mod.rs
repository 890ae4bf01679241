//! Closed-form agent payoffs, losses, and principal costs.

mod policy;
mod strategy;

pub use policy::{policy_cost, GapLaw, InspectionPolicy, Tail};
pub use strategy::{
    effective_discount, passage_probability, step_passage, ActionStrategy, Segment,
};

use crate::expsum::ExpSum;
use crate::model::{DerivedParams, Detectability};

/// Payoff from shirking on `[0, t)` and working on `[t, tau)` when the next
/// inspection comes at `tau`. Times past `tau` are clamped to `tau`.
pub fn u_shirk_work(t: f64, tau: f64, d: &DerivedParams, delta: Detectability) -> f64 {
    let t = t.clamp(0.0, tau.max(0.0));
    let (l0, l1) = (d.lambda0, d.lambda1);
    let e0 = (-l0 * t).exp();
    let work_part = 1.0 - (-l1 * (tau - t)).exp();
    match delta {
        Detectability::Finite(delta) => {
            d.U0 * (1.0 - e0)
                + d.U1 * e0 * (1.0 - (-l1 * (tau - t)).exp() * (1.0 - (-delta * t).exp()))
        }
        Detectability::Perfect => {
            if t == 0.0 {
                d.U1
            } else {
                d.U0 * (1.0 - e0) + e0 * d.U1 * work_part
            }
        }
    }
}

/// `u_shirk_work(., tau)` as a sum of exponentials in `t`, valid on `(0, tau]`.
pub fn u_shirk_work_expsum(tau: f64, d: &DerivedParams, delta: Detectability) -> ExpSum {
    let (l0, l1) = (d.lambda0, d.lambda1);
    let e = (-l1 * tau).exp();
    let mut terms = vec![
        (d.U0, 0.0),
        (-(d.U0 - d.U1), -l0),
        (-d.U1 * e, l1 - l0),
    ];
    if let Detectability::Finite(delta) = delta {
        terms.push((d.U1 * e, l1 - l0 - delta));
    }
    ExpSum::new(terms)
}

/// Payoff from working on `[0, t)` and shirking on `[t, tau)` when the next
/// inspection comes at `tau`.
pub fn u_work_shirk(t: f64, tau: f64, d: &DerivedParams, delta: Detectability) -> f64 {
    let t = t.max(0.0);
    if t >= tau {
        return d.U1;
    }
    let s = tau - t;
    let h = match delta {
        Detectability::Finite(delta) => {
            d.U0 * (1.0 - (-d.lambda0 * s).exp())
                - d.U1 * (1.0 - (-(d.lambda0 + delta) * s).exp())
        }
        Detectability::Perfect => d.U0 * (1.0 - (-d.lambda0 * s).exp()) - d.U1,
    };
    d.U1 + (-d.lambda1 * t).exp() * h
}

/// Slope of the exponential-phase value `V(q) = U1 + (q - 1) c`; zero under
/// perfect detection.
pub fn exp_phase_value_slope(d: &DerivedParams, delta: Detectability) -> f64 {
    match delta {
        Detectability::Finite(delta) => (d.U0 - d.U1) * d.lambda0 / delta,
        Detectability::Perfect => 0.0,
    }
}

/// Agent value at the start of the exponential phase with passage
/// probability `q`, when the hazard makes the agent indifferent at `q = 1`.
pub fn exp_phase_value(q: f64, d: &DerivedParams, delta: Detectability) -> f64 {
    d.U1 + (q - 1.0) * exp_phase_value_slope(d, delta)
}

/// Passage probability at `tau_hat` after shirking on `[0, t)` and working
/// on `[t, tau_hat)`.
fn passage_after_shirk_work(t: f64, tau_hat: f64, delta: Detectability, rho: f64) -> f64 {
    let caught = 1.0 - delta.survival(t);
    1.0 - caught * (-rho * (tau_hat - t)).exp()
}

/// Payoff from shirking on `[0, t)`, working on `[t, tau_hat)`, and
/// shirking again once the exponential phase of a delayed-exponential policy
/// begins, with atom `pi` at `tau_hat`.
///
/// The exponential phase is valued by `exp_phase_value`, which presumes the
/// phase hazard is the indifference rate; the hazard itself therefore does
/// not appear.
pub fn u_shirk_work_shirk(
    t: f64,
    tau_hat: f64,
    pi: f64,
    d: &DerivedParams,
    delta: Detectability,
    rho: f64,
) -> f64 {
    let t = t.clamp(0.0, tau_hat);
    let (l0, l1) = (d.lambda0, d.lambda1);
    let q = passage_after_shirk_work(t, tau_hat, delta, rho);
    let e0 = (-l0 * t).exp();
    let reach = (-l0 * t - l1 * (tau_hat - t)).exp();
    let bracket = pi * q * d.U1 + (1.0 - pi) * exp_phase_value(q, d, delta);
    d.U0 * (1.0 - e0) + e0 * d.U1 * (1.0 - (-l1 * (tau_hat - t)).exp()) + reach * bracket
}

/// `u_shirk_work_shirk(., tau_hat, pi)` as a sum of exponentials in `t`,
/// valid on `(0, tau_hat]`.
pub fn u_shirk_work_shirk_expsum(
    tau_hat: f64,
    pi: f64,
    d: &DerivedParams,
    delta: Detectability,
    rho: f64,
) -> ExpSum {
    let (l0, l1) = (d.lambda0, d.lambda1);
    let c = exp_phase_value_slope(d, delta);
    let alpha = (1.0 - pi) * (d.U1 - c);
    let beta = pi * d.U1 + (1.0 - pi) * c;
    let e = (-l1 * tau_hat).exp();
    let er = (-rho * tau_hat).exp();
    let mut terms = vec![
        (d.U0, 0.0),
        (-(d.U0 - d.U1), -l0),
        (e * (alpha + beta - d.U1), l1 - l0),
        (-e * beta * er, l1 - l0 + rho),
    ];
    if let Detectability::Finite(delta) = delta {
        terms.push((e * beta * er, l1 - l0 + rho - delta));
    }
    ExpSum::new(terms)
}

/// Loss relative to `U0` from shirking until an inspection at `t`.
pub fn loss_shirk(t: f64, d: &DerivedParams, delta: Detectability) -> f64 {
    let pass = match delta {
        Detectability::Finite(delta) => (-delta * t).exp(),
        Detectability::Perfect => 0.0,
    };
    (-d.lambda0 * t).exp() * (d.U0 - d.U1 * pass)
}

/// `loss_shirk` on the cost axis `x = exp(-lambda1 t)`.
pub fn loss_shirk_x(x: f64, d: &DerivedParams, delta: Detectability) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    loss_shirk(-x.ln() / d.lambda1, d, delta)
}

/// Cost of the best exponential policy over the cost of the best periodic
/// policy under perfect inspections, for `mu = (U0 - U1)/U0` and
/// `lambda_ratio = lambda1/lambda0`.
///
/// Both costs come from `policy_cost`, so the ratio equals 1 at
/// `lambda_ratio = 1` and grows without bound as `lambda_ratio` grows. The
/// closed form sometimes printed for this ratio is its reciprocal.
pub fn cost_ratio(mu: f64, lambda_ratio: f64) -> f64 {
    let d = DerivedParams::from_values(1.0, lambda_ratio, 1.0, 1.0 - mu);
    let gamma = d.lambda0 * (d.U0 - d.U1) / d.U1;
    let tau = -((d.U0 - d.U1) / d.U0).ln() / d.lambda0;
    let exp_cost = policy_cost(&InspectionPolicy::Exponential { gamma }, &d);
    let per_cost = policy_cost(&InspectionPolicy::Periodic { tau }, &d);
    match (exp_cost, per_cost) {
        (Ok(a), Ok(b)) => a / b,
        _ => f64::NAN,
    }
}
