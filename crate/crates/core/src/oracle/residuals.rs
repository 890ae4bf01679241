//! Residuals of the indifference conditions that pin down the optimal
//! policies, evaluated in closed form on grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derive, DerivedParams, Detectability, ModelParams};
use crate::payoffs::{exp_phase_value_slope, GapLaw, InspectionPolicy, Tail};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(min: f64, max: f64, n: usize) -> Self {
        GridSpec { min, max, n }
    }

    pub fn points(&self) -> Vec<f64> {
        if self.n <= 1 {
            return vec![self.min];
        }
        let h = (self.max - self.min) / (self.n - 1) as f64;
        (0..self.n).map(|i| self.min + i as f64 * h).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub check: String,
    pub grid: GridSpec,
    pub max_residual: f64,
    pub argmax_location: f64,
}

impl ResidualReport {
    fn from_fn(check: &str, grid: GridSpec, mut f: impl FnMut(f64) -> f64) -> Self {
        let mut max_residual = f64::NEG_INFINITY;
        let mut argmax_location = grid.min;
        for t in grid.points() {
            let r = f(t);
            if r > max_residual || r.is_nan() {
                max_residual = r;
                argmax_location = t;
            }
        }
        ResidualReport {
            check: check.to_string(),
            grid,
            max_residual,
            argmax_location,
        }
    }
}

/// `int_{(t, inf)} sum_i c_i exp(-k_i (s - t)) dF(s)` for a gap law `F`.
fn forward_integral(terms: &[(f64, f64)], law: &GapLaw, t: f64) -> f64 {
    let mut total = 0.0;
    for &(s, p) in &law.atoms {
        if s > t {
            total += p * terms.iter().map(|(c, k)| c * (-k * (s - t)).exp()).sum::<f64>();
        }
    }
    if let Some(Tail { start, mass, gamma }) = law.tail {
        let u = start.max(t);
        let reach = mass * (-gamma * (u - start)).exp();
        total += reach
            * terms
                .iter()
                .map(|(c, k)| c * (-k * (u - t)).exp() * gamma / (gamma + k))
                .sum::<f64>();
    }
    total
}

/// Kernel of the shirk-until-inspection indifference, normalized by
/// `U0 - U1`.
fn kernel(d: &DerivedParams, delta: Detectability) -> Vec<(f64, f64)> {
    let gap = d.U0 - d.U1;
    let mut terms = vec![(d.U0 / gap, d.lambda0)];
    if let Detectability::Finite(delta) = delta {
        terms.push((-d.U1 / gap, d.lambda0 + delta));
    }
    terms
}

const BINDING_SPAN: f64 = 10.0;
const BINDING_POINTS: usize = 1001;

/// Residuals of the binding incentive constraints of an exponential or
/// delayed-exponential policy.
///
/// The first report is the single condition at the start of a gap: shirking
/// until the next inspection is exactly as good as working. The second is
/// the continuum condition, imposed from the start of the memoryless phase
/// over a span of 10 time units.
pub fn verify_binding_constraints(
    policy: &InspectionPolicy,
    params: &ModelParams,
) -> Result<Vec<ResidualReport>> {
    policy.validate()?;
    let d = derive(params)?;
    let start = match policy {
        InspectionPolicy::Exponential { .. } => 0.0,
        InspectionPolicy::DelayedExponential { tau_hat, .. } => *tau_hat,
        other => {
            return Err(Error::PreconditionViolated(format!(
                "binding-constraint residuals need an exponential phase, got {}",
                other.kind()
            )))
        }
    };
    if !(d.U0 > d.U1) {
        return Err(Error::PreconditionViolated("requires U0 > U1".into()));
    }
    let law = policy.gap_law();
    let terms = kernel(&d, params.delta);
    let residual = |t: f64| (forward_integral(&terms, &law, t) - law.survival(t)).abs();
    Ok(vec![
        ResidualReport::from_fn("single_condition", GridSpec::new(0.0, 0.0, 1), residual),
        ResidualReport::from_fn(
            "continuum_condition",
            GridSpec::new(start, start + BINDING_SPAN, BINDING_POINTS),
            residual,
        ),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointKind {
    /// `int_{(t,inf)} A exp(-alpha (s - t)) dF(s) = 1 - F(t)`.
    Single {
        #[serde(rename = "A")]
        a: f64,
        alpha: f64,
    },
    /// `int_{(t,inf)} [A exp(-alpha (s - t)) - B exp(-beta (s - t))] dF(s) = 1 - F(t)`.
    Sum {
        #[serde(rename = "A")]
        a: f64,
        #[serde(rename = "B")]
        b: f64,
        alpha: f64,
        beta: f64,
    },
}

impl FixedPointKind {
    /// Hazard of the unique solution.
    pub fn gamma(&self) -> Result<f64> {
        self.check()?;
        Ok(match *self {
            FixedPointKind::Single { a, alpha } => alpha / (a - 1.0),
            FixedPointKind::Sum { a, b, alpha, beta } => alpha * beta / (beta * b - alpha * a),
        })
    }

    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::PreconditionViolated(m.to_string()));
        match *self {
            FixedPointKind::Single { a, alpha } => {
                if !(a > 1.0 && alpha > 0.0) {
                    return bad("need A > 1 and alpha > 0");
                }
            }
            FixedPointKind::Sum { a, b, alpha, beta } => {
                if !(alpha > 0.0 && beta > 0.0) {
                    return bad("need alpha, beta > 0");
                }
                if (a - b - 1.0).abs() > 1e-12 * a.abs().max(1.0) {
                    return bad("need A - B = 1");
                }
                if !(beta * b > alpha * a) {
                    return bad("need beta B > alpha A");
                }
            }
        }
        Ok(())
    }

    fn terms(&self) -> Vec<(f64, f64)> {
        match *self {
            FixedPointKind::Single { a, alpha } => vec![(a, alpha)],
            FixedPointKind::Sum { a, b, alpha, beta } => vec![(a, alpha), (-b, beta)],
        }
    }
}

/// Residual of the fixed-point equation under
/// `F(t) = pi + (1 - pi)(1 - exp(-gamma t))`.
pub fn verify_fixed_point(
    kind: &FixedPointKind,
    pi: f64,
    gamma_candidate: f64,
    grid: GridSpec,
) -> Result<ResidualReport> {
    kind.check()?;
    if !(0.0..1.0).contains(&pi) {
        return Err(Error::PreconditionViolated(format!(
            "atom at zero must lie in [0, 1), got {pi}"
        )));
    }
    if !(gamma_candidate > 0.0 && gamma_candidate.is_finite()) {
        return Err(Error::PreconditionViolated(format!(
            "hazard must be positive, got {gamma_candidate}"
        )));
    }
    let law = GapLaw {
        atoms: if pi > 0.0 { vec![(0.0, pi)] } else { vec![] },
        tail: Some(Tail {
            start: 0.0,
            mass: 1.0 - pi,
            gamma: gamma_candidate,
        }),
    };
    let terms = kind.terms();
    Ok(ResidualReport::from_fn("fixed_point", grid, |t| {
        (forward_integral(&terms, &law, t) - law.survival(t)).abs()
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HjbReport {
    pub residual: ResidualReport,
    /// Action strictly optimal at every grid belief below one, if any action is.
    pub optimal_action: Option<u8>,
}

const HJB_POINTS: usize = 1001;

/// Plugs `V(q) = U1 + (q - 1)(U0 - U1) lambda0 / delta` into the HJB
/// equation of the memoryless phase with hazard `gamma` and reports
/// `max_q |max_a H_a(q)|`.
pub fn verify_hjb(params: &ModelParams, gamma: f64, rho: f64) -> Result<HjbReport> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::PreconditionViolated(format!(
            "hazard must be positive, got {gamma}"
        )));
    }
    let Detectability::Finite(delta) = params.delta else {
        return Err(Error::PreconditionViolated(
            "the belief HJB needs finite detectability".into(),
        ));
    };
    let d = derive(params)?;
    let slope = exp_phase_value_slope(&d, params.delta);
    let (u0, u1) = (d.U0 * d.lambda0, d.U1 * d.lambda1);
    let h = |a: u8, q: f64| {
        let v = d.U1 + (q - 1.0) * slope;
        let af = a as f64;
        let drift = (1.0 - q) * rho * af - q * delta * (1.0 - af);
        (1.0 - af) * u0 + af * u1 + drift * slope - d.lambda(a) * v + gamma * (q * d.U1 - v)
    };
    let grid = GridSpec::new(0.0, 1.0, HJB_POINTS);
    let residual = ResidualReport::from_fn("hjb", grid, |q| h(0, q).max(h(1, q)).abs());
    let mut action = None;
    let mut consistent = true;
    for q in grid.points().into_iter().filter(|&q| q < 1.0) {
        let (h0, h1) = (h(0, q), h(1, q));
        let margin = 1e-12 * (d.U0.abs() + d.U1.abs()) * (d.lambda0 + d.lambda1 + gamma);
        let best = if h1 > h0 + margin {
            1
        } else if h0 > h1 + margin {
            0
        } else {
            consistent = false;
            continue;
        };
        match action {
            None => action = Some(best),
            Some(a) if a != best => consistent = false,
            _ => {}
        }
    }
    Ok(HjbReport {
        residual,
        optimal_action: if consistent { action } else { None },
    })
}

/// Whether, once shirking under an exponential policy with hazard `gamma`,
/// the agent prefers to keep shirking: `U1 l1 / (l1 + g) <= U0 l0 / (l0 + g)`.
pub fn absorbing_shirk_check(gamma: f64, d: &DerivedParams) -> Result<bool> {
    if !(gamma > 0.0) {
        return Err(Error::PreconditionViolated(format!(
            "hazard must be positive, got {gamma}"
        )));
    }
    Ok(d.U1 * d.lambda1 / (d.lambda1 + gamma) <= d.U0 * d.lambda0 / (d.lambda0 + gamma))
}
