use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DerivedParams;

/// A renewal inspection policy: gaps between consecutive inspections are
/// i.i.d. draws from the distribution described here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InspectionPolicy {
    Periodic {
        tau: f64,
    },
    Exponential {
        gamma: f64,
    },
    /// No inspection before `tau_hat`; an atom `pi` at `tau_hat`; hazard
    /// `gamma` afterwards.
    DelayedExponential {
        tau_hat: f64,
        pi: f64,
        gamma: f64,
    },
    DiscreteGap {
        times: Vec<f64>,
        probs: Vec<f64>,
    },
}

/// Exponential tail of a gap distribution: mass `mass` spread with hazard
/// `gamma` over `(start, inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tail {
    pub start: f64,
    pub mass: f64,
    pub gamma: f64,
}

/// Gap distribution as point masses plus an optional exponential tail that
/// starts at or after the last atom.
#[derive(Debug, Clone, PartialEq)]
pub struct GapLaw {
    pub atoms: Vec<(f64, f64)>,
    pub tail: Option<Tail>,
}

impl GapLaw {
    /// `P(T > u)`.
    pub fn survival(&self, u: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().filter(|(t, _)| *t > u).map(|(_, p)| p).sum();
        let tail = self.tail.map_or(0.0, |tl| {
            if u < tl.start {
                tl.mass
            } else {
                tl.mass * (-tl.gamma * (u - tl.start)).exp()
            }
        });
        atoms + tail
    }

    /// `E exp(-k T)`.
    pub fn laplace(&self, k: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|(t, p)| p * (-k * t).exp()).sum();
        let tail = self.tail.map_or(0.0, |tl| {
            tl.mass * (-k * tl.start).exp() * tl.gamma / (tl.gamma + k)
        });
        atoms + tail
    }

    /// Time after which only the memoryless tail remains (or the last atom).
    pub fn deterministic_end(&self) -> f64 {
        let last = self.atoms.last().map_or(0.0, |a| a.0);
        self.tail.map_or(last, |tl| tl.start.max(last))
    }
}

impl InspectionPolicy {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPolicy(m));
        let pos = |x: f64| x > 0.0 && x.is_finite();
        match self {
            InspectionPolicy::Periodic { tau } => {
                if !pos(*tau) {
                    return bad(format!("period must be positive, got {tau}"));
                }
            }
            InspectionPolicy::Exponential { gamma } => {
                if !pos(*gamma) {
                    return bad(format!("hazard must be positive, got {gamma}"));
                }
            }
            InspectionPolicy::DelayedExponential { tau_hat, pi, gamma } => {
                if !(*tau_hat >= 0.0 && tau_hat.is_finite()) {
                    return bad(format!("delay must be >= 0, got {tau_hat}"));
                }
                if !(0.0..=1.0).contains(pi) {
                    return bad(format!("atom probability must lie in [0, 1], got {pi}"));
                }
                if *pi < 1.0 && !pos(*gamma) {
                    return bad(format!("hazard must be positive, got {gamma}"));
                }
                if *tau_hat == 0.0 && *pi > 0.0 {
                    return bad("an atom at gap zero repeats inspections instantly".into());
                }
            }
            InspectionPolicy::DiscreteGap { times, probs } => {
                if times.is_empty() || times.len() != probs.len() {
                    return bad("times and probs must be non-empty and of equal length".into());
                }
                if times.iter().any(|t| !pos(*t)) || times.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("times must be positive and strictly increasing".into());
                }
                if probs.iter().any(|p| !(*p >= 0.0)) {
                    return bad("probabilities must be non-negative".into());
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return bad(format!("probabilities sum to {total}, not 1"));
                }
            }
        }
        Ok(())
    }

    pub fn gap_law(&self) -> GapLaw {
        match self {
            InspectionPolicy::Periodic { tau } => GapLaw {
                atoms: vec![(*tau, 1.0)],
                tail: None,
            },
            InspectionPolicy::Exponential { gamma } => GapLaw {
                atoms: vec![],
                tail: Some(Tail {
                    start: 0.0,
                    mass: 1.0,
                    gamma: *gamma,
                }),
            },
            InspectionPolicy::DelayedExponential { tau_hat, pi, gamma } => GapLaw {
                atoms: if *pi > 0.0 {
                    vec![(*tau_hat, *pi)]
                } else {
                    vec![]
                },
                tail: (*pi < 1.0).then_some(Tail {
                    start: *tau_hat,
                    mass: 1.0 - pi,
                    gamma: *gamma,
                }),
            },
            InspectionPolicy::DiscreteGap { times, probs } => GapLaw {
                atoms: times
                    .iter()
                    .zip(probs)
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(t, p)| (*t, *p))
                    .collect(),
                tail: None,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            InspectionPolicy::Periodic { .. } => "periodic",
            InspectionPolicy::Exponential { .. } => "exponential",
            InspectionPolicy::DelayedExponential { .. } => "delayed_exponential",
            InspectionPolicy::DiscreteGap { .. } => "discrete_gap",
        }
    }
}

/// Expected discounted number of inspections, `K = x / (1 - x)` with
/// `x = E exp(-lambda1 T)`.
pub fn policy_cost(policy: &InspectionPolicy, d: &DerivedParams) -> Result<f64> {
    policy.validate()?;
    if let InspectionPolicy::Exponential { gamma } = policy {
        return Ok(gamma / d.lambda1);
    }
    let x = policy.gap_law().laplace(d.lambda1);
    if x >= 1.0 {
        return Err(Error::DivergentCost(x));
    }
    Ok(x / (1.0 - x))
}
