use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DerivedParams, Detectability};

/// A deterministic work (1) / shirk (0) plan between two inspections, as a
/// function of the time since the last inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionStrategy {
    AlwaysWork,
    ShirkThenWork {
        t_switch: f64,
    },
    WorkThenShirk {
        t_switch: f64,
    },
    ShirkWorkShirk {
        t_switch: f64,
        resume_shirk_at: f64,
    },
    /// Action `actions[i]` on `[breakpoints[i-1], breakpoints[i])`.
    Step {
        breakpoints: Vec<f64>,
        actions: Vec<u8>,
    },
}

/// A maximal interval of constant action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub action: u8,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }
}

impl ActionStrategy {
    pub fn always_shirk() -> Self {
        ActionStrategy::Step {
            breakpoints: vec![],
            actions: vec![0],
        }
    }

    /// Canonical step form. Zero-length pieces are dropped.
    pub fn to_step(&self) -> (Vec<f64>, Vec<u8>) {
        let (bps, acts) = match self {
            ActionStrategy::AlwaysWork => (vec![], vec![1]),
            ActionStrategy::ShirkThenWork { t_switch } => (vec![*t_switch], vec![0, 1]),
            ActionStrategy::WorkThenShirk { t_switch } => (vec![*t_switch], vec![1, 0]),
            ActionStrategy::ShirkWorkShirk {
                t_switch,
                resume_shirk_at,
            } => (vec![*t_switch, *resume_shirk_at], vec![0, 1, 0]),
            ActionStrategy::Step {
                breakpoints,
                actions,
            } => (breakpoints.clone(), actions.clone()),
        };
        let mut out_b = Vec::new();
        let mut out_a = vec![acts[0]];
        let mut prev = 0.0;
        for (i, &b) in bps.iter().enumerate() {
            let next = acts[i + 1];
            if b <= prev {
                // earlier piece has no length
                *out_a.last_mut().unwrap() = next;
                let n = out_a.len();
                if n >= 2 && out_a[n - 2] == next {
                    out_a.pop();
                    out_b.pop();
                }
                continue;
            }
            if next == *out_a.last().unwrap() {
                prev = b;
                continue;
            }
            out_b.push(b);
            out_a.push(next);
            prev = b;
        }
        (out_b, out_a)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidStrategy(m));
        match self {
            ActionStrategy::AlwaysWork => Ok(()),
            ActionStrategy::ShirkThenWork { t_switch } | ActionStrategy::WorkThenShirk { t_switch } => {
                if t_switch.is_nan() || *t_switch < 0.0 {
                    return bad(format!("switch time must be >= 0, got {t_switch}"));
                }
                Ok(())
            }
            ActionStrategy::ShirkWorkShirk {
                t_switch,
                resume_shirk_at,
            } => {
                if t_switch.is_nan() || *t_switch < 0.0 || !(t_switch <= resume_shirk_at) {
                    return bad(format!(
                        "need 0 <= t_switch <= resume_shirk_at, got {t_switch}, {resume_shirk_at}"
                    ));
                }
                Ok(())
            }
            ActionStrategy::Step {
                breakpoints,
                actions,
            } => {
                if actions.len() != breakpoints.len() + 1 {
                    return bad("actions must be one longer than breakpoints".into());
                }
                if actions.iter().any(|&a| a > 1) {
                    return bad("actions must be 0 or 1".into());
                }
                let mut prev = 0.0;
                for (i, &b) in breakpoints.iter().enumerate() {
                    let ok = if i == 0 { b >= 0.0 } else { b > prev };
                    if !ok || b.is_nan() {
                        return bad("breakpoints must be non-negative and strictly increasing".into());
                    }
                    prev = b;
                }
                Ok(())
            }
        }
    }

    /// Action taken at time `s` since the last inspection.
    pub fn action_at(&self, s: f64) -> u8 {
        let (bps, acts) = self.to_step();
        let i = bps.iter().take_while(|&&b| b <= s).count();
        acts[i]
    }

    /// Constant-action pieces covering `[0, t_end)`; `t_end` may be infinite.
    pub fn segments(&self, t_end: f64) -> Vec<Segment> {
        let (bps, acts) = self.to_step();
        let mut out = Vec::with_capacity(acts.len());
        let mut start = 0.0;
        for (i, &a) in acts.iter().enumerate() {
            let end = bps.get(i).copied().unwrap_or(f64::INFINITY).min(t_end);
            if end > start {
                out.push(Segment {
                    start,
                    end,
                    action: a,
                });
            }
            start = end;
            if start >= t_end {
                break;
            }
        }
        out
    }

    /// The plan as seen from time `s` onward.
    pub fn shifted(&self, s: f64) -> ActionStrategy {
        let (bps, acts) = self.to_step();
        let i = bps.iter().take_while(|&&b| b <= s).count();
        ActionStrategy::Step {
            breakpoints: bps[i..].iter().map(|b| b - s).collect(),
            actions: acts[i..].to_vec(),
        }
    }
}

/// Survival-and-discount factor `exp(-r t - lambda_g int a - lambda_b int (1-a))`.
pub fn effective_discount(strategy: &ActionStrategy, t: f64, d: &DerivedParams) -> f64 {
    let exponent: f64 = strategy
        .segments(t)
        .iter()
        .map(|s| d.lambda(s.action) * s.len())
        .sum();
    (-exponent).exp()
}

/// Probability that no evidence of shirking is present at time `t`.
pub fn passage_probability(strategy: &ActionStrategy, t: f64, delta: Detectability, rho: f64) -> f64 {
    let mut q = 1.0;
    for seg in strategy.segments(t) {
        q = step_passage(q, seg.action, seg.len(), delta, rho);
    }
    q
}

/// Evolves the passage probability over `len` units of constant action.
pub fn step_passage(q: f64, action: u8, len: f64, delta: Detectability, rho: f64) -> f64 {
    if action == 0 {
        q * delta.survival(len)
    } else if rho > 0.0 {
        1.0 - (1.0 - q) * (-rho * len).exp()
    } else {
        q
    }
}
