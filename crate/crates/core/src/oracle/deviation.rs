//! Exact expected payoffs of deterministic deviation plans against any
//! renewal policy, and scans over one-parameter deviation families.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{derive, DerivedParams, Detectability, ModelParams};
use crate::payoffs::{step_passage, ActionStrategy, GapLaw, InspectionPolicy};
use crate::roots::golden_max;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationFamily {
    /// Shirk on `[0, t)`, then work.
    ShirkThenWork,
    /// Work on `[0, t)`, then shirk until the inspection.
    WorkThenShirk,
    /// Shirk on `[0, t)`, work until the memoryless phase begins, shirk after.
    ShirkWorkShirk,
    /// Shirk from the start until the inspection.
    ShirkToEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationOptimum {
    pub family: DeviationFamily,
    pub payoff: f64,
    /// Maximizing switch time; `None` for families without one.
    pub switch_time: Option<f64>,
    pub strategy: ActionStrategy,
}

const SCAN_POINTS: usize = 4001;

/// `int_0^len exp(-k s) ds`, with `len` possibly infinite and `k` possibly
/// infinite.
fn integral(k: f64, len: f64) -> f64 {
    if k.is_infinite() {
        0.0
    } else if len.is_infinite() {
        1.0 / k
    } else if k == 0.0 {
        len
    } else {
        -(-k * len).exp_m1() / k
    }
}

/// Expected payoff of following `strategy` until the next inspection, with
/// a passed inspection worth `U1`.
///
/// The gap law is split into pieces on which the action, the detection
/// survival and the inspection hazard are all exponential, so each piece
/// integrates in closed form.
pub fn strategy_payoff(
    policy: &InspectionPolicy,
    params: &ModelParams,
    strategy: &ActionStrategy,
) -> Result<f64> {
    policy.validate()?;
    strategy.validate()?;
    let d = derive(params)?;
    Ok(payoff_with(&policy.gap_law(), &d, params.delta, params.rho, strategy, d.U1))
}

/// Value of repeating `strategy` after every passed inspection.
pub fn renewal_payoff(
    policy: &InspectionPolicy,
    params: &ModelParams,
    strategy: &ActionStrategy,
) -> Result<f64> {
    policy.validate()?;
    strategy.validate()?;
    let d = derive(params)?;
    let law = policy.gap_law();
    // the one-gap payoff is affine in the continuation value
    let flow = payoff_with(&law, &d, params.delta, params.rho, strategy, 0.0);
    let weight = payoff_with(&law, &d, params.delta, params.rho, strategy, 1.0) - flow;
    Ok(flow / (1.0 - weight))
}

fn payoff_with(
    law: &GapLaw,
    d: &DerivedParams,
    delta: Detectability,
    rho: f64,
    strategy: &ActionStrategy,
    cont: f64,
) -> f64 {
    let (bps, acts) = strategy.to_step();
    let mut cuts: Vec<f64> = bps.clone();
    cuts.extend(law.atoms.iter().map(|a| a.0));
    if let Some(tl) = law.tail {
        cuts.push(tl.start);
    }
    cuts.retain(|c| *c > 0.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let end = if law.tail.is_some() {
        f64::INFINITY
    } else {
        law.deterministic_end()
    };
    cuts.retain(|c| *c < end);
    cuts.push(end);

    let mut total = 0.0;
    let mut disc = 1.0;
    let mut pass = 1.0;
    let mut surv = 1.0;
    let mut atom_idx = 0;
    let mut start = 0.0;
    for &stop in &cuts {
        let len = stop - start;
        let in_tail = law.tail.is_some_and(|tl| start >= tl.start);
        let gamma = if in_tail { law.tail.unwrap().gamma } else { 0.0 };
        let i = bps.iter().take_while(|&&b| b <= start).count();
        let a = acts[i];
        let lam = d.lambda(a);
        total += d.value(a) * lam * disc * surv * integral(lam + gamma, len);
        if in_tail {
            let insp = if a == 0 {
                pass * integral(lam + gamma + delta.rate(), len)
            } else if rho > 0.0 {
                integral(lam + gamma, len) - (1.0 - pass) * integral(lam + gamma + rho, len)
            } else {
                pass * integral(lam + gamma, len)
            };
            total += cont * disc * surv * gamma * insp;
        }
        if len.is_infinite() {
            break;
        }
        disc *= (-lam * len).exp();
        surv *= (-gamma * len).exp();
        pass = step_passage(pass, a, len, delta, rho);
        start = stop;
        while atom_idx < law.atoms.len() && law.atoms[atom_idx].0 <= start {
            let p = law.atoms[atom_idx].1;
            total += p * disc * pass * cont;
            surv -= p;
            atom_idx += 1;
        }
        surv = surv.max(0.0);
    }
    total
}

/// End of the switch-time range worth scanning.
fn scan_end(law: &GapLaw) -> f64 {
    match law.tail {
        Some(tl) => law.deterministic_end() + 10.0 / tl.gamma,
        None => law.deterministic_end(),
    }
}

fn member(family: DeviationFamily, t: f64, law: &GapLaw) -> ActionStrategy {
    match family {
        DeviationFamily::ShirkThenWork => ActionStrategy::ShirkThenWork { t_switch: t },
        DeviationFamily::WorkThenShirk => ActionStrategy::WorkThenShirk { t_switch: t },
        DeviationFamily::ShirkWorkShirk => ActionStrategy::ShirkWorkShirk {
            t_switch: t,
            resume_shirk_at: t.max(law.tail.map_or(f64::INFINITY, |tl| tl.start)),
        },
        DeviationFamily::ShirkToEnd => ActionStrategy::always_shirk(),
    }
}

/// Payoffs of the family members with the given switch times.
pub fn deviation_profile(
    policy: &InspectionPolicy,
    params: &ModelParams,
    family: DeviationFamily,
    times: &[f64],
) -> Result<Vec<f64>> {
    policy.validate()?;
    let d = derive(params)?;
    let law = policy.gap_law();
    Ok(times
        .iter()
        .map(|&t| payoff_with(&law, &d, params.delta, params.rho, &member(family, t.max(0.0), &law), d.U1))
        .collect())
}

/// Best member of a deviation family.
///
/// Switch times are scanned on a uniform grid over the range where the
/// policy can still inspect, every local maximum is polished by golden
/// section, and among near-ties the latest switch time wins.
pub fn best_deviation_scan(
    policy: &InspectionPolicy,
    params: &ModelParams,
    family: DeviationFamily,
) -> Result<DeviationOptimum> {
    policy.validate()?;
    let d = derive(params)?;
    let law = policy.gap_law();
    let eval =
        |t: f64| payoff_with(&law, &d, params.delta, params.rho, &member(family, t, &law), d.U1);

    if family == DeviationFamily::ShirkToEnd {
        return Ok(DeviationOptimum {
            family,
            payoff: eval(0.0),
            switch_time: None,
            strategy: ActionStrategy::always_shirk(),
        });
    }

    let hi = scan_end(&law);
    let h = hi / (SCAN_POINTS - 1) as f64;
    let ts: Vec<f64> = (0..SCAN_POINTS).map(|i| i as f64 * h).collect();
    let vs: Vec<f64> = ts.iter().map(|&t| eval(t)).collect();

    let mut cands: Vec<(f64, f64)> = vec![(ts[0], vs[0]), (hi, vs[SCAN_POINTS - 1])];
    for i in 1..SCAN_POINTS - 1 {
        if vs[i] >= vs[i - 1] && vs[i] >= vs[i + 1] {
            let (t, v) = golden_max(eval, ts[i - 1], ts[i + 1], 1e-12 * hi.max(1.0));
            cands.push(if v >= vs[i] { (t, v) } else { (ts[i], vs[i]) });
        }
    }
    let best = cands.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let tie = 1e-9 * d.U1.abs().max(1.0);
    let (t, v) = cands
        .iter()
        .filter(|c| c.1 >= best - tie)
        .copied()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    Ok(DeviationOptimum {
        family,
        payoff: v,
        switch_time: Some(t),
        strategy: member(family, t, &law),
    })
}
