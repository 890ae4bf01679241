//! Event-driven Monte Carlo of whole project histories under a renewal
//! inspection policy and a per-gap action plan that restarts after every
//! passed inspection.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derive, DerivedParams, ModelParams};
use crate::payoffs::{policy_cost, ActionStrategy, GapLaw, InspectionPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_runs: usize,
    pub seed: u64,
    /// Truncation time; `None` means `50 / min(r, lambda0, lambda1)`.
    pub horizon: Option<f64>,
    /// Append the exact expected remainder for plans that always work.
    pub tail_correction: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_runs: 10_000,
            seed: 0,
            horizon: None,
            tail_correction: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::PreconditionViolated("n_runs must be at least 1".into()));
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0) {
                return Err(Error::PreconditionViolated(format!(
                    "horizon must be positive, got {h}"
                )));
            }
        }
        Ok(())
    }

    fn horizon_for(&self, params: &ModelParams, d: &DerivedParams) -> f64 {
        self.horizon
            .unwrap_or(50.0 / params.r.min(d.lambda0).min(d.lambda1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndCause {
    Breakthrough,
    Breakdown,
    TerminationAfterFail,
    Censored,
}

impl EndCause {
    pub fn as_str(self) -> &'static str {
        match self {
            EndCause::Breakthrough => "breakthrough",
            EndCause::Breakdown => "breakdown",
            EndCause::TerminationAfterFail => "termination_after_fail",
            EndCause::Censored => "censored",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: u64,
    pub end_cause: EndCause,
    pub end_time: f64,
    pub n_inspections: u64,
    /// Discounted number of inspections.
    pub disc_cost: f64,
    /// Discounted flow utility of the agent.
    pub disc_payoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndCauseFrequencies {
    pub breakthrough: f64,
    pub breakdown: f64,
    pub termination_after_fail: f64,
    pub censored: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub n_runs: usize,
    pub mean_cost: Estimate,
    pub mean_agent_payoff: Estimate,
    pub end_causes: EndCauseFrequencies,
    pub n_inspections: f64,
}

/// Stream ids: gap draws and project events use separate streams so the
/// inspection schedule of a run does not depend on the agent's plan.
const GAP_STREAM: u8 = 0;
const EVENT_STREAM: u8 = 1;

/// Generator for `(seed, run, stream)`: the seed and stream id form the
/// ChaCha key and the run index selects the ChaCha stream.
fn rng_for(seed: u64, run: u64, stream: u8) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8] = stream;
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(run);
    rng
}

/// Uniform on `(0, 1]`.
fn unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn exp_draw(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    if rate <= 0.0 {
        f64::INFINITY
    } else {
        -unit(rng).ln() / rate
    }
}

fn draw_gap(law: &GapLaw, rng: &mut ChaCha8Rng) -> f64 {
    let u = unit(rng);
    let mut acc = 0.0;
    for &(t, p) in &law.atoms {
        acc += p;
        if u <= acc {
            return t;
        }
    }
    match law.tail {
        Some(tl) => tl.start + exp_draw(rng, tl.gamma),
        // rounding left a sliver of mass unassigned
        None => law.atoms.last().map_or(0.0, |a| a.0),
    }
}

struct Ctx<'a> {
    params: &'a ModelParams,
    d: DerivedParams,
    law: GapLaw,
    bps: Vec<f64>,
    acts: Vec<u8>,
    horizon: f64,
    /// Cost of the inspections after a given one, for the tail correction.
    tail_cost: Option<f64>,
}

impl Ctx<'_> {
    fn always_works(&self) -> bool {
        self.acts == [1]
    }
}

/// Discounted flow `u int_t^{t+len} exp(-r s) ds`.
fn flow(u: f64, r: f64, t: f64, len: f64) -> f64 {
    u * (-r * t).exp() * -(-r * len).exp_m1() / r
}

fn run_one(ctx: &Ctx, seed: u64, run: u64) -> RunRecord {
    let p = ctx.params;
    let mut gaps = rng_for(seed, run, GAP_STREAM);
    let mut events = rng_for(seed, run, EVENT_STREAM);
    let mut rec = RunRecord {
        run,
        end_cause: EndCause::Censored,
        end_time: ctx.horizon,
        n_inspections: 0,
        disc_cost: 0.0,
        disc_payoff: 0.0,
    };
    // absolute time at the last inspection; evidence present
    let mut origin = 0.0;
    let mut evidence = false;
    loop {
        let gap = draw_gap(&ctx.law, &mut gaps);
        let next = origin + gap;
        let mut s = 0.0;
        let mut seg = 0;
        while s < gap {
            while seg < ctx.bps.len() && ctx.bps[seg] <= s {
                seg += 1;
            }
            let a = ctx.acts[seg];
            let seg_end = ctx.bps.get(seg).copied().unwrap_or(f64::INFINITY).min(gap);
            let now = origin + s;
            if a == 0 && !evidence && p.delta.is_perfect() {
                evidence = true;
            }
            let limit = (seg_end - s).min(ctx.horizon - now);
            let arrive = exp_draw(
                &mut events,
                if a == 1 { p.lambda_g } else { p.lambda_b },
            );
            let flip_rate = match (a, evidence) {
                (0, false) => p.delta.rate(),
                (1, true) => p.rho,
                _ => 0.0,
            };
            let flip = if flip_rate.is_finite() {
                exp_draw(&mut events, flip_rate)
            } else {
                0.0
            };
            let u = ctx.d.value(a) * ctx.d.lambda(a);
            if arrive <= limit && arrive <= flip {
                rec.disc_payoff += flow(u, p.r, now, arrive);
                rec.end_time = now + arrive;
                rec.end_cause = if a == 1 {
                    EndCause::Breakthrough
                } else {
                    EndCause::Breakdown
                };
                return rec;
            }
            if flip < limit {
                rec.disc_payoff += flow(u, p.r, now, flip);
                evidence = !evidence;
                s += flip;
                continue;
            }
            rec.disc_payoff += flow(u, p.r, now, limit);
            if now + limit >= ctx.horizon {
                if let (Some(k), true) = (ctx.tail_cost, ctx.always_works()) {
                    let h = ctx.horizon;
                    let disc = (-p.r * h).exp();
                    rec.disc_payoff += disc * ctx.d.U1;
                    rec.disc_cost += disc * (-ctx.d.lambda1 * (next - h)).exp() * (1.0 + k);
                }
                return rec;
            }
            s += limit;
        }
        // inspection at `next`
        rec.n_inspections += 1;
        rec.disc_cost += (-p.r * next).exp();
        if evidence {
            rec.end_time = next;
            rec.end_cause = EndCause::TerminationAfterFail;
            return rec;
        }
        origin = next;
    }
}

fn context<'a>(
    policy: &InspectionPolicy,
    strategy: &ActionStrategy,
    params: &'a ModelParams,
    cfg: &SimConfig,
) -> Result<Ctx<'a>> {
    policy.validate()?;
    strategy.validate()?;
    cfg.validate()?;
    let d = derive(params)?;
    let (bps, acts) = strategy.to_step();
    let tail_cost = if cfg.tail_correction {
        policy_cost(policy, &d).ok()
    } else {
        None
    };
    Ok(Ctx {
        params,
        d,
        law: policy.gap_law(),
        bps,
        acts,
        horizon: cfg.horizon_for(params, &d),
        tail_cost,
    })
}

/// One trajectory, reproducible from `(seed, run)`.
pub fn simulate_run(
    policy: &InspectionPolicy,
    strategy: &ActionStrategy,
    params: &ModelParams,
    cfg: &SimConfig,
    run: u64,
) -> Result<RunRecord> {
    let ctx = context(policy, strategy, params, cfg)?;
    Ok(run_one(&ctx, cfg.seed, run))
}

/// All `cfg.n_runs` trajectories, in run order.
pub fn simulate_runs(
    policy: &InspectionPolicy,
    strategy: &ActionStrategy,
    params: &ModelParams,
    cfg: &SimConfig,
) -> Result<Vec<RunRecord>> {
    let ctx = context(policy, strategy, params, cfg)?;
    Ok((0..cfg.n_runs as u64)
        .into_par_iter()
        .map(|run| run_one(&ctx, cfg.seed, run))
        .collect())
}

/// Compensated running sum.
#[derive(Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn estimate_of(values: impl Iterator<Item = f64> + Clone, n: usize) -> Estimate {
    let mut s = Neumaier::default();
    values.clone().for_each(|v| s.add(v));
    let mean = s.value() / n as f64;
    let mut ss = Neumaier::default();
    values.for_each(|v| ss.add((v - mean) * (v - mean)));
    let var = if n > 1 { ss.value() / (n - 1) as f64 } else { 0.0 };
    Estimate {
        mean,
        std_err: (var / n as f64).sqrt(),
    }
}

/// Aggregates run records, reducing in run-index order whatever the order
/// of `records`.
pub fn summarize(records: &[RunRecord]) -> SimReport {
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.run);
    let records = &sorted[..];
    let n = records.len();
    let freq = |c: EndCause| records.iter().filter(|r| r.end_cause == c).count() as f64 / n as f64;
    let mut insp = Neumaier::default();
    records.iter().for_each(|r| insp.add(r.n_inspections as f64));
    SimReport {
        n_runs: n,
        mean_cost: estimate_of(records.iter().map(|r| r.disc_cost), n),
        mean_agent_payoff: estimate_of(records.iter().map(|r| r.disc_payoff), n),
        end_causes: EndCauseFrequencies {
            breakthrough: freq(EndCause::Breakthrough),
            breakdown: freq(EndCause::Breakdown),
            termination_after_fail: freq(EndCause::TerminationAfterFail),
            censored: freq(EndCause::Censored),
        },
        n_inspections: insp.value() / n as f64,
    }
}

pub fn estimate(
    policy: &InspectionPolicy,
    strategy: &ActionStrategy,
    params: &ModelParams,
    cfg: &SimConfig,
) -> Result<SimReport> {
    Ok(summarize(&simulate_runs(policy, strategy, params, cfg)?))
}
