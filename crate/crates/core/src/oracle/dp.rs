//! Discretized dynamic program for the agent's best response to a renewal
//! inspection policy.
//!
//! The state is the time since the last inspection and the probability of
//! passing an inspection now. Actions switch only on the time grid; within a
//! step every flow, survival and inspection term is integrated exactly, so
//! without evidence recovery the computed value is the exact value of the
//! best grid-restricted strategy. Once only the memoryless tail of the gap
//! distribution remains, the problem is stationary and is solved per belief
//! level without a time grid. The value `W` after a passed inspection is the
//! fixed point of the map that feeds `W` in as the inspection payoff.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{derive, DerivedParams, Detectability, ModelParams};
use crate::payoffs::{GapLaw, InspectionPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DPConfig {
    pub dt: f64,
    /// Truncation time; `None` means `20 / min(lambda0, lambda1)`.
    pub horizon: Option<f64>,
    /// Belief grid size when evidence can fade.
    pub q_points: usize,
    pub tol: f64,
    pub max_outer: usize,
    pub max_sweeps: usize,
}

impl Default for DPConfig {
    fn default() -> Self {
        DPConfig {
            dt: 1e-3,
            horizon: None,
            q_points: 256,
            tol: 1e-9,
            max_outer: 10_000,
            max_sweeps: 2_000_000,
        }
    }
}

impl DPConfig {
    pub fn with_dt(self, dt: f64) -> Self {
        DPConfig { dt, ..self }
    }

    fn horizon_for(&self, d: &DerivedParams) -> f64 {
        self.horizon
            .unwrap_or(20.0 / d.lambda0.min(d.lambda1))
    }

    pub fn validate(&self, d: &DerivedParams) -> Result<()> {
        let bad = |m: String| Err(Error::PreconditionViolated(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        let min_h = 10.0 / d.lambda0.min(d.lambda1);
        if self.horizon_for(d) < min_h * (1.0 - 1e-12) {
            return bad(format!("horizon must be at least {min_h}"));
        }
        if self.q_points < 64 {
            return bad(format!("q grid needs at least 64 points, got {}", self.q_points));
        }
        if !(self.tol > 0.0) || self.max_outer == 0 {
            return bad("tolerance and iteration cap must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct DPSolution {
    /// Value right after a passed inspection.
    pub W: f64,
    /// Time step actually used (adjusted so policy atoms fall on the grid).
    pub dt: f64,
    /// Times since the last inspection at which `value` rows are recorded.
    pub times: Vec<f64>,
    /// Passage-probability levels indexing the columns of each row.
    pub q_grid: Vec<f64>,
    /// `value[k][j]`: value at `times[k]` with passage probability `q_grid[j]`.
    pub value: Vec<Vec<f64>>,
    /// Optimal action (1 work, 0 shirk) at the same states.
    pub action: Vec<Vec<u8>>,
    /// Stationary value and action once only the exponential tail remains.
    pub tail_value: Vec<f64>,
    pub tail_action: Vec<u8>,
    /// Working is optimal at every on-path state (passage probability 1).
    pub on_path_work: bool,
    pub outer_iterations: usize,
}

/// Tie slack when comparing action values. The grid-restricted program is
/// exact, so on-path ties differ only by rounding.
fn tie_slack(d: &DerivedParams) -> f64 {
    1e-9 * d.U0.abs().max(d.U1.abs())
}

const PREFER_WORK: f64 = 1e-14;

fn pick(work: f64, shirk: f64) -> (f64, u8) {
    if work >= shirk - PREFER_WORK * work.abs().max(shirk.abs()).max(1.0) {
        (work, 1)
    } else {
        (shirk, 0)
    }
}

/// Deterministic-phase layout shared by both belief models.
struct Layout {
    dt: f64,
    /// Number of deterministic steps before only the tail remains.
    n: usize,
    /// Conditional inspection probability at each row `0..=n`.
    hazard: Vec<f64>,
    tail_gamma: Option<f64>,
}

fn layout(law: &GapLaw, dt_req: f64, horizon: f64) -> Result<Layout> {
    let t_end = law.deterministic_end();
    if t_end > horizon {
        return Err(Error::PreconditionViolated(format!(
            "policy has inspection-free stretches up to {t_end}, beyond the horizon {horizon}"
        )));
    }
    let (n, dt) = if t_end > 0.0 {
        let n = ((t_end / dt_req).round() as usize).max(1);
        (n, t_end / n as f64)
    } else {
        (0, dt_req)
    };
    let mut hazard = vec![0.0; n + 1];
    let mut remaining = 1.0;
    for &(t, p) in &law.atoms {
        let k = ((t / dt).round() as usize).clamp(1, n);
        let h = if remaining > 0.0 { (p / remaining).min(1.0) } else { 1.0 };
        // several atoms can snap to one row
        hazard[k] = 1.0 - (1.0 - hazard[k]) * (1.0 - h);
        remaining -= p;
    }
    let tail_gamma = law.tail.map(|t| t.gamma);
    if tail_gamma.is_none() {
        hazard[n] = 1.0;
    }
    Ok(Layout {
        dt,
        n,
        hazard,
        tail_gamma,
    })
}

/// Best response to `policy`; `None` means no inspections ever.
pub fn agent_dp(
    policy: Option<&InspectionPolicy>,
    params: &ModelParams,
    cfg: &DPConfig,
) -> Result<DPSolution> {
    let d = derive(params)?;
    cfg.validate(&d)?;
    let Some(policy) = policy else {
        return no_inspection(&d, cfg);
    };
    policy.validate()?;
    let lay = layout(&policy.gap_law(), cfg.dt, cfg.horizon_for(&d))?;
    if params.rho > 0.0 {
        grid_beliefs::solve(&d, params.delta, params.rho, &lay, cfg)
    } else {
        decaying_beliefs::solve(&d, params.delta, &lay, cfg)
    }
}

fn no_inspection(d: &DerivedParams, cfg: &DPConfig) -> Result<DPSolution> {
    let step = |a: u8, v: f64| {
        let e = (-d.lambda(a) * cfg.dt).exp();
        d.value(a) * (1.0 - e) + e * v
    };
    let mut v = 0.0;
    let mut iters = 0;
    let bound = (1.0 - (-d.lambda0.min(d.lambda1) * cfg.dt).exp()).max(1e-300);
    loop {
        iters += 1;
        let next = step(1, v).max(step(0, v));
        let change = (next - v).abs();
        v = next;
        // remaining error is at most change / (1 - contraction)
        if change / bound < cfg.tol {
            break;
        }
        if iters >= cfg.max_sweeps {
            return Err(Error::NonConvergence(format!(
                "value iteration without inspections did not settle in {iters} sweeps"
            )));
        }
    }
    let (_, a) = pick(step(1, v), step(0, v) - tie_slack(d));
    Ok(DPSolution {
        W: v,
        dt: cfg.dt,
        times: vec![0.0],
        q_grid: vec![1.0],
        value: vec![vec![v]],
        action: vec![vec![a]],
        tail_value: vec![],
        tail_action: vec![],
        on_path_work: a == 1,
        outer_iterations: iters,
    })
}

/// Iterates `W -> backward pass(W)` to its fixed point.
fn outer_loop<F: FnMut(f64) -> Result<f64>>(mut pass: F, start: f64, cfg: &DPConfig) -> Result<(f64, usize)> {
    let mut w = start;
    for it in 1..=cfg.max_outer {
        let next = pass(w)?;
        if (next - w).abs() < cfg.tol {
            return Ok((next, it));
        }
        w = next;
    }
    Err(Error::NonConvergence(format!(
        "renewal value did not converge in {} iterations (last {w})",
        cfg.max_outer
    )))
}

/// Without recovery, shirking multiplies the passage probability by
/// `exp(-delta dt)` per step, so beliefs live on a geometric grid indexed by
/// the number of shirked steps.
mod decaying_beliefs {
    use super::*;

    struct Coeffs {
        e1: f64,
        e0: f64,
        flow1: f64,
        flow0: f64,
        /// Last belief index; shirking there stays there.
        m: usize,
        q: Vec<f64>,
    }

    fn coeffs(d: &DerivedParams, delta: Detectability, dt: f64, horizon: f64) -> Coeffs {
        let e1 = (-d.lambda1 * dt).exp();
        let e0 = (-d.lambda0 * dt).exp();
        let (m, q) = match delta {
            Detectability::Perfect => (1, vec![1.0, 0.0]),
            Detectability::Finite(delta) => {
                let by_horizon = (horizon / dt).ceil() as usize;
                let by_size = (40.0 / (delta * dt)).ceil() as usize;
                let m = by_horizon.min(by_size).max(1);
                (m, (0..=m).map(|j| (-delta * dt * j as f64).exp()).collect())
            }
        };
        Coeffs {
            e1,
            e0,
            flow1: d.U1 * (1.0 - e1),
            flow0: d.U0 * (1.0 - e0),
            m,
            q,
        }
    }

    /// Stationary values for the exponential tail with hazard `gamma`.
    fn tail(
        d: &DerivedParams,
        delta: Detectability,
        c: &Coeffs,
        gamma: f64,
        dt: f64,
        w: f64,
        out_v: &mut [f64],
        out_a: &mut [u8],
    ) {
        let (l0, l1) = (d.lambda0, d.lambda1);
        let u0 = d.U0 * l0;
        let u1 = d.U1 * l1;
        let g0 = l0 + gamma;
        let e0 = (-g0 * dt).exp();
        let flow = u0 * (1.0 - e0) / g0;
        let (insp_step, insp_forever) = match delta {
            Detectability::Perfect => (0.0, 0.0),
            Detectability::Finite(delta) => {
                let k = g0 + delta;
                ((1.0 - (-k * dt).exp()) / k, 1.0 / k)
            }
        };
        let m = c.m;
        let work = |j: usize| (u1 + gamma * c.q[j] * w) / (l1 + gamma);
        let shirk_forever = u0 / g0 + gamma * c.q[m] * w * insp_forever;
        let (v, a) = pick(work(m), shirk_forever);
        out_v[m] = v;
        out_a[m] = a;
        for j in (0..m).rev() {
            let shirk = flow + gamma * c.q[j] * w * insp_step + e0 * out_v[j + 1];
            let (v, a) = pick(work(j), shirk);
            out_v[j] = v;
            out_a[j] = a;
        }
    }

    pub(super) fn solve(
        d: &DerivedParams,
        delta: Detectability,
        lay: &Layout,
        cfg: &DPConfig,
    ) -> Result<DPSolution> {
        let c = coeffs(d, delta, lay.dt, cfg.horizon_for(d));
        let m = c.m;
        let n = lay.n;
        let width = |k: usize| k.min(m) + 1;
        let mut tail_v = vec![0.0; m + 1];
        let mut tail_a = vec![1u8; m + 1];

        // one backward pass; `record` collects rows when requested
        let pass = |w: f64, mut record: Option<&mut (Vec<Vec<f64>>, Vec<Vec<u8>>)>,
                        tail_v: &mut Vec<f64>,
                        tail_a: &mut Vec<u8>|
         -> f64 {
            if let Some(g) = lay.tail_gamma {
                tail(d, delta, &c, g, lay.dt, w, tail_v, tail_a);
            }
            let h = lay.hazard[n];
            let mut next: Vec<f64> = (0..width(n))
                .map(|j| {
                    let cont = if lay.tail_gamma.is_some() { tail_v[j] } else { 0.0 };
                    h * c.q[j] * w + (1.0 - h) * cont
                })
                .collect();
            if let Some(rec) = record.as_deref_mut() {
                rec.0.push(next.clone());
                rec.1.push(vec![1; next.len()]);
            }
            if n == 0 {
                return next[0];
            }
            for k in (0..n).rev() {
                let wk = width(k);
                let mut row = vec![0.0; wk];
                let mut acts = vec![1u8; wk];
                for j in 0..wk {
                    let work = c.flow1 + c.e1 * next[j];
                    let shirk = c.flow0 + c.e0 * next[(j + 1).min(m)];
                    let (v, a) = pick(work, shirk);
                    let h = lay.hazard[k];
                    row[j] = if h > 0.0 { h * c.q[j] * w + (1.0 - h) * v } else { v };
                    acts[j] = a;
                }
                if let Some(rec) = record.as_deref_mut() {
                    rec.0.push(row.clone());
                    rec.1.push(acts);
                }
                next = row;
            }
            next[0]
        };

        let (w, iters) = outer_loop(
            |w| Ok(pass(w, None, &mut tail_v, &mut tail_a)),
            d.U1,
            cfg,
        )?;
        let mut rec = (Vec::with_capacity(n + 1), Vec::with_capacity(n + 1));
        pass(w, Some(&mut rec), &mut tail_v, &mut tail_a);
        rec.0.reverse();
        rec.1.reverse();

        let on_path_work = on_path(d, &c, lay, w, &rec.0, &tail_v);
        Ok(DPSolution {
            W: w,
            dt: lay.dt,
            times: (0..=n).map(|k| k as f64 * lay.dt).collect(),
            q_grid: c.q.clone(),
            value: rec.0,
            action: rec.1,
            tail_value: if lay.tail_gamma.is_some() { tail_v } else { vec![] },
            tail_action: if lay.tail_gamma.is_some() { tail_a } else { vec![] },
            on_path_work,
            outer_iterations: iters,
        })
    }

    /// Whether work is optimal, up to rounding slack, at every state with
    /// passage probability one.
    fn on_path(
        d: &DerivedParams,
        c: &Coeffs,
        lay: &Layout,
        w: f64,
        rows: &[Vec<f64>],
        tail_v: &[f64],
    ) -> bool {
        let slack = tie_slack(d);
        for k in 0..lay.n {
            let next = &rows[k + 1];
            let work = c.flow1 + c.e1 * next[0];
            let shirk = c.flow0 + c.e0 * next[1.min(next.len() - 1)];
            if shirk > work + slack {
                return false;
            }
        }
        if let Some(gamma) = lay.tail_gamma {
            let work = (d.U1 * d.lambda1 + gamma * w) / (d.lambda1 + gamma);
            if tail_v[0] > work + slack {
                return false;
            }
        }
        true
    }
}

/// With recovery the passage probability can rise again, so beliefs live on
/// a uniform grid on `[0, 1]` with linear interpolation between nodes.
mod grid_beliefs {
    use super::*;

    fn interp(v: &[f64], q: f64) -> f64 {
        let n = v.len() - 1;
        let x = (q.clamp(0.0, 1.0)) * n as f64;
        let i = (x.floor() as usize).min(n - 1);
        let f = x - i as f64;
        v[i] * (1.0 - f) + v[i + 1] * f
    }

    struct Step {
        e1: f64,
        e0: f64,
        flow1: f64,
        flow0: f64,
        /// Belief after one step of each action, per node.
        next_work: Vec<f64>,
        next_shirk: Vec<f64>,
    }

    fn step(d: &DerivedParams, delta: Detectability, rho: f64, q: &[f64], dt: f64) -> Step {
        let e1 = (-d.lambda1 * dt).exp();
        let e0 = (-d.lambda0 * dt).exp();
        let er = (-rho * dt).exp();
        let ed = delta.survival(dt);
        Step {
            e1,
            e0,
            flow1: d.U1 * (1.0 - e1),
            flow0: d.U0 * (1.0 - e0),
            next_work: q.iter().map(|&x| 1.0 - (1.0 - x) * er).collect(),
            next_shirk: q.iter().map(|&x| x * ed).collect(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn tail(
        d: &DerivedParams,
        delta: Detectability,
        rho: f64,
        q: &[f64],
        gamma: f64,
        dt: f64,
        w: f64,
        v: &mut Vec<f64>,
        a: &mut [u8],
        cfg: &DPConfig,
    ) -> Result<()> {
        let (l0, l1) = (d.lambda0, d.lambda1);
        let (u0, u1) = (d.U0 * l0, d.U1 * l1);
        let (g0, g1) = (l0 + gamma, l1 + gamma);
        let e0 = (-g0 * dt).exp();
        let e1 = (-g1 * dt).exp();
        let er = (-rho * dt).exp();
        let ed = delta.survival(dt);
        let ins0 = match delta {
            Detectability::Perfect => 0.0,
            Detectability::Finite(dl) => (1.0 - (-(g0 + dl) * dt).exp()) / (g0 + dl),
        };
        let a1 = (1.0 - e1) / g1;
        let a1r = (1.0 - (-(g1 + rho) * dt).exp()) / (g1 + rho);
        let mut next = v.clone();
        let contraction = 1.0 - e0.max(e1);
        for _ in 0..cfg.max_sweeps {
            let mut change: f64 = 0.0;
            for (i, &qi) in q.iter().enumerate() {
                let work = u1 * a1 + gamma * w * (a1 - (1.0 - qi) * a1r)
                    + e1 * interp(v, 1.0 - (1.0 - qi) * er);
                let shirk = u0 * (1.0 - e0) / g0 + gamma * w * qi * ins0 + e0 * interp(v, qi * ed);
                let (val, act) = pick(work, shirk);
                change = change.max((val - v[i]).abs());
                next[i] = val;
                a[i] = act;
            }
            std::mem::swap(v, &mut next);
            if change / contraction < cfg.tol * 1e-2 {
                return Ok(());
            }
        }
        Err(Error::NonConvergence(format!(
            "exponential-phase value iteration did not settle in {} sweeps",
            cfg.max_sweeps
        )))
    }

    pub(super) fn solve(
        d: &DerivedParams,
        delta: Detectability,
        rho: f64,
        lay: &Layout,
        cfg: &DPConfig,
    ) -> Result<DPSolution> {
        let nq = cfg.q_points;
        let q: Vec<f64> = (0..nq).map(|i| i as f64 / (nq - 1) as f64).collect();
        let st = step(d, delta, rho, &q, lay.dt);
        let n = lay.n;
        let mut tail_v = vec![d.U1; nq];
        let mut tail_a = vec![1u8; nq];
        let top = nq - 1;

        let pass = |w: f64,
                        mut record: Option<&mut (Vec<Vec<f64>>, Vec<Vec<u8>>)>,
                        tail_v: &mut Vec<f64>,
                        tail_a: &mut Vec<u8>|
         -> Result<(f64, bool)> {
            if let Some(g) = lay.tail_gamma {
                tail(d, delta, rho, &q, g, lay.dt, w, tail_v, tail_a, cfg)?;
            }
            let h = lay.hazard[n];
            let mut next: Vec<f64> = q
                .iter()
                .enumerate()
                .map(|(j, &qj)| {
                    let cont = if lay.tail_gamma.is_some() { tail_v[j] } else { 0.0 };
                    h * qj * w + (1.0 - h) * cont
                })
                .collect();
            let mut on_path = true;
            if let Some(rec) = record.as_deref_mut() {
                rec.0.push(next.clone());
                rec.1.push(vec![1; nq]);
            }
            for k in (0..n).rev() {
                let mut row = vec![0.0; nq];
                let mut acts = vec![1u8; nq];
                for j in 0..nq {
                    let work = st.flow1 + st.e1 * interp(&next, st.next_work[j]);
                    let shirk = st.flow0 + st.e0 * interp(&next, st.next_shirk[j]);
                    let (v, a) = pick(work, shirk);
                    if j == top && shirk > work + tie_slack(d) {
                        on_path = false;
                    }
                    let hk = lay.hazard[k];
                    row[j] = if hk > 0.0 { hk * q[j] * w + (1.0 - hk) * v } else { v };
                    acts[j] = a;
                }
                if let Some(rec) = record.as_deref_mut() {
                    rec.0.push(row.clone());
                    rec.1.push(acts);
                }
                next = row;
            }
            Ok((if n == 0 { tail_v[top] } else { next[top] }, on_path))
        };

        let (w, iters) = outer_loop(
            |w| pass(w, None, &mut tail_v, &mut tail_a).map(|r| r.0),
            d.U1,
            cfg,
        )?;
        let mut rec = (Vec::new(), Vec::new());
        let (_, mut on_path) = pass(w, Some(&mut rec), &mut tail_v, &mut tail_a)?;
        rec.0.reverse();
        rec.1.reverse();
        if lay.tail_gamma.is_some() && tail_a[top] == 0 {
            on_path = false;
        }
        Ok(DPSolution {
            W: w,
            dt: lay.dt,
            times: (0..=n).map(|k| k as f64 * lay.dt).collect(),
            q_grid: q,
            value: rec.0,
            action: rec.1,
            tail_value: if lay.tail_gamma.is_some() { tail_v } else { vec![] },
            tail_action: if lay.tail_gamma.is_some() { tail_a } else { vec![] },
            on_path_work: on_path,
            outer_iterations: iters,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(lambda0: f64, lambda1: f64, u0: f64, u1: f64, delta: Detectability) -> ModelParams {
        ModelParams::from_values(lambda0, lambda1, u0, u1, 0.5, delta, 0.0).unwrap()
    }

    #[test]
    fn no_inspection_picks_better_stationary_value() {
        let cfg = DPConfig::default();
        for (u0, u1) in [(2.0, 1.25), (1.0, 1.5)] {
            let p = params(2.0, 1.0, u0, u1, Detectability::Perfect);
            let sol = agent_dp(None, &p, &cfg).unwrap();
            let want = f64::max(u0, u1);
            assert!((sol.W - want).abs() < 1e-3 * want, "{} vs {want}", sol.W);
            assert_eq!(sol.on_path_work, u1 >= u0);
        }
    }

    #[test]
    fn periodic_at_and_above_threshold() {
        let p = params(1.0, 2.0, 2.0, 1.0, Detectability::Perfect);
        let cfg = DPConfig::default();
        let tau = 2f64.ln();
        let sol = agent_dp(Some(&InspectionPolicy::Periodic { tau }), &p, &cfg).unwrap();
        assert!((sol.W - 1.0).abs() < 5e-3, "{}", sol.W);
        assert!(sol.on_path_work);
        let loose = agent_dp(Some(&InspectionPolicy::Periodic { tau: 1.05 * tau }), &p, &cfg).unwrap();
        assert!(loose.W > 1.0 + 1e-3, "{}", loose.W);
        assert!(!loose.on_path_work);
    }

    #[test]
    fn exponential_maintenance_perfect() {
        let p = params(2.0, 1.0, 2.0, 1.25, Detectability::Perfect);
        let sol = agent_dp(Some(&InspectionPolicy::Exponential { gamma: 1.2 }), &p, &DPConfig::default()).unwrap();
        assert!((sol.W - 1.25).abs() < 5e-3, "{}", sol.W);
        assert!(sol.on_path_work);
        // shirking until the inspection is exactly as good as working
        let shirk: f64 = 4.0 / (2.0 + 1.2);
        assert!((shirk - 1.25).abs() < 1e-12);
        let loose = agent_dp(Some(&InspectionPolicy::Exponential { gamma: 1.14 }), &p, &DPConfig::default()).unwrap();
        assert!(loose.W > 1.25 + 1e-3);
    }

    #[test]
    fn delayed_maintenance() {
        let p = params(2.0, 1.0, 2.0, 1.25, Detectability::Finite(5.0));
        let sol = crate::solver::solve_optimal(&p).unwrap();
        let dp = agent_dp(Some(&sol.policy), &p, &DPConfig::default()).unwrap();
        assert!((dp.W - 1.25).abs() < 5e-3, "{}", dp.W);
        assert!(dp.on_path_work);
    }

    #[test]
    fn rejects_bad_config() {
        let p = params(2.0, 1.0, 2.0, 1.25, Detectability::Perfect);
        let cfg = DPConfig {
            q_points: 10,
            ..DPConfig::default()
        };
        assert!(matches!(agent_dp(None, &p, &cfg), Err(Error::PreconditionViolated(_))));
        let cfg = DPConfig::default().with_dt(0.0);
        assert!(matches!(agent_dp(None, &p, &cfg), Err(Error::PreconditionViolated(_))));
    }
}
