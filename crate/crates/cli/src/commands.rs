use std::fs::File;
use std::io::Write;

use inspect_core::oracle::{
    absorbing_shirk_check, agent_dp, best_deviation_scan, renewal_payoff,
    verify_binding_constraints, verify_hjb, DPConfig, DeviationFamily, ResidualReport,
};
use inspect_core::payoffs::{cost_ratio, loss_shirk, loss_shirk_x, policy_cost};
use inspect_core::sim::{simulate_runs, summarize, SimConfig, SimReport};
use inspect_core::solver::{solve_optimal, PolicySolution};
use inspect_core::{derive, ActionStrategy, Detectability, Error, InspectionPolicy, ModelParams};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Axis, RunConfig};
use crate::exit::{CliError, INFEASIBLE};

/// Text produced by a command plus the exit code to finish with.
pub struct Output {
    pub text: String,
    pub code: i32,
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn policy_or_solve(cfg: &RunConfig, params: &ModelParams) -> Result<Option<InspectionPolicy>, CliError> {
    match &cfg.policy {
        Some(spec) => spec.resolve(),
        None => {
            info!("no policy given, solving for the optimal one");
            Ok(Some(solve_optimal(params)?.policy))
        }
    }
}

pub fn run_solve(cfg: &RunConfig) -> Result<Output, CliError> {
    let params = cfg.params()?;
    let sol: PolicySolution = solve_optimal(&params)?;
    Ok(Output {
        text: json(&sol),
        code: 0,
    })
}

#[derive(Serialize)]
struct Check {
    name: String,
    value: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct DpSummary {
    #[serde(rename = "W")]
    w: f64,
    /// `W` minus the on-path value `U1`; for the no-inspection case, minus `max(U0, U1)`.
    gap: f64,
    on_path_work: bool,
    dt: f64,
    outer_iterations: usize,
}

#[derive(Serialize)]
struct VerifyReport {
    policy: Option<InspectionPolicy>,
    dp: DpSummary,
    checks: Vec<Check>,
    residuals: Vec<ResidualReport>,
    /// Whether continued shirking after a first shirk is agent-optimal; only for exponential policies.
    absorbing_shirk: Option<bool>,
    pass: bool,
}

const DP_TOL: f64 = 5e-3;
const DEVIATION_TOL: f64 = 1e-8;
const BINDING_TOL: f64 = 1e-8;
const HJB_TOL: f64 = 1e-9;

/// Passes when `value` does not exceed `tolerance`; for gains that must not be positive.
fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Check {
    Check {
        name: name.into(),
        value,
        tolerance,
        pass: value <= tolerance,
    }
}

fn check(name: impl Into<String>, value: f64, tolerance: f64) -> Check {
    Check {
        name: name.into(),
        value,
        tolerance,
        pass: value.abs() <= tolerance,
    }
}

pub fn run_verify(cfg: &RunConfig) -> Result<Output, CliError> {
    let params = cfg.params()?;
    let d = derive(&params)?;
    let dp_cfg = DPConfig::default().with_dt(cfg.dt.unwrap_or(1e-3));
    let policy = policy_or_solve(cfg, &params)?;
    let dp = agent_dp(policy.as_ref(), &params, &dp_cfg)?;
    let mut checks = Vec::new();
    let mut residuals = Vec::new();
    let mut absorbing = None;

    let Some(policy) = policy else {
        let target = d.U0.max(d.U1);
        let rel = (dp.W - target) / target;
        checks.push(check("no_inspection_value_relative", rel, 1e-3));
        let pass = checks.iter().all(|c| c.pass);
        let report = VerifyReport {
            policy: None,
            dp: DpSummary {
                w: dp.W,
                gap: dp.W - target,
                on_path_work: dp.on_path_work,
                dt: dp.dt,
                outer_iterations: dp.outer_iterations,
            },
            checks,
            residuals,
            absorbing_shirk: None,
            pass,
        };
        return Ok(Output {
            text: json(&report),
            code: 0,
        });
    };

    let scale = d.U1.abs().max(1.0);
    checks.push(check("dp_renewal_value", dp.W - d.U1, DP_TOL));
    checks.push(Check {
        name: "dp_on_path_work".into(),
        value: if dp.on_path_work { 1.0 } else { 0.0 },
        tolerance: 0.0,
        pass: dp.on_path_work,
    });

    let mut families = vec![
        DeviationFamily::ShirkThenWork,
        DeviationFamily::WorkThenShirk,
        DeviationFamily::ShirkToEnd,
    ];
    if matches!(policy, InspectionPolicy::DelayedExponential { .. }) {
        families.push(DeviationFamily::ShirkWorkShirk);
    }
    let mut best_dev = f64::NEG_INFINITY;
    for fam in families {
        let opt = best_deviation_scan(&policy, &params, fam)?;
        best_dev = best_dev.max(opt.payoff);
        let name = serde_json::to_value(fam).expect("serializable");
        checks.push(at_most(
            format!("deviation_{}", name.as_str().unwrap_or("family")),
            opt.payoff - d.U1,
            DEVIATION_TOL * scale,
        ));
    }
    checks.push(at_most("deviation_scan_below_dp", best_dev - dp.W, DP_TOL));

    let exponential_phase = match policy {
        InspectionPolicy::Exponential { gamma } => Some(gamma),
        InspectionPolicy::DelayedExponential { gamma, pi, .. } if pi < 1.0 => Some(gamma),
        _ => None,
    };
    if let Some(gamma) = exponential_phase {
        if params.rho == 0.0 && d.U0 > d.U1 {
            for rep in verify_binding_constraints(&policy, &params)? {
                checks.push(check(format!("binding_{}", rep.check), rep.max_residual, BINDING_TOL));
                residuals.push(rep);
            }
        }
        let recovery_regime = params.rho > 0.0
            && matches!(policy, InspectionPolicy::Exponential { .. })
            && params.rho + params.lambda_g >= params.delta.rate() + params.lambda_b;
        if let Detectability::Finite(_) = params.delta {
            if params.rho == 0.0 || recovery_regime {
                let hjb = verify_hjb(&params, gamma, params.rho)?;
                checks.push(check("hjb", hjb.residual.max_residual, HJB_TOL * scale));
                residuals.push(hjb.residual);
            }
        }
        if matches!(policy, InspectionPolicy::Exponential { .. }) {
            absorbing = Some(absorbing_shirk_check(gamma, &d)?);
        }
    }

    let pass = checks.iter().all(|c| c.pass);
    let report = VerifyReport {
        policy: Some(policy),
        dp: DpSummary {
            w: dp.W,
            gap: dp.W - d.U1,
            on_path_work: dp.on_path_work,
            dt: dp.dt,
            outer_iterations: dp.outer_iterations,
        },
        checks,
        residuals,
        absorbing_shirk: absorbing,
        pass,
    };
    Ok(Output {
        text: json(&report),
        code: 0,
    })
}

#[derive(Serialize)]
struct ClosedForm {
    cost: Option<f64>,
    agent_payoff: Option<f64>,
}

#[derive(Serialize)]
struct SimulateOutput {
    policy: InspectionPolicy,
    strategy: ActionStrategy,
    config: SimConfig,
    report: SimReport,
    closed_form: ClosedForm,
}

pub fn run_simulate(cfg: &RunConfig) -> Result<Output, CliError> {
    let params = cfg.params()?;
    let d = derive(&params)?;
    let policy = policy_or_solve(cfg, &params)?
        .ok_or_else(|| CliError::config("simulate needs an inspection policy"))?;
    let strategy = cfg.strategy.clone().unwrap_or(ActionStrategy::AlwaysWork);
    let sim_cfg = SimConfig {
        n_runs: cfg.runs.unwrap_or(10_000),
        seed: cfg.seed.unwrap_or(0),
        ..SimConfig::default()
    };
    let records = simulate_runs(&policy, &strategy, &params, &sim_cfg)?;
    if let Some(path) = &cfg.trace {
        let file = File::create(path)
            .map_err(|e| CliError::io(format!("cannot create {}: {e}", path.display())))?;
        let mut w = csv::Writer::from_writer(file);
        for r in &records {
            w.serialize(r)
                .map_err(|e| CliError::io(format!("writing trace: {e}")))?;
        }
        w.flush()
            .map_err(|e| CliError::io(format!("writing trace: {e}")))?;
    }
    let report = summarize(&records);
    let closed_form = ClosedForm {
        cost: if strategy.to_step().1 == [1] {
            policy_cost(&policy, &d).ok()
        } else {
            None
        },
        agent_payoff: renewal_payoff(&policy, &params, &strategy).ok(),
    };
    Ok(Output {
        text: json(&SimulateOutput {
            policy,
            strategy,
            config: sim_cfg,
            report,
            closed_form,
        }),
        code: 0,
    })
}

/// Shortest representation that reads back to the same value.
fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn flag_of(e: &Error) -> &'static str {
    match e {
        Error::Infeasible { .. } => "infeasible",
        Error::WrongRegime(_) => "wrong_regime",
        Error::Unsupported(_) => "unsupported",
        Error::NonConvergence(_) => "non_convergence",
        Error::DivergentCost(_) => "divergent_cost",
        _ => "invalid",
    }
}

pub fn run_sweep(cfg: &RunConfig) -> Result<Output, CliError> {
    let params = cfg.params()?;
    let axis = cfg
        .axis
        .ok_or_else(|| CliError::config("sweep needs --axis"))?;
    let (min, max, n) = match (cfg.min, cfg.max, cfg.n) {
        (Some(a), Some(b), Some(n)) if a < b && n >= 2 => (a, b, n),
        _ => {
            return Err(CliError::config(
                "sweep needs --min < --max and --n >= 2",
            ))
        }
    };
    let grid: Vec<f64> = (0..n)
        .map(|i| {
            if i == n - 1 {
                max
            } else {
                min + (max - min) * i as f64 / (n - 1) as f64
            }
        })
        .collect();
    let d = derive(&params)?;

    let (header, rows): (Vec<&str>, Vec<Result<Vec<String>, (Vec<String>, CliError)>>) = match axis {
        Axis::T => (
            vec!["t", "loss_shirk", "discount_cost"],
            grid.iter()
                .map(|&t| {
                    Ok(vec![
                        num(t),
                        num(loss_shirk(t, &d, params.delta)),
                        num((-d.lambda1 * t).exp()),
                    ])
                })
                .collect(),
        ),
        Axis::X => (
            vec!["x", "loss_shirk"],
            grid.iter()
                .map(|&x| Ok(vec![num(x), num(loss_shirk_x(x, &d, params.delta))]))
                .collect(),
        ),
        Axis::LambdaRatio => (
            vec!["lambda_ratio", "cost_ratio"],
            grid.iter()
                .map(|&l| Ok(vec![num(l), num(cost_ratio(d.mu, l))]))
                .collect(),
        ),
        Axis::LambdaB | Axis::Delta | Axis::Rho => {
            let header = vec![
                axis.name(),
                "kind",
                "cost",
                "tau_star",
                "t_bar",
                "tau_hat",
                "pi_star",
                "gamma_star",
                "lambda_bar_b",
                "flag",
            ];
            let rows = grid
                .par_iter()
                .map(|&v| {
                    let p = match axis {
                        Axis::LambdaB => params.with_lambda_b(v),
                        Axis::Delta => params.with_delta(Detectability::Finite(v)),
                        _ => params.with_rho(v),
                    };
                    match solve_optimal(&p) {
                        Ok(s) => Ok(vec![
                            num(v),
                            s.policy.kind().to_string(),
                            num(s.cost),
                            opt(s.tau_star),
                            opt(s.t_bar),
                            opt(s.tau_hat),
                            opt(s.pi_star),
                            opt(s.gamma_star),
                            opt(s.lambda_bar_b),
                            String::new(),
                        ]),
                        Err(e) => {
                            let mut row = vec![String::new(); 10];
                            row[0] = num(v);
                            row[9] = flag_of(&e).to_string();
                            Err((row, CliError::from(e)))
                        }
                    }
                })
                .collect();
            (header, rows)
        }
    };

    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::io(format!("writing CSV: {e}"));
    w.write_record(&header).map_err(io)?;
    let mut code = 0;
    for row in rows {
        match row {
            Ok(r) => w.write_record(&r).map_err(io)?,
            Err((r, e)) => {
                if code == 0 {
                    code = e.code.max(INFEASIBLE);
                }
                w.write_record(&r).map_err(io)?;
            }
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::io(format!("writing CSV: {e}")))?;
    Ok(Output {
        text: String::from_utf8(bytes).expect("CSV is UTF-8"),
        code,
    })
}

pub fn emit(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => std::fs::write(path, &out.text)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(out.text.as_bytes())
                .map_err(|e| CliError::io(format!("cannot write to stdout: {e}")))
        }
    }
}
