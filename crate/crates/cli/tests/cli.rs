mod common;

use common::*;
use serde_json::Value;

fn close(a: &Value, b: f64, tol: f64) -> bool {
    (a.as_f64().unwrap() - b).abs() <= tol
}

#[test]
fn solve_maintenance_perfect_is_exponential() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", MAINTENANCE_PERFECT);
    let out = inspect(&["solve", "--params", path_str(&p)]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_valid("policy_solution.schema.json", &v);
    assert!(close(&v["policy"]["exponential"]["gamma"], 1.2, 1e-12));
    assert!(close(&v["cost"], 1.2, 1e-12));
}

#[test]
fn solve_maintenance_is_delayed_exponential() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", MAINTENANCE);
    let out = inspect(&["solve", "--params", path_str(&p)]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_valid("policy_solution.schema.json", &v);
    let pol = &v["policy"]["delayed_exponential"];
    assert!(close(&pol["tau_hat"], 0.358352, 1e-6));
    assert!(close(&pol["gamma"], 2.210526, 1e-6));
    for (name, r) in v["residuals"].as_object().unwrap() {
        assert!(r.as_f64().unwrap().abs() < 1e-10, "{name}: {r}");
    }
}

#[test]
fn solve_innovation_reports_infinite_free_fields_as_schema_values() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", INNOVATION);
    let out = inspect(&["solve", "--params", path_str(&p)]);
    let v = json(&out);
    assert_valid("policy_solution.schema.json", &v);
    assert!(close(&v["tau_star"], 0.948560, 1e-6));
    assert!(close(&v["t_bar"], std::f64::consts::LN_2, 1e-12));
}

#[test]
fn infeasible_exits_2_with_assumption_report() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", LOW_DELTA);
    let out = inspect(&["solve", "--params", path_str(&p)]);
    assert_eq!(code(&out), 2);
    assert!(out.stdout.is_empty());
    let err = String::from_utf8(out.stderr).unwrap();
    let (first, rest) = err.split_once('\n').unwrap();
    assert!(first.starts_with("error:"), "{first}");
    let report: Value = serde_json::from_str(rest).unwrap();
    assert_valid("assumption_report.schema.json", &report);
    assert_eq!(report["a2a_holds"], Value::Bool(false));
}

#[test]
fn verify_solved_maintenance_passes() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", MAINTENANCE);
    let out = inspect(&["verify", "--params", path_str(&p)]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_valid("verify_report.schema.json", &v);
    assert_eq!(v["pass"], Value::Bool(true));
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["pass"] == Value::Bool(true)));
}

#[test]
fn verify_flags_loosened_period() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", INNOVATION);
    let tau = 1.05 * 0.9485599924429406;
    let policy = format!(r#"{{"periodic":{{"tau":{tau}}}}}"#);
    let out = inspect(&["verify", "--params", path_str(&p), "--policy", &policy]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_valid("verify_report.schema.json", &v);
    assert_eq!(v["pass"], Value::Bool(false));
    assert!(v["dp"]["gap"].as_f64().unwrap() > 1e-3);
}

#[test]
fn verify_without_inspections_checks_no_inspection_value() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", MAINTENANCE);
    let out = inspect(&["verify", "--params", path_str(&p), "--policy", "none"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_valid("verify_report.schema.json", &v);
    assert_eq!(v["policy"], Value::Null);
    assert_eq!(v["checks"].as_array().unwrap().len(), 1);
    // max(U0, U1) = U0 = 2
    assert!(close(&v["dp"]["W"], 2.0, 2e-3));
}

#[test]
fn simulate_output_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", MAINTENANCE_PERFECT);
    let trace = dir.path().join("trace.csv");
    let out = inspect(&[
        "simulate",
        "--params",
        path_str(&p),
        "--policy",
        r#"{"exponential":{"gamma":1.2}}"#,
        "--runs",
        "2000",
        "--seed",
        "7",
        "--trace",
        path_str(&trace),
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_valid("simulate_output.schema.json", &v);
    assert_eq!(v["report"]["n_runs"], 2000);
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "run,end_cause,end_time,n_inspections,disc_cost,disc_payoff"
    );
    assert_eq!(lines.count(), 2000);
}

#[test]
fn simulate_deviation_strategy() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", MAINTENANCE_PERFECT);
    let out = inspect(&[
        "simulate",
        "--params",
        path_str(&p),
        "--policy",
        r#"{"exponential":{"gamma":1.2}}"#,
        "--strategy",
        r#"{"shirk_then_work":{"t_switch":0.1}}"#,
        "--runs",
        "500",
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_valid("simulate_output.schema.json", &v);
    assert_eq!(v["closed_form"]["cost"], Value::Null);
}

fn csv_rows(out: &std::process::Output) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(&out.stdout[..]);
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    for rec in r.records() {
        rows.push(rec.unwrap().iter().map(String::from).collect());
    }
    rows
}

#[test]
fn sweep_t_starts_at_value_gap() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", MAINTENANCE);
    let out = inspect(&[
        "sweep", "--params", path_str(&p), "--axis", "t", "--min", "0", "--max", "2", "--n", "21",
    ]);
    assert_eq!(code(&out), 0);
    let rows = csv_rows(&out);
    assert_eq!(rows[0], ["t", "loss_shirk", "discount_cost"]);
    assert_eq!(rows.len(), 22);
    assert_eq!(rows[1][0], "0");
    assert!((rows[1][1].parse::<f64>().unwrap() - 0.75).abs() < 1e-15);
    assert_eq!(rows[1][2], "1");
}

#[test]
fn sweep_lambda_ratio_is_one_at_one() {
    let dir = tempfile::tempdir().unwrap();
    // mu = (U0 - U1)/U0 = 0.375
    let p = write(dir.path(), "p.json", MAINTENANCE);
    let out = inspect(&[
        "sweep", "--params", path_str(&p), "--axis", "lambda_ratio", "--min", "1", "--max", "8", "--n", "15",
    ]);
    assert_eq!(code(&out), 0);
    let rows = csv_rows(&out);
    assert_eq!(rows[0], ["lambda_ratio", "cost_ratio"]);
    assert!((rows[1][1].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    let vals: Vec<f64> = rows[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(vals.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn sweep_lambda_b_switches_kind_once() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", MAINTENANCE);
    let out = inspect(&[
        "sweep", "--params", path_str(&p), "--axis", "lambda_b", "--min", "0.75", "--max", "2.5", "--n", "15",
    ]);
    assert_eq!(code(&out), 0);
    let rows = csv_rows(&out);
    let kind = rows[0].iter().position(|h| h == "kind").unwrap();
    let kinds: Vec<&str> = rows[1..].iter().map(|r| r[kind].as_str()).collect();
    let switches = kinds.windows(2).filter(|w| w[0] != w[1]).count();
    assert_eq!(switches, 1, "{kinds:?}");
    assert_eq!(kinds[0], "periodic");
    assert_eq!(*kinds.last().unwrap(), "delayed_exponential");
}

#[test]
fn sweep_flags_infeasible_rows() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", MAINTENANCE);
    let out = inspect(&[
        "sweep", "--params", path_str(&p), "--axis", "delta", "--min", "0.5", "--max", "5", "--n", "4",
    ]);
    assert_eq!(code(&out), 2);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 5);
    let flag = rows[0].iter().position(|h| h == "flag").unwrap();
    let cost = rows[0].iter().position(|h| h == "cost").unwrap();
    assert!(!rows[1][flag].is_empty());
    assert!(rows[1][cost].is_empty());
    assert!(rows[4][flag].is_empty());
}

#[test]
fn bad_configuration_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", MAINTENANCE);
    let ps = path_str(&p);
    assert_eq!(code(&inspect(&["solve", "--bogus"])), 4);
    assert_eq!(code(&inspect(&["solve"])), 4);
    assert_eq!(code(&inspect(&["solve", "--params", "/nonexistent/params.json"])), 4);
    let bad = write(dir.path(), "bad.json", r#"{"lambda_g":-1,"lambda_b":1,"r":0.5,"delta":1,"u0":1,"u1":1}"#);
    assert_eq!(code(&inspect(&["solve", "--params", path_str(&bad)])), 4);
    let range = ["sweep", "--params", ps, "--axis", "t", "--min", "1", "--max", "1", "--n", "3"];
    assert_eq!(code(&inspect(&range)), 4);
    let few = ["sweep", "--params", ps, "--axis", "t", "--min", "0", "--max", "1", "--n", "1"];
    assert_eq!(code(&inspect(&few)), 4);
    assert_eq!(code(&inspect(&["verify", "--params", ps, "--policy", "sometimes"])), 4);
    let cfg = write(dir.path(), "cfg.json", r#"{"command":"sweep"}"#);
    assert_eq!(code(&inspect(&["solve", "--config", path_str(&cfg), "--params", ps])), 4);
    let unknown = write(dir.path(), "cfg2.json", r#"{"colour":"blue"}"#);
    assert_eq!(code(&inspect(&["solve", "--config", path_str(&unknown)])), 4);
}

#[test]
fn help_exits_0() {
    assert_eq!(code(&inspect(&["--help"])), 0);
    assert_eq!(code(&inspect(&["sweep", "--help"])), 0);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_text = format!(
        r#"{{"command":"sweep","params":{MAINTENANCE},"axis":"x","min":0,"max":1,"n":5}}"#
    );
    let cfg_value: Value = serde_json::from_str(&cfg_text).unwrap();
    assert_valid("run_config.schema.json", &cfg_value);
    let cfg = write(dir.path(), "cfg.json", &cfg_text);
    let out = inspect(&["sweep", "--config", path_str(&cfg), "--n", "3"]);
    assert_eq!(code(&out), 0);
    let rows = csv_rows(&out);
    assert_eq!(rows[0], ["x", "loss_shirk"]);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[2][0], "0.5");
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", MAINTENANCE_PERFECT);
    let dest = dir.path().join("solution.json");
    let out = inspect(&["solve", "--params", path_str(&p), "--out", path_str(&dest)]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&dest).unwrap()).unwrap();
    assert_valid("policy_solution.schema.json", &v);
}

#[test]
fn repeated_invocations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", MAINTENANCE);
    let ps = path_str(&p);
    let t1 = dir.path().join("t1.csv");
    let t2 = dir.path().join("t2.csv");
    let sim = |trace: &std::path::Path| {
        inspect(&["simulate", "--params", ps, "--runs", "5000", "--seed", "11", "--trace", path_str(trace)])
    };
    let (a, b) = (sim(&t1), sim(&t2));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(std::fs::read(&t1).unwrap(), std::fs::read(&t2).unwrap());
    let sweep = ["sweep", "--params", ps, "--axis", "lambda_b", "--min", "0.6", "--max", "2.5", "--n", "25"];
    assert_eq!(inspect(&sweep).stdout, inspect(&sweep).stdout);
    let solve = ["solve", "--params", ps];
    assert_eq!(inspect(&solve).stdout, inspect(&solve).stdout);
}
