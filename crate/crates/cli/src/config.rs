//! Run configuration: an optional JSON file overlaid by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use inspect_core::{ActionStrategy, InspectionPolicy, ModelParams};
use serde::{Deserialize, Serialize};

use crate::exit::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Solve,
    Verify,
    Simulate,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Axis {
    T,
    X,
    LambdaB,
    LambdaRatio,
    Delta,
    Rho,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::T => "t",
            Axis::X => "x",
            Axis::LambdaB => "lambda_b",
            Axis::LambdaRatio => "lambda_ratio",
            Axis::Delta => "delta",
            Axis::Rho => "rho",
        }
    }
}

/// A policy or the keyword `"none"` (no inspections at all).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicySpec {
    Keyword(String),
    Policy(InspectionPolicy),
}

impl PolicySpec {
    /// `Ok(None)` for the no-inspection keyword.
    pub fn resolve(&self) -> Result<Option<InspectionPolicy>, CliError> {
        match self {
            PolicySpec::Policy(p) => Ok(Some(p.clone())),
            PolicySpec::Keyword(k) if k == "none" => Ok(None),
            PolicySpec::Keyword(k) => Err(CliError::config(format!(
                "unknown policy keyword {k:?}; expected a policy object or \"none\""
            ))),
        }
    }
}

/// Everything a run can be told, from the file or from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub params: Option<ModelParams>,
    pub policy: Option<PolicySpec>,
    pub strategy: Option<ActionStrategy>,
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub dt: Option<f64>,
    pub axis: Option<Axis>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub n: Option<usize>,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON run configuration; flags given here override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model parameters as a JSON file.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Inspection policy: a JSON file, inline JSON, or "none".
    #[arg(long)]
    pub policy: Option<String>,
    /// Agent plan between inspections for `simulate`: a JSON file or inline JSON.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-run CSV trace path for `simulate`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Time step of the agent dynamic program.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, value_enum)]
    pub axis: Option<Axis>,
    #[arg(long, allow_negative_numbers = true)]
    pub min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub max: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::config(format!("bad {what}: {e}")))
}

/// Inline JSON when the argument looks like JSON or a bare keyword, a file path otherwise.
fn inline_or_file<T: for<'de> Deserialize<'de>>(arg: &str, what: &str) -> Result<T, CliError> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') || trimmed.starts_with('"') {
        return parse_json(trimmed, what);
    }
    if !Path::new(arg).exists() {
        // a bare word such as `none` or `always_work`
        return parse_json(&format!("{arg:?}"), what);
    }
    parse_json(&read(Path::new(arg))?, what)
}

impl RunConfig {
    pub fn load(command: Command, flags: &Flags) -> Result<RunConfig, CliError> {
        let mut cfg = match &flags.config {
            Some(path) => parse_json::<RunConfig>(&read(path)?, "config file")?,
            None => RunConfig::default(),
        };
        if let Some(c) = cfg.command {
            if c != command {
                return Err(CliError::config(format!(
                    "config file is for {c:?} but the {command:?} subcommand was given"
                )));
            }
        }
        cfg.command = Some(command);
        if let Some(path) = &flags.params {
            cfg.params = Some(parse_json(&read(path)?, "params file")?);
        }
        if let Some(arg) = &flags.policy {
            cfg.policy = Some(inline_or_file(arg, "policy")?);
        }
        if let Some(arg) = &flags.strategy {
            cfg.strategy = Some(inline_or_file(arg, "strategy")?);
        }
        macro_rules! take {
            ($($f:ident),*) => { $( if flags.$f.is_some() { cfg.$f = flags.$f.clone(); } )* };
        }
        take!(out, trace, seed, runs, dt, axis, min, max, n);
        Ok(cfg)
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        let p = self
            .params
            .ok_or_else(|| CliError::config("model parameters are required (--params or config \"params\")"))?;
        p.validate().map_err(CliError::from)?;
        Ok(p)
    }
}
