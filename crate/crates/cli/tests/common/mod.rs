#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub const INNOVATION: &str = r#"{"lambda_g":1.5,"lambda_b":0.5,"r":0.5,"delta":"perfect","u0":2,"u1":2.5}"#;
pub const MAINTENANCE_PERFECT: &str = r#"{"lambda_g":0.5,"lambda_b":1.5,"r":0.5,"delta":"perfect","u0":4,"u1":1.25}"#;
pub const MAINTENANCE: &str = r#"{"lambda_g":0.5,"lambda_b":1.5,"r":0.5,"delta":5,"u0":4,"u1":1.25}"#;
/// MAINTENANCE with detection too weak for any policy to deter shirking.
pub const LOW_DELTA: &str = r#"{"lambda_g":0.5,"lambda_b":1.5,"r":0.5,"delta":0.5,"u0":4,"u1":1.25}"#;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_inspect")
}

pub fn inspect(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("INSPECT_LOG")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}); stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

pub fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas")
}

fn load(name: &str) -> Value {
    let text = std::fs::read_to_string(schema_dir().join(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Validator for one of the shipped schemas, with the shared definitions registered.
pub fn validator(name: &str) -> jsonschema::Validator {
    let common = load("common.schema.json");
    let id = common["$id"].as_str().unwrap().to_string();
    jsonschema::options()
        .with_resource(id, jsonschema::Resource::from_contents(common).unwrap())
        .build(&load(name))
        .unwrap()
}

pub fn assert_valid(schema: &str, doc: &Value) {
    let v = validator(schema);
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{e} at {}", e.instance_path)).collect();
    assert!(errors.is_empty(), "{schema}: {errors:?}\n{doc:#}");
}
