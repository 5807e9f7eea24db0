//! JSON reports.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use cps_core::penalty::{PenaltyConfig, PenaltyKind};
use cps_core::solver::SolveResult;
use serde_json::{json, Map, Value};

use crate::error::{CliError, CliResult};
use crate::io::{atomic_write, PgmScale};

/// Finite values as numbers; infinities and NaN as `"inf"`, `"-inf"`, `"nan"`.
pub fn real(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn reals(values: &[f64]) -> Value {
    Value::Array(values.iter().map(|&v| real(v)).collect())
}

pub fn metrics(m: &BTreeMap<String, f64>) -> Value {
    Value::Object(m.iter().map(|(k, &v)| (k.clone(), real(v))).collect())
}

pub fn scale(s: Option<PgmScale>) -> Value {
    s.map_or(
        Value::Null,
        |s| json!({ "offset": real(s.offset), "step": real(s.step) }),
    )
}

/// Solver outcome fields shared by the single-run subcommands.
#[derive(Debug, Clone, Default)]
pub struct SolveFields {
    pub penalty: Option<PenaltyConfig>,
    pub mu: Option<f64>,
    pub lipschitz: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub cost_trace: Vec<f64>,
}

impl SolveFields {
    pub fn of(res: &SolveResult) -> Self {
        SolveFields {
            penalty: Some(res.penalty),
            mu: Some(res.mu),
            lipschitz: Some(res.lipschitz),
            iterations: res.iterations,
            converged: res.converged,
            cost_trace: res.cost_trace.clone(),
        }
    }
}

/// Report skeleton with the fixed field set. `penalty` is the requested
/// penalty, used when no solve ran.
pub fn solve_report(
    problem: &str,
    requested: PenaltyConfig,
    fields: &SolveFields,
    eps: f64,
    max_iter: usize,
    seed: u64,
) -> Map<String, Value> {
    let pen = fields.penalty.unwrap_or(requested);
    let opt = |v: Option<f64>| v.map_or(Value::Null, real);
    let mut m = Map::new();
    m.insert("problem".into(), json!(problem));
    m.insert("penalty".into(), json!(pen.kind.name()));
    let cauchy = pen.kind == PenaltyKind::Cauchy;
    m.insert(
        "gamma".into(),
        if cauchy && fields.penalty.is_some() {
            real(pen.gamma)
        } else {
            Value::Null
        },
    );
    m.insert(
        "weight".into(),
        if cauchy {
            Value::Null
        } else {
            real(pen.weight)
        },
    );
    m.insert("mu".into(), opt(fields.mu));
    m.insert("lipschitz".into(), opt(fields.lipschitz));
    m.insert("eps".into(), real(eps));
    m.insert("max_iter".into(), json!(max_iter));
    m.insert("iterations".into(), json!(fields.iterations));
    m.insert("converged".into(), json!(fields.converged));
    m.insert("cost_trace".into(), reals(&fields.cost_trace));
    m.insert("metrics".into(), json!({}));
    m.insert("seed".into(), json!(seed));
    m.insert("scale".into(), Value::Null);
    m
}

/// Pretty JSON to `path` (atomically) or to stdout.
pub fn emit(report: &Value, path: Option<&Path>) -> CliResult<()> {
    let mut text =
        serde_json::to_string_pretty(report).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    match path {
        Some(p) => atomic_write(p, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}
