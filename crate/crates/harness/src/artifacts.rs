//! Trace CSV, timing CSV and summary JSON, all written atomically.

use std::io::Write;
use std::path::Path;

use nondecomp_core::measures::EvalMetric;
use nondecomp_core::optimizers::{TraceRecord, TrainTrace};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::train::PluginResult;
use crate::Result;

pub const TRACE_HEADER: [&str; 11] = [
    "iter",
    "samples",
    "wall_ms",
    "train_metric",
    "test_metric",
    "grad_norm",
    "alpha",
    "beta",
    "gamma1",
    "gamma2",
    "level_v",
];

pub const SUMMARY_SCHEMA_ID: &str = "nondecomp-summary/1";
/// JSON schema the summary conforms to.
pub const SUMMARY_SCHEMA: &str = include_str!("../schema/summary.v1.json");

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Trace rows in the fixed column order. `wall_ms` stays empty unless
/// `inline_timing` is set, which keeps repeated runs byte-identical.
pub fn trace_csv(trace: &TrainTrace, inline_timing: bool) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(TRACE_HEADER).map_err(anyhow::Error::from)?;
    for r in &trace.records {
        let wall = if inline_timing { r.wall_ms.to_string() } else { String::new() };
        w.write_record([
            r.iter.to_string(),
            r.samples.to_string(),
            wall,
            num(r.train_metric),
            num(r.test_metric),
            num(r.grad_norm),
            num(r.alpha),
            num(r.beta),
            num(r.gamma1),
            num(r.gamma2),
            num(r.level_v),
        ])
        .map_err(anyhow::Error::from)?;
    }
    Ok(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)
}

pub fn timing_csv(trace: &TrainTrace) -> Vec<u8> {
    let mut out = String::from("iter,wall_ms\n");
    for r in &trace.records {
        out.push_str(&format!("{},{}\n", r.iter, r.wall_ms));
    }
    out.into_bytes()
}

fn parse_opt(s: &str) -> std::result::Result<Option<f64>, String> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some).map_err(|_| format!("bad number {s:?}"))
    }
}

/// Reads a trace CSV back into records (wall time is taken as 0 when the
/// column is empty).
pub fn read_trace_csv(bytes: &[u8]) -> anyhow::Result<Vec<TraceRecord>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    anyhow::ensure!(header == TRACE_HEADER, "unexpected header {header:?}");
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let f = |k: usize| parse_opt(&row[k]).map_err(anyhow::Error::msg);
        out.push(TraceRecord {
            iter: row[0].parse()?,
            samples: row[1].parse()?,
            wall_ms: f(2)?.unwrap_or(0.0),
            train_metric: f(3)?,
            test_metric: f(4)?,
            grad_norm: f(5)?,
            alpha: f(6)?,
            beta: f(7)?,
            gamma1: f(8)?,
            gamma2: f(9)?,
            level_v: f(10)?,
        });
    }
    Ok(out)
}

/// End-of-run summary. Every number is derivable from the trace rows (and
/// `timing.csv` for wall time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: String,
    pub artifact_version: String,
    pub status: String,
    pub algorithm: String,
    pub measure: String,
    pub higher_is_better: bool,
    pub rows: usize,
    pub last_iter: u64,
    pub samples: u64,
    pub pretrain_iterations: u64,
    pub final_train_metric: Option<f64>,
    pub final_test_metric: Option<f64>,
    pub best_test_metric: Option<f64>,
    pub best_test_iter: Option<u64>,
    pub epsilon: f64,
    /// First recorded iteration whose gradient norm is at most `epsilon`.
    pub first_stable_iter: Option<u64>,
    pub wall_ms: f64,
    pub plugin: Option<PluginResult>,
    pub config: serde_json::Value,
}

impl RunSummary {
    pub fn from_records(
        records: &[TraceRecord],
        metric: &EvalMetric,
        algorithm: &str,
        status: &str,
        pretrain_iterations: u64,
        cfg: &ExperimentConfig,
        plugin: Option<PluginResult>,
    ) -> Self {
        let better = |a: f64, b: f64| if metric.higher_is_better() { a > b } else { a < b };
        let mut best: Option<(f64, u64)> = None;
        for r in records {
            if let Some(v) = r.test_metric {
                if best.is_none_or(|(b, _)| better(v, b)) {
                    best = Some((v, r.iter));
                }
            }
        }
        let last = records.last();
        RunSummary {
            schema: SUMMARY_SCHEMA_ID.into(),
            artifact_version: env!("CARGO_PKG_VERSION").into(),
            status: status.into(),
            algorithm: algorithm.into(),
            measure: cfg.measure.to_string(),
            higher_is_better: metric.higher_is_better(),
            rows: records.len(),
            last_iter: last.map_or(0, |r| r.iter),
            samples: last.map_or(0, |r| r.samples),
            pretrain_iterations,
            final_train_metric: last.and_then(|r| r.train_metric),
            final_test_metric: last.and_then(|r| r.test_metric),
            best_test_metric: best.map(|b| b.0),
            best_test_iter: best.map(|b| b.1),
            epsilon: cfg.epsilon,
            first_stable_iter: records
                .iter()
                .find(|r| r.grad_norm.is_some_and(|g| g <= cfg.epsilon))
                .map(|r| r.iter),
            wall_ms: last.map_or(0.0, |r| r.wall_ms),
            plugin,
            config: serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null),
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("summary serialises");
        v.push(b'\n');
        v
    }
}

/// Minimal checker for the subset of JSON Schema used by
/// [`SUMMARY_SCHEMA`]: `type` (string or list), `required`, `properties`
/// and `const`.
pub fn validate_against_schema(value: &serde_json::Value, schema: &serde_json::Value) -> std::result::Result<(), String> {
    use serde_json::Value;
    fn type_ok(v: &Value, t: &str) -> bool {
        match t {
            "object" => v.is_object(),
            "array" => v.is_array(),
            "string" => v.is_string(),
            "boolean" => v.is_boolean(),
            "null" => v.is_null(),
            "number" => v.is_number(),
            "integer" => v.is_u64() || v.is_i64(),
            _ => false,
        }
    }
    fn check(v: &Value, s: &Value, path: &str) -> std::result::Result<(), String> {
        if let Some(t) = s.get("type") {
            let ok = match t {
                Value::String(t) => type_ok(v, t),
                Value::Array(ts) => ts.iter().filter_map(Value::as_str).any(|t| type_ok(v, t)),
                _ => false,
            };
            if !ok {
                return Err(format!("{path}: expected type {t}, got {v}"));
            }
        }
        if let Some(c) = s.get("const") {
            if v != c {
                return Err(format!("{path}: expected {c}, got {v}"));
            }
        }
        if let (Some(req), true) = (s.get("required").and_then(Value::as_array), v.is_object()) {
            for k in req.iter().filter_map(Value::as_str) {
                if v.get(k).is_none() {
                    return Err(format!("{path}: missing {k}"));
                }
            }
        }
        if let (Some(props), Some(obj)) = (s.get("properties").and_then(Value::as_object), v.as_object()) {
            for (k, sub) in props {
                if let Some(x) = obj.get(k) {
                    check(x, sub, &format!("{path}.{k}"))?;
                }
            }
            if s.get("additionalProperties") == Some(&Value::Bool(false)) {
                if let Some(k) = obj.keys().find(|k| !props.contains_key(*k)) {
                    return Err(format!("{path}: unexpected key {k}"));
                }
            }
        }
        Ok(())
    }
    check(value, schema, "$")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace() -> TrainTrace {
        TrainTrace {
            algorithm: "dspade".into(),
            records: vec![
                TraceRecord {
                    iter: 10,
                    samples: 640,
                    wall_ms: 1.5,
                    train_metric: Some(0.5),
                    test_metric: Some(0.25),
                    grad_norm: Some(0.1),
                    alpha: Some(1.0),
                    beta: Some(0.0),
                    ..Default::default()
                },
                TraceRecord {
                    iter: 15,
                    samples: 960,
                    wall_ms: 2.0,
                    test_metric: None,
                    ..Default::default()
                },
            ],
            ..Default::default()
        }
    }

    #[test]
    fn csv_has_fixed_columns_and_blank_unused_cells() {
        let bytes = trace_csv(&trace(), false).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRACE_HEADER.join(","));
        assert_eq!(lines.next().unwrap(), "10,640,,0.5,0.25,0.1,1,0,,,");
        assert_eq!(lines.next().unwrap(), "15,960,,,,,,,,,");
        assert!(!text.contains('\r'));
        let back = read_trace_csv(&bytes).unwrap();
        assert_eq!(back[0].alpha, Some(1.0));
        assert_eq!(back[1].test_metric, None);
    }

    #[test]
    fn inline_timing_fills_wall_column() {
        let text = String::from_utf8(trace_csv(&trace(), true).unwrap()).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("10,640,1.5,"));
    }

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        let names: Vec<_> = std::fs::read_dir(p.parent().unwrap()).unwrap().collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn schema_checker() {
        let schema: serde_json::Value = serde_json::from_str(SUMMARY_SCHEMA).unwrap();
        assert_eq!(schema["properties"]["schema"]["const"], SUMMARY_SCHEMA_ID);
        let bad = serde_json::json!({"schema": "nondecomp-summary/0"});
        assert!(validate_against_schema(&bad, &schema).is_err());
    }
}
