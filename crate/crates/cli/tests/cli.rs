//! End-to-end tests of the `lognodal` binary: exit codes, artifact
//! contents, determinism, and schema conformance of the JSON outputs.

use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn lognodal(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lognodal"))
        .args(args)
        .current_dir(dir)
        .env_remove("LOGNODAL_TOL")
        .output()
        .expect("binary runs")
}

/// Minimal structural validator for the draft-07 subset our schemas use:
/// type, required, properties, items, enum, additionalProperties.
fn validate(schema: &Value, value: &Value) -> Result<(), String> {
    if let Some(types) = schema.get("type") {
        let allowed: Vec<String> = match types {
            Value::String(s) => vec![s.clone()],
            Value::Array(a) => a
                .iter()
                .map(|v| v.as_str().unwrap_or_default().to_string())
                .collect(),
            _ => vec![],
        };
        let actual = match value {
            Value::Null => "null",
            Value::Bool(_) => "boolean",
            Value::Number(n) => {
                if n.is_i64() || n.is_u64() {
                    "integer"
                } else {
                    "number"
                }
            }
            Value::String(_) => "string",
            Value::Array(_) => "array",
            Value::Object(_) => "object",
        };
        let ok = allowed.iter().any(|t| {
            t == actual || (t == "number" && actual == "integer")
        });
        if !ok {
            return Err(format!("expected type {allowed:?}, got {actual}: {value}"));
        }
    }
    if let Some(options) = schema.get("enum").and_then(|e| e.as_array()) {
        if !options.contains(value) {
            return Err(format!("{value} not in enum {options:?}"));
        }
    }
    if let Value::Object(map) = value {
        if let Some(required) = schema.get("required").and_then(|r| r.as_array()) {
            for key in required {
                let key = key.as_str().unwrap();
                if !map.contains_key(key) {
                    return Err(format!("missing required field {key}"));
                }
            }
        }
        let props = schema.get("properties").and_then(|p| p.as_object());
        for (key, sub) in map {
            if let Some(subschema) = props.and_then(|p| p.get(key)) {
                validate(subschema, sub).map_err(|e| format!("{key}: {e}"))?;
            } else if schema.get("additionalProperties") == Some(&Value::Bool(false)) {
                return Err(format!("unexpected field {key}"));
            } else if let Some(extra) = schema
                .get("additionalProperties")
                .filter(|v| v.is_object())
            {
                validate(extra, sub).map_err(|e| format!("{key}: {e}"))?;
            }
        }
    }
    if let (Value::Array(items), Some(item_schema)) = (value, schema.get("items")) {
        for (i, item) in items.iter().enumerate() {
            validate(item_schema, item).map_err(|e| format!("[{i}]: {e}"))?;
        }
    }
    Ok(())
}

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../schemas")
        .join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_writes_artifacts_matching_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = lognodal(
        &[
            "solve", "--N", "6", "--lambda", "0", "--theta", "1", "--k", "1", "--sign", "+",
            "--out", "run", "--plot",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let summary: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("run/summary.json")).unwrap(),
    )
    .unwrap();
    validate(&schema("solution-summary.schema.json"), &summary).unwrap();
    assert_eq!(summary["nodal_domains"], 1);

    let csv = std::fs::read_to_string(dir.path().join("run/solution.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("r,u,du"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "0.0");
    assert!(csv.lines().count() > 100);

    let svg = std::fs::read_to_string(dir.path().join("run/solution.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
}

#[test]
fn identical_configs_produce_identical_bytes() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let args = [
        "solve", "--N", "6", "--lambda", "0.5", "--theta", "1.5", "--k", "1", "--sign", "-",
        "--out", "run",
    ];
    assert!(lognodal(&args, dir_a.path()).status.success());
    assert!(lognodal(&args, dir_b.path()).status.success());
    let csv_a = std::fs::read(dir_a.path().join("run/solution.csv")).unwrap();
    let csv_b = std::fs::read(dir_b.path().join("run/solution.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "profile bytes differ between identical runs");
    let js_a = std::fs::read(dir_a.path().join("run/summary.json")).unwrap();
    let js_b = std::fs::read(dir_b.path().join("run/summary.json")).unwrap();
    assert_eq!(js_a, js_b);
}

#[test]
fn malformed_config_exits_one_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    let out = lognodal(
        &["solve", "--config", "bad.json", "--out", "runout"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("runout").exists(), "no partial artifacts");

    // inadmissible parameters are also configuration errors
    let out = lognodal(
        &["solve", "--N", "6", "--theta", "0", "--out", "runout2"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("runout2").exists());
}

#[test]
fn unknown_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = lognodal(&["verify", "nonsense"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_bubbles_reports_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = lognodal(
        &["verify", "bubbles", "--N", "6", "--out", "v"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("v/report.json")).unwrap())
            .unwrap();
    validate(&schema("report.schema.json"), &report).unwrap();
    assert_eq!(report["passed"], true);
}

#[test]
fn verify_logsob_passes_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let out = lognodal(&["verify", "logsob", "--N", "6", "--out", "v"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sweep_emits_csv_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out = lognodal(
        &[
            "sweep", "--axis", "theta", "--values", "0.5,1,2", "--quantity", "ground", "--N",
            "6", "--lambda", "0", "--out", "s", "--plot",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("axis,value,status"));
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",ok")));
    assert!(dir.path().join("s/sweep.svg").exists());
}

#[test]
fn sweep_with_empty_grid_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = lognodal(
        &["sweep", "--axis", "theta", "--quantity", "ground"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn glue_solves_subcritical_two_domain() {
    let dir = tempfile::tempdir().unwrap();
    let out = lognodal(
        &[
            "glue", "--N", "6", "--lambda", "0", "--theta", "1", "--p", "2.9", "--k", "2",
            "--out", "g",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("g/summary.json")).unwrap())
            .unwrap();
    validate(&schema("solution-summary.schema.json"), &summary).unwrap();
    assert_eq!(summary["construction"], "glue");
    assert_eq!(summary["node_radii"].as_array().unwrap().len(), 1);
}

#[test]
fn solver_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    // the critical two-domain center value lies beyond double precision
    let out = lognodal(
        &[
            "solve", "--N", "6", "--lambda", "0", "--theta", "1", "--k", "2", "--sign", "+",
            "--out", "f",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("scan table"), "scan table dumped on failure");
}

#[test]
fn config_file_round_trip_drives_solve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "dim": 6,
        "lambda": 0.0,
        "theta": 1.0,
        "radius": 1.0,
        "k": 1,
        "sign": "+",
        "out": "from-config",
        "format": "json"
    });
    std::fs::write(
        dir.path().join("run.json"),
        serde_json::to_string_pretty(&cfg).unwrap(),
    )
    .unwrap();
    let out = lognodal(&["solve", "--config", "run.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("from-config/summary.json").exists());
}
