//! Browser bindings for the simulator. Every export returns a JSON string.

use reentry_core::config;
use reentry_core::model::Access;
use reentry_core::policy::{EnforcementConfig, GuardMode};
use reentry_core::report::{emit_capability_matrix, machine_record, parse_records, render_table};
use reentry_core::rtw::is_rtw_safe;
use reentry_core::sim::{run_scenario, Permissions, Scenario};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Names of the bundled scenarios.
#[wasm_bindgen]
pub fn bundled_scenarios() -> String {
    let names: Vec<&str> = config::BUNDLED.iter().map(|(n, _)| *n).collect();
    json!(names).to_string()
}

/// Runs a bundled scenario (by name) or scenario TOML text.
#[wasm_bindgen]
pub fn simulate(scenario: &str, enforce: &str, guard: &str) -> Result<String, JsError> {
    run_json(scenario, enforce, guard)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}

/// Checks a word over `R` (exposed read) and `W` (untrusted write).
#[wasm_bindgen]
pub fn rtw_check(word: &str) -> Result<String, JsError> {
    rtw_json(word).map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

/// Persistence and propagation of a scenario under each permission set,
/// with every defense off.
#[wasm_bindgen]
pub fn capability_matrix(scenario: &str) -> Result<String, JsError> {
    matrix_json(scenario)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}

fn load(scenario: &str) -> Result<Scenario, String> {
    let scenario = scenario.trim();
    if config::BUNDLED.iter().any(|(n, _)| *n == scenario) {
        config::bundled(scenario)
    } else {
        config::parse_scenario(scenario)
    }
    .map_err(|e| e.to_string())
}

fn run_json(scenario: &str, enforce: &str, guard: &str) -> Result<Value, String> {
    let mut s = load(scenario)?;
    let guard: GuardMode = guard.parse().map_err(|e: reentry_core::ParseTokenError| e.to_string())?;
    let layers: EnforcementConfig = enforce.parse().map_err(|e: reentry_core::ParseTokenError| e.to_string())?;
    s.enforcement = layers.with_guard(guard);
    s.validate().map_err(|e| e.to_string())?;
    let (trace, report) = run_scenario(&s).map_err(|e| e.to_string())?;
    let record = machine_record(&s, &report);
    let fields = parse_records(&record).into_iter().next().unwrap_or_default();
    let chains: Vec<String> = report.chains.iter().map(|c| c.to_string()).collect();
    Ok(json!({
        "record": fields,
        "table": render_table(&record).map_err(|e| e.to_string())?,
        "chains": chains,
        "trace": trace.to_log(),
    }))
}

fn rtw_json(word: &str) -> Result<Value, String> {
    let projection = word
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c.to_ascii_uppercase() {
            'R' => Ok(Access::ExposedRead),
            'W' => Ok(Access::Write),
            other => Err(format!("unexpected symbol {other:?}; use R and W")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let verdict = is_rtw_safe(&projection);
    Ok(json!({
        "safe": verdict.safe(),
        "violation": verdict.first_violation.map(|(w, r)| json!({ "write": w, "read": r })),
    }))
}

fn matrix_json(scenario: &str) -> Result<Value, String> {
    let mut base = load(scenario)?;
    base.enforcement = EnforcementConfig::none();
    let rows = emit_capability_matrix(&base, Permissions::ALL).map_err(|e| e.to_string())?;
    Ok(Value::Array(
        rows.iter()
            .map(|r| {
                json!({
                    "permissions": r.permissions.to_string(),
                    "persistence": r.persistence,
                    "propagation": r.propagation,
                })
            })
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undefended_bundled_run() {
        let v = run_json("fwA", "none", "deny").unwrap();
        assert_eq!(v["record"]["hops"], "3");
        assert!(!v["chains"].as_array().unwrap().is_empty());
        assert!(v["trace"].as_str().unwrap().contains("inject"));
    }

    #[test]
    fn enforced_run_has_no_chains() {
        let v = run_json("fwA", "all", "approve").unwrap();
        assert_eq!(v["record"]["chains"], "0");
        assert_eq!(v["record"]["guard"], "approve");
    }

    #[test]
    fn scenario_text_is_accepted() {
        let text = config::BUNDLED.iter().find(|(n, _)| *n == "exfiltration").unwrap().1;
        let v = run_json(text, "none", "deny").unwrap();
        assert_eq!(v["record"]["exfiltration"], "1");
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(run_json("fwA", "everything", "deny").is_err());
        assert!(run_json("fwA", "none", "maybe").is_err());
        assert!(run_json("not a scenario", "none", "deny").is_err());
        assert!(rtw_json("RXW").is_err());
    }

    #[test]
    fn rtw_words() {
        assert_eq!(rtw_json("rrww").unwrap()["safe"], true);
        let v = rtw_json("R W R").unwrap();
        assert_eq!(v["safe"], false);
        assert_eq!(v["violation"], json!({ "write": 1, "read": 2 }));
        assert_eq!(rtw_json("").unwrap()["safe"], true);
    }

    #[test]
    fn matrix_has_four_rows() {
        let v = matrix_json("capability-matrix").unwrap();
        let rows = v.as_array().unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0], json!({ "permissions": "full", "persistence": true, "propagation": true }));
    }

    #[test]
    fn names_are_listed() {
        let names: Vec<String> = serde_json::from_str(&bundled_scenarios()).unwrap();
        assert_eq!(names.len(), config::BUNDLED.len());
    }
}
