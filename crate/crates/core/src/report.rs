//! Machine-readable run records and the tables rendered from them.
//!
//! A run record is one line of `key=value` fields joined by `|`, followed by
//! one `chain=` line per witness. Tables are rendered from that text only.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::policy::Layer;
use crate::sim::{run_scenario, Permissions, Scenario, SimError};
use crate::verify::Report;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("run record is missing `{0}`")]
    Missing(&'static str),
    #[error("run record field `{0}` is malformed")]
    Malformed(String),
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Serializes one run: scenario settings, then verifier output.
pub fn machine_record(scenario: &Scenario, report: &Report) -> String {
    let hop_ticks: Vec<String> = report
        .hop_ticks
        .iter()
        .map(|(a, t)| format!("a{a}@{t}"))
        .collect();
    let mut fields = vec![
        format!("scenario={}", scenario.id),
        format!("enforce={}", scenario.enforcement.layers_token()),
        format!("guard={}", scenario.enforcement.guard_mode),
        format!("seed={}", scenario.seed),
        format!("ticks={}", scenario.max_ticks),
        format!("events={}", report.events),
        format!("persistence={}", flag(report.persistence)),
        format!("re_entry={}", flag(report.re_entry)),
        format!("propagation={}", flag(report.propagation)),
        format!("privilege_escalation={}", flag(report.privilege_escalation)),
        format!("exfiltration={}", flag(report.exfiltration)),
        format!("hops={}", report.hops),
        format!(
            "hop_ticks={}",
            if hop_ticks.is_empty() { "-".to_string() } else { hop_ticks.join(",") }
        ),
        format!("zero_click={}", flag(report.zero_click)),
        format!("chains={}", report.chains.len()),
        format!("rtw_safe={}", flag(report.rtw_safe)),
    ];
    for layer in Layer::ALL {
        let n = report.denials.get(layer.as_str()).copied().unwrap_or(0);
        fields.push(format!("deny.{layer}={n}"));
    }
    let mut out = fields.join("|");
    out.push('\n');
    for c in &report.chains {
        let _ = writeln!(out, "chain={c}");
    }
    out
}

/// Fields of every run record in `text`, in order.
pub fn parse_records(text: &str) -> Vec<BTreeMap<String, String>> {
    text.lines()
        .filter(|l| !l.starts_with("chain=") && !l.trim().is_empty())
        .map(|l| {
            l.split('|')
                .filter_map(|kv| kv.split_once('='))
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

const COLUMNS: &[(&str, &str)] = &[
    ("scenario", "Scenario"),
    ("enforce", "Enforce"),
    ("persistence", "Persist"),
    ("re_entry", "Re-entry"),
    ("propagation", "Propagate"),
    ("privilege_escalation", "Priv-esc"),
    ("exfiltration", "Exfil"),
    ("hops", "Hops"),
    ("zero_click", "Zero-click"),
    ("chains", "Chains"),
    ("deny.seal", "D:seal"),
    ("deny.rtw", "D:rtw"),
    ("deny.memgate", "D:memgate"),
    ("deny.attenuation", "D:atten"),
];

const FLAGS: &[&str] = &[
    "persistence",
    "re_entry",
    "propagation",
    "privilege_escalation",
    "exfiltration",
    "zero_click",
];

fn cell(key: &str, value: &str) -> Result<String, ReportError> {
    if FLAGS.contains(&key) {
        return match value {
            "1" => Ok("✓".into()),
            "0" => Ok("✗".into()),
            _ => Err(ReportError::Malformed(key.to_string())),
        };
    }
    Ok(value.to_string())
}

fn render(rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Renders run records as a table.
pub fn render_table(machine: &str) -> Result<String, ReportError> {
    let mut rows = vec![COLUMNS.iter().map(|(_, h)| h.to_string()).collect::<Vec<_>>()];
    for rec in parse_records(machine) {
        let row = COLUMNS
            .iter()
            .map(|(k, _)| {
                let v = rec.get(*k).ok_or(ReportError::Missing(k))?;
                cell(k, v)
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(render(&rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CapabilityRow {
    pub permissions: Permissions,
    pub persistence: bool,
    pub propagation: bool,
}

/// Reruns `base` once per permission set, applied to every agent.
pub fn emit_capability_matrix(
    base: &Scenario,
    configs: &[Permissions],
) -> Result<Vec<CapabilityRow>, SimError> {
    configs
        .iter()
        .map(|&permissions| {
            let mut s = base.clone();
            for a in &mut s.agents {
                a.permissions = permissions;
            }
            let (_, report) = run_scenario(&s)?;
            Ok(CapabilityRow {
                permissions,
                persistence: report.persistence,
                propagation: report.propagation,
            })
        })
        .collect()
}

pub fn render_capability_matrix(rows: &[CapabilityRow]) -> String {
    let mark = |b| if b { "✓" } else { "✗" }.to_string();
    let mut table = vec![vec![
        "Permissions".to_string(),
        "Persistence".to_string(),
        "Propagation".to_string(),
    ]];
    for r in rows {
        table.push(vec![
            r.permissions.to_string(),
            mark(r.persistence),
            mark(r.propagation),
        ]);
    }
    render(&table)
}
