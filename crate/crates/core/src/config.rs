//! Scenario files (TOML) and the bundled scenario set.
//!
//! ```toml
//! id = "fwA"
//! seed = 7
//! max_ticks = 16
//! transform_strength = 0      # optional, 0..=4
//! declassification = false    # optional
//!
//! [enforcement]               # optional, defaults to all layers
//! layers = "none"             # all | none | comma list of rtw,seal,memgate,attenuation
//! guard = "deny"              # deny | approve
//!
//! [[channels]]
//! name = "inbox"
//! external = true             # optional
//! strength = 4                # optional per-channel override
//!
//! [[agents]]
//! name = "a0"
//! framework = "A"             # A | B | C
//! privilege = "low"           # low | high
//! heartbeat_period = 2
//! channels = ["inbox", "c0"]
//! permissions = "full"        # full | messaging-disabled | file-write-disabled | minimal
//! workload = true
//! session_reset = false
//! compliance = { system = "never", user = "always" }   # or bernoulli:<p>
//! workspace_files = 7
//! lease = [0, 16]
//!
//! [injection]
//! channel = "inbox"
//! tick = 0
//! facets = "prhv"
//! ```
//!
//! An optional `[promotion]` table overrides the memory promotion policy
//! with `allowed_schemas`, `allowed_sources`, `allowed_scopes`, `a_max` and
//! `t_max`.

use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::memory::PromotionPolicy;
use crate::model::PayloadFacets;
use crate::policy::{EnforcementConfig, GuardMode};
use crate::sim::{
    AgentProfile, ChannelSpec, ComplianceTable, Framework, Injection, Scenario, ScenarioError,
};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid scenario file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("unknown bundled scenario `{0}`")]
    UnknownBundled(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

fn invalid(field: impl Into<String>, message: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.to_string(),
    }
}

fn token<T: FromStr>(field: &str, s: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| invalid(field, e))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    id: String,
    seed: u64,
    max_ticks: u64,
    #[serde(default)]
    transform_strength: u8,
    #[serde(default)]
    declassification: bool,
    #[serde(default)]
    enforcement: Option<EnforcementFile>,
    #[serde(default)]
    promotion: Option<PromotionPolicy>,
    channels: Vec<ChannelFile>,
    agents: Vec<AgentFile>,
    injection: InjectionFile,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EnforcementFile {
    #[serde(default = "all_layers")]
    layers: String,
    #[serde(default)]
    guard: Option<String>,
}

fn all_layers() -> String {
    "all".into()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelFile {
    name: String,
    #[serde(default)]
    external: bool,
    #[serde(default)]
    strength: Option<u8>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentFile {
    name: String,
    framework: Framework,
    privilege: String,
    heartbeat_period: u64,
    channels: Vec<String>,
    #[serde(default)]
    permissions: Option<String>,
    #[serde(default)]
    session_reset: bool,
    #[serde(default)]
    workload: bool,
    #[serde(default)]
    compliance: Option<ComplianceFile>,
    #[serde(default)]
    workspace_files: Option<usize>,
    #[serde(default)]
    lease: Option<(u64, u64)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ComplianceFile {
    system: String,
    user: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InjectionFile {
    channel: String,
    tick: u64,
    facets: String,
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario, ConfigError> {
        let channel_index = |field: &str, name: &str| {
            self.channels
                .iter()
                .position(|c| c.name == name)
                .ok_or_else(|| invalid(field, format!("unknown channel `{name}`")))
        };

        let mut enforcement = EnforcementConfig::all();
        if let Some(e) = &self.enforcement {
            enforcement = token("enforcement.layers", &e.layers)?;
            if let Some(g) = &e.guard {
                enforcement = enforcement.with_guard(token::<GuardMode>("enforcement.guard", g)?);
            }
        }

        let mut agents = Vec::with_capacity(self.agents.len());
        for a in &self.agents {
            let field = |k: &str| format!("agents.{}.{k}", a.name);
            let privilege = token(&field("privilege"), &a.privilege)?;
            let mut p = AgentProfile::new(a.name.clone(), a.framework, privilege);
            p.heartbeat_period = a.heartbeat_period;
            p.channels = a
                .channels
                .iter()
                .map(|c| channel_index(&field("channels"), c))
                .collect::<Result<_, _>>()?;
            if let Some(perm) = &a.permissions {
                p.permissions = token(&field("permissions"), perm)?;
            }
            p.session_reset = a.session_reset;
            p.workload = a.workload;
            if let Some(c) = &a.compliance {
                p.compliance = ComplianceTable {
                    system_prompt: token(&field("compliance.system"), &c.system)?,
                    user_prompt: token(&field("compliance.user"), &c.user)?,
                };
            }
            p.workspace_files = a.workspace_files;
            p.lease = a.lease;
            agents.push(p);
        }

        let injection = Injection {
            channel: channel_index("injection.channel", &self.injection.channel)?,
            tick: self.injection.tick,
            facets: token::<PayloadFacets>("injection.facets", &self.injection.facets)?,
        };
        let scenario = Scenario {
            id: self.id,
            seed: self.seed,
            max_ticks: self.max_ticks,
            transform_strength: self.transform_strength,
            declassification: self.declassification,
            enforcement,
            promotion: self.promotion.unwrap_or_default(),
            agents,
            channels: self
                .channels
                .into_iter()
                .map(|c| ChannelSpec {
                    name: c.name,
                    external: c.external,
                    strength: c.strength,
                })
                .collect(),
            injection,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    toml::from_str::<ScenarioFile>(text)?.into_scenario()
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

/// Bundled scenario names with their sources.
pub const BUNDLED: &[(&str, &str)] = &[
    ("fwA", include_str!("../scenarios/fwA.toml")),
    ("fwB", include_str!("../scenarios/fwB.toml")),
    ("fwC", include_str!("../scenarios/fwC.toml")),
    ("cross-framework", include_str!("../scenarios/cross-framework.toml")),
    ("privilege-escalation", include_str!("../scenarios/privilege-escalation.toml")),
    ("exfiltration", include_str!("../scenarios/exfiltration.toml")),
    ("capability-matrix", include_str!("../scenarios/capability-matrix.toml")),
    ("ablation", include_str!("../scenarios/ablation.toml")),
];

pub fn bundled(name: &str) -> Result<Scenario, ConfigError> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ConfigError::UnknownBundled(name.to_string()))?;
    parse_scenario(text)
}

/// A bundled name, or else a path to a scenario file.
pub fn resolve_scenario(name_or_path: &str) -> Result<Scenario, ConfigError> {
    if BUNDLED.iter().any(|(n, _)| *n == name_or_path) {
        bundled(name_or_path)
    } else {
        load_scenario(Path::new(name_or_path))
    }
}

/// Batch of runs: each entry names a bundled scenario or a file, and is
/// expanded over its enforcement overrides, seeds and repetitions.
///
/// ```toml
/// [[runs]]
/// scenario = "fwA"
/// enforce = ["none", "all"]   # optional, defaults to the scenario's own
/// seeds = [7, 8]              # optional, defaults to the scenario's own
/// repetitions = 1             # optional
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    pub runs: Vec<SuiteEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntry {
    pub scenario: String,
    #[serde(default)]
    pub enforce: Vec<String>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "one")]
    pub repetitions: usize,
}

fn one() -> usize {
    1
}

impl SuiteSpec {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Every bundled scenario, undefended and fully enforced.
    pub fn bundled() -> Self {
        Self {
            runs: BUNDLED
                .iter()
                .map(|(name, _)| SuiteEntry {
                    scenario: name.to_string(),
                    enforce: vec!["none".into(), "all".into()],
                    seeds: Vec::new(),
                    repetitions: 1,
                })
                .collect(),
        }
    }

    /// Resolves and validates every entry before anything runs.
    pub fn expand(&self) -> Result<Vec<Scenario>, ConfigError> {
        let mut out = Vec::new();
        for (i, entry) in self.runs.iter().enumerate() {
            let base = resolve_scenario(&entry.scenario)?;
            let configs = if entry.enforce.is_empty() {
                vec![base.enforcement]
            } else {
                entry
                    .enforce
                    .iter()
                    .map(|e| token(&format!("runs.{i}.enforce"), e))
                    .collect::<Result<_, _>>()?
            };
            let seeds = if entry.seeds.is_empty() {
                vec![base.seed]
            } else {
                entry.seeds.clone()
            };
            for enforcement in configs {
                for &seed in &seeds {
                    for _ in 0..entry.repetitions {
                        out.push(Scenario {
                            enforcement,
                            seed,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}
