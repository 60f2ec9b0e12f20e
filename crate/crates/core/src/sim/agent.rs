//! Agent profiles and the clean/contaminated decision policy that stands in
//! for the model. Turns only *propose*; every step is mediated by the
//! simulator before it takes effect.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::framework::Framework;
use crate::model::{ActionKind, CarrierId, ChannelRef, InjectionPosition, PayloadFacets, TaintLabel};
use crate::token::{token_enum, ParseTokenError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Privilege {
    /// File I/O and messaging only.
    Low,
    /// Adds shell and network.
    High,
}

token_enum!(Privilege, "privilege" {
    Low => "low",
    High => "high",
});

/// Capability restriction applied on top of privilege.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Permissions {
    #[default]
    Full,
    MessagingDisabled,
    FileWriteDisabled,
    Minimal,
}

token_enum!(Permissions, "permission set" {
    Full => "full",
    MessagingDisabled => "messaging-disabled",
    FileWriteDisabled => "file-write-disabled",
    Minimal => "minimal",
});

impl Permissions {
    pub fn messaging(self) -> bool {
        matches!(self, Permissions::Full | Permissions::FileWriteDisabled)
    }

    pub fn file_write(self) -> bool {
        matches!(self, Permissions::Full | Permissions::MessagingDisabled)
    }
}

pub fn capabilities(privilege: Privilege, permissions: Permissions) -> BTreeSet<ActionKind> {
    use ActionKind::*;
    ActionKind::ALL
        .iter()
        .copied()
        .filter(|a| match a {
            InvokeShell | InvokeNetwork => privilege == Privilege::High,
            SendMessage => permissions.messaging(),
            WriteAutoloaded | WriteTrustedMemory | WriteConfig | WriteExecutable
            | CommitCrossSession => permissions.file_write(),
            ModifyPolicy => true,
        })
        .collect()
}

/// How an agent responds to payload facets arriving at one context position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Compliance {
    AlwaysComply,
    NeverComply,
    SeededBernoulli(f64),
}

impl Compliance {
    pub fn resolve(self, rng: &mut impl Rng) -> bool {
        match self {
            Compliance::AlwaysComply => true,
            Compliance::NeverComply => false,
            Compliance::SeededBernoulli(p) => rng.random_bool(p),
        }
    }
}

impl fmt::Display for Compliance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Compliance::AlwaysComply => f.write_str("always"),
            Compliance::NeverComply => f.write_str("never"),
            Compliance::SeededBernoulli(p) => write!(f, "bernoulli:{p}"),
        }
    }
}

/// `always`, `never`, or `bernoulli:<p>` with `p` in `[0, 1]`.
impl FromStr for Compliance {
    type Err = ParseTokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseTokenError::new("compliance", s);
        match s {
            "always" => Ok(Compliance::AlwaysComply),
            "never" => Ok(Compliance::NeverComply),
            _ => {
                let p: f64 = s
                    .strip_prefix("bernoulli:")
                    .and_then(|p| p.parse().ok())
                    .ok_or_else(bad)?;
                if (0.0..=1.0).contains(&p) {
                    Ok(Compliance::SeededBernoulli(p))
                } else {
                    Err(bad())
                }
            }
        }
    }
}

/// Compliance keyed by injection position. Content that is never injected
/// cannot be complied with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplianceTable {
    pub system_prompt: Compliance,
    pub user_prompt: Compliance,
}

impl Default for ComplianceTable {
    fn default() -> Self {
        Self {
            system_prompt: Compliance::NeverComply,
            user_prompt: Compliance::AlwaysComply,
        }
    }
}

impl ComplianceTable {
    pub fn uniform(c: Compliance) -> Self {
        Self {
            system_prompt: c,
            user_prompt: c,
        }
    }

    pub fn resolve(&self, position: InjectionPosition, rng: &mut impl Rng) -> bool {
        match position {
            InjectionPosition::SystemPrompt => self.system_prompt.resolve(rng),
            InjectionPosition::UserPrompt => self.user_prompt.resolve(rng),
            InjectionPosition::NotInjected => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentProfile {
    pub name: String,
    pub framework: Framework,
    pub privilege: Privilege,
    pub heartbeat_period: u64,
    /// Indices into the scenario's channel list.
    pub channels: Vec<usize>,
    pub permissions: Permissions,
    /// Start a fresh session (context reset) on every heartbeat.
    pub session_reset: bool,
    /// Run benign background work on heartbeats.
    pub workload: bool,
    pub compliance: ComplianceTable,
    /// Overrides the framework's number of on-demand workspace files.
    pub workspace_files: Option<usize>,
    /// Task-local write lease; `None` leases the whole run.
    pub lease: Option<(u64, u64)>,
}

impl AgentProfile {
    pub fn new(name: impl Into<String>, framework: Framework, privilege: Privilege) -> Self {
        Self {
            name: name.into(),
            framework,
            privilege,
            heartbeat_period: 2,
            channels: Vec::new(),
            permissions: Permissions::Full,
            session_reset: false,
            workload: false,
            compliance: ComplianceTable::default(),
            workspace_files: None,
            lease: None,
        }
    }

    pub fn capabilities(&self) -> BTreeSet<ActionKind> {
        capabilities(self.privilege, self.permissions)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trigger {
    /// A scheduled turn that autoloaded the agent's carriers.
    Heartbeat,
    /// An interaction-driven turn on an incoming message.
    Message(ChannelRef),
}

/// Payload content the agent complied with during this turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stimulus {
    pub trigger: Trigger,
    pub facets: PayloadFacets,
    pub label: TaintLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proposal {
    Act(ActionKind),
    /// The simulator mediates the matching high-risk action first when the
    /// carrier is autoloaded, sealed or shared.
    Write { carrier: CarrierId, facets: PayloadFacets },
    ExposedRead(CarrierId),
    Send { channel: ChannelRef, facets: PayloadFacets },
    /// Submit a free-form memory candidate and ask for its promotion.
    Remember { facets: PayloadFacets },
}

/// Steps run in order; the first denied step abandons the rest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Intent(pub Vec<Proposal>);

/// What an agent knows about its own workspace when deciding.
#[derive(Debug, Clone, Default)]
pub struct TurnContext {
    pub privilege: Option<Privilege>,
    pub capabilities: BTreeSet<ActionKind>,
    /// Highest-ranked writable heartbeat carrier.
    pub persist_target: Option<CarrierId>,
    /// The persist target already carries this payload.
    pub persisted: bool,
    pub config_target: Option<CarrierId>,
    pub config_written: bool,
    pub has_memory: bool,
    pub internal_channels: Vec<ChannelRef>,
    pub external_channels: Vec<ChannelRef>,
    /// Channels this agent already relayed this payload on.
    pub relayed: Vec<ChannelRef>,
    /// Identity and workspace carriers an exfiltrating agent gathers.
    pub exfil_sources: Vec<CarrierId>,
}

/// Deterministic decision policy. Facets the agent did not comply with
/// have already been filtered out of `stimulus`.
pub fn agent_turn(ctx: &TurnContext, stimulus: &Stimulus) -> Vec<Intent> {
    use ActionKind::*;
    let f = stimulus.facets;
    let can = |a: ActionKind| ctx.capabilities.contains(&a);
    let mut out = Vec::new();
    if f.is_empty() {
        return out;
    }

    let persist_target = ctx.persist_target.filter(|_| can(WriteAutoloaded));
    if f.persist && !ctx.persisted {
        if let Some(c) = persist_target {
            out.push(Intent(vec![Proposal::Write { carrier: c, facets: f }]));
        }
        if ctx.has_memory && can(WriteTrustedMemory) {
            out.push(Intent(vec![Proposal::Remember { facets: f }]));
        }
    }

    if f.propagate && can(SendMessage) {
        let relay_now = !(f.persist && persist_target.is_some());
        let channels = ctx.internal_channels.iter().filter(|c| match stimulus.trigger {
            Trigger::Heartbeat => true,
            Trigger::Message(from) => relay_now && **c != from && !ctx.relayed.contains(c),
        });
        for &channel in channels {
            out.push(Intent(vec![
                Proposal::Act(SendMessage),
                Proposal::Send { channel, facets: f },
            ]));
        }
    }

    if f.harm {
        if let Some(c) = ctx.config_target.filter(|_| can(WriteConfig) && !ctx.config_written) {
            out.push(Intent(vec![Proposal::Write { carrier: c, facets: f }]));
        }
        if ctx.privilege == Some(Privilege::High) {
            if can(InvokeShell) {
                out.push(Intent(vec![Proposal::Act(InvokeShell)]));
            }
            if can(SendMessage) {
                for &channel in &ctx.external_channels {
                    let mut steps: Vec<Proposal> =
                        ctx.exfil_sources.iter().map(|c| Proposal::ExposedRead(*c)).collect();
                    steps.push(Proposal::Act(SendMessage));
                    steps.push(Proposal::Send { channel, facets: f });
                    out.push(Intent(steps));
                }
            }
        }
    }
    out
}
