//! Shared vocabulary: carriers, labels, payload facets, events and traces.
//!
//! A [`Trace`] is the object every safety property quantifies over. It is
//! append-only and serializes to a line-oriented log (see [`Trace::to_log`]):
//!
//! ```text
//! tick|actor|kind|target|label|decision|reason|facets
//! 3|a1|read|f2|tainted-derived|deny@rtw|rtw-re-entry|prhv
//! ```
//!
//! Absent fields are written as `-`. Lines starting with `#` are comments.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::memory::{CandidateId, SchemaKind};
use crate::policy::Decision;
use crate::taint::DeclassProcedure;
use crate::token::{token_enum, ParseTokenError};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("tick regression: event at tick {event} appended after tick {last}")]
    TickRegression { last: u64, event: u64 },
    #[error("carrier {id}: {class:?} cannot use autoload trigger {autoload:?}")]
    AutoloadMismatch {
        id: CarrierId,
        class: CarrierClass,
        autoload: Autoload,
    },
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Opaque carrier identity. Labels hang off this, never off a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CarrierId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChannelId(pub u32);

impl fmt::Display for CarrierId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

fn parse_prefixed(s: &str, prefix: char, what: &'static str) -> Result<u32, ParseTokenError> {
    s.strip_prefix(prefix)
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| ParseTokenError::new(what, s))
}

impl FromStr for CarrierId {
    type Err = ParseTokenError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_prefixed(s, 'f', "carrier id").map(CarrierId)
    }
}

impl FromStr for AgentId {
    type Err = ParseTokenError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_prefixed(s, 'a', "agent id").map(AgentId)
    }
}

/// Trust classification of carrier content or of an agent's decision state.
///
/// `Clean` is the only trusted variant. `External` records provenance
/// (user-provided, downloaded, synced); `Tainted` is attacker-influenced;
/// `TaintedDerived` is output of a contaminated decision state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaintLabel {
    Clean,
    External,
    Tainted,
    TaintedDerived,
}

token_enum!(TaintLabel, "taint label" {
    Clean => "clean",
    External => "external",
    Tainted => "tainted",
    TaintedDerived => "tainted-derived",
});

impl TaintLabel {
    pub fn is_untrusted(self) -> bool {
        self != TaintLabel::Clean
    }

    /// Attacker-influenced or contaminated-derived, as opposed to merely
    /// external provenance.
    pub fn is_tainted(self) -> bool {
        matches!(self, TaintLabel::Tainted | TaintLabel::TaintedDerived)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CarrierClass {
    /// Identity and policy files; sealed at runtime.
    StaticConfig,
    TaskLocalState,
    TrustedMemory,
    CandidateMemory,
    WorkspaceFile,
    SharedChannelLog,
    /// Unavoidable external input (peer messages, web pages, mail).
    ExternalSource,
}

token_enum!(CarrierClass, "carrier class" {
    StaticConfig => "StaticConfig",
    TaskLocalState => "TaskLocalState",
    TrustedMemory => "TrustedMemory",
    CandidateMemory => "CandidateMemory",
    WorkspaceFile => "WorkspaceFile",
    SharedChannelLog => "SharedChannelLog",
    ExternalSource => "ExternalSource",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InjectionPosition {
    SystemPrompt,
    UserPrompt,
    NotInjected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Autoload {
    SessionStart,
    Heartbeat,
    OnDemand,
    Never,
}

impl Autoload {
    pub fn is_automatic(self) -> bool {
        matches!(self, Autoload::SessionStart | Autoload::Heartbeat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scope {
    AgentLocal,
    SharedCrossAgent,
}

/// The four semantic dimensions an adversarial payload carries.
///
/// Transformations only ever clear facets; see [`PayloadFacets::retain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PayloadFacets {
    pub persist: bool,
    pub propagate: bool,
    pub harm: bool,
    pub verbatim: bool,
}

impl PayloadFacets {
    pub const NONE: PayloadFacets = PayloadFacets {
        persist: false,
        propagate: false,
        harm: false,
        verbatim: false,
    };
    pub const ALL: PayloadFacets = PayloadFacets {
        persist: true,
        propagate: true,
        harm: true,
        verbatim: true,
    };

    pub fn is_empty(self) -> bool {
        self == Self::NONE
    }

    pub fn union(self, other: Self) -> Self {
        Self {
            persist: self.persist || other.persist,
            propagate: self.propagate || other.propagate,
            harm: self.harm || other.harm,
            verbatim: self.verbatim || other.verbatim,
        }
    }

    /// Keeps only facets also present in `mask`.
    pub fn retain(self, mask: Self) -> Self {
        Self {
            persist: self.persist && mask.persist,
            propagate: self.propagate && mask.propagate,
            harm: self.harm && mask.harm,
            verbatim: self.verbatim && mask.verbatim,
        }
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.retain(other) == self
    }

    pub fn count(self) -> usize {
        [self.persist, self.propagate, self.harm, self.verbatim]
            .into_iter()
            .filter(|b| *b)
            .count()
    }
}

/// Four-character mask in `prhv` order, `-` for a cleared facet.
impl fmt::Display for PayloadFacets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = |on: bool, ch: char| if on { ch } else { '-' };
        write!(
            f,
            "{}{}{}{}",
            c(self.persist, 'p'),
            c(self.propagate, 'r'),
            c(self.harm, 'h'),
            c(self.verbatim, 'v')
        )
    }
}

impl FromStr for PayloadFacets {
    type Err = ParseTokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let b = s.as_bytes();
        let bad = || ParseTokenError::new("facet mask", s);
        if b.len() != 4 {
            return Err(bad());
        }
        let bit = |i: usize, ch: u8| match b[i] {
            x if x == ch => Ok(true),
            b'-' => Ok(false),
            _ => Err(bad()),
        };
        Ok(Self {
            persist: bit(0, b'p')?,
            propagate: bit(1, b'r')?,
            harm: bit(2, b'h')?,
            verbatim: bit(3, b'v')?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Carrier {
    pub id: CarrierId,
    pub class: CarrierClass,
    pub injection_position: InjectionPosition,
    pub autoload: Autoload,
    pub scope: Scope,
    pub label: TaintLabel,
    pub content: PayloadFacets,
}

impl Carrier {
    pub fn new(
        id: CarrierId,
        class: CarrierClass,
        injection_position: InjectionPosition,
        autoload: Autoload,
        scope: Scope,
        label: TaintLabel,
    ) -> Result<Self, ModelError> {
        let ok = match class {
            CarrierClass::StaticConfig => autoload == Autoload::SessionStart,
            CarrierClass::CandidateMemory => autoload == Autoload::Never,
            _ => true,
        };
        if !ok {
            return Err(ModelError::AutoloadMismatch {
                id,
                class,
                autoload,
            });
        }
        Ok(Self {
            id,
            class,
            injection_position,
            autoload,
            scope,
            label,
            content: PayloadFacets::NONE,
        })
    }
}

/// Actions that can persist, amplify, execute or propagate influence.
/// Summaries, classification and extraction are deliberately absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    WriteAutoloaded,
    WriteTrustedMemory,
    WriteConfig,
    WriteExecutable,
    SendMessage,
    InvokeShell,
    InvokeNetwork,
    ModifyPolicy,
    CommitCrossSession,
}

token_enum!(ActionKind, "action kind" {
    WriteAutoloaded => "WriteAutoloaded",
    WriteTrustedMemory => "WriteTrustedMemory",
    WriteConfig => "WriteConfig",
    WriteExecutable => "WriteExecutable",
    SendMessage => "SendMessage",
    InvokeShell => "InvokeShell",
    InvokeNetwork => "InvokeNetwork",
    ModifyPolicy => "ModifyPolicy",
    CommitCrossSession => "CommitCrossSession",
});

impl ActionKind {
    pub fn is_high_risk(self) -> bool {
        true
    }

    /// The action a write to `carrier` amounts to, or `None` for ordinary
    /// output files that stay low-risk.
    pub fn for_write(carrier: &Carrier) -> Option<ActionKind> {
        match carrier.class {
            CarrierClass::StaticConfig => Some(ActionKind::WriteConfig),
            CarrierClass::TrustedMemory => Some(ActionKind::WriteTrustedMemory),
            CarrierClass::SharedChannelLog => Some(ActionKind::CommitCrossSession),
            _ if carrier.autoload.is_automatic() => Some(ActionKind::WriteAutoloaded),
            _ => None,
        }
    }
}

/// Who an event is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Actor {
    Agent(AgentId),
    Attacker,
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Actor::Agent(a) => a.fmt(f),
            Actor::Attacker => f.write_str("attacker"),
        }
    }
}

impl FromStr for Actor {
    type Err = ParseTokenError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "attacker" {
            Ok(Actor::Attacker)
        } else {
            s.parse().map(Actor::Agent)
        }
    }
}

/// A messaging channel; external channels leave the agent ecosystem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChannelRef {
    pub id: ChannelId,
    pub external: bool,
}

impl fmt::Display for ChannelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = if self.external { 'x' } else { 'c' };
        write!(f, "{p}{}", self.id.0)
    }
}

impl FromStr for ChannelRef {
    type Err = ParseTokenError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let external = s.starts_with('x');
        let prefix = if external { 'x' } else { 'c' };
        parse_prefixed(s, prefix, "channel").map(|n| ChannelRef {
            id: ChannelId(n),
            external,
        })
    }
}

/// What a declassification clears: a carrier label, or the acting agent's
/// decision state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeclassSubject {
    Carrier(CarrierId),
    AgentState,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    /// `label` is the label of the written content, not the carrier's.
    Write {
        carrier: CarrierId,
        label: TaintLabel,
        facets: PayloadFacets,
    },
    /// `high_cap` records whether the reader held unattenuated high-risk
    /// capabilities when the read was mediated.
    ExposedRead {
        carrier: CarrierId,
        label: TaintLabel,
        facets: PayloadFacets,
        high_cap: bool,
    },
    OpaqueRead {
        carrier: CarrierId,
        label: TaintLabel,
    },
    HighRiskAction(ActionKind),
    MessageSend {
        channel: ChannelRef,
        label: TaintLabel,
        facets: PayloadFacets,
    },
    MessageReceive {
        channel: ChannelRef,
        label: TaintLabel,
        facets: PayloadFacets,
    },
    /// Commits candidate `candidate` into trusted-memory carrier `target`.
    /// `label`/`facets` describe what lands in trusted memory if allowed.
    PromoteAttempt {
        candidate: CandidateId,
        schema: SchemaKind,
        target: CarrierId,
        label: TaintLabel,
        facets: PayloadFacets,
    },
    Declassify {
        subject: DeclassSubject,
        procedure: DeclassProcedure,
    },
    ContextReset,
    HeartbeatTick,
    AttackerInject {
        channel: ChannelRef,
        facets: PayloadFacets,
    },
}

impl EventKind {
    /// Kinds that must carry a mediation decision.
    pub fn is_effectful(&self) -> bool {
        matches!(
            self,
            EventKind::Write { .. }
                | EventKind::ExposedRead { .. }
                | EventKind::OpaqueRead { .. }
                | EventKind::HighRiskAction(_)
                | EventKind::PromoteAttempt { .. }
                | EventKind::Declassify { .. }
        )
    }

    pub fn carrier(&self) -> Option<CarrierId> {
        match *self {
            EventKind::Write { carrier, .. }
            | EventKind::ExposedRead { carrier, .. }
            | EventKind::OpaqueRead { carrier, .. } => Some(carrier),
            EventKind::PromoteAttempt { target, .. } => Some(target),
            EventKind::Declassify {
                subject: DeclassSubject::Carrier(c),
                ..
            } => Some(c),
            _ => None,
        }
    }

    fn kind_token(&self) -> String {
        match self {
            EventKind::Write { .. } => "write".into(),
            EventKind::ExposedRead { high_cap: true, .. } => "read".into(),
            EventKind::ExposedRead {
                high_cap: false, ..
            } => "read-attenuated".into(),
            EventKind::OpaqueRead { .. } => "read-opaque".into(),
            EventKind::HighRiskAction(a) => format!("action:{a}"),
            EventKind::MessageSend { .. } => "send".into(),
            EventKind::MessageReceive { .. } => "recv".into(),
            EventKind::PromoteAttempt {
                candidate, schema, ..
            } => format!("promote:{schema}:{}", candidate.0),
            EventKind::Declassify { procedure, .. } => format!("declassify:{procedure}"),
            EventKind::ContextReset => "reset".into(),
            EventKind::HeartbeatTick => "heartbeat".into(),
            EventKind::AttackerInject { .. } => "inject".into(),
        }
    }

    fn target_token(&self) -> String {
        match self {
            EventKind::MessageSend { channel, .. }
            | EventKind::MessageReceive { channel, .. }
            | EventKind::AttackerInject { channel, .. } => channel.to_string(),
            other => other
                .carrier()
                .map_or_else(|| "-".to_string(), |c| c.to_string()),
        }
    }

    fn label(&self) -> Option<TaintLabel> {
        match *self {
            EventKind::Write { label, .. }
            | EventKind::ExposedRead { label, .. }
            | EventKind::OpaqueRead { label, .. }
            | EventKind::MessageSend { label, .. }
            | EventKind::MessageReceive { label, .. }
            | EventKind::PromoteAttempt { label, .. } => Some(label),
            _ => None,
        }
    }

    fn facets(&self) -> Option<PayloadFacets> {
        match *self {
            EventKind::Write { facets, .. }
            | EventKind::ExposedRead { facets, .. }
            | EventKind::MessageSend { facets, .. }
            | EventKind::MessageReceive { facets, .. }
            | EventKind::PromoteAttempt { facets, .. }
            | EventKind::AttackerInject { facets, .. } => Some(facets),
            EventKind::OpaqueRead { .. } => Some(PayloadFacets::NONE),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub tick: u64,
    pub actor: Actor,
    pub kind: EventKind,
    pub decision: Option<Decision>,
}

impl Event {
    pub fn new(tick: u64, actor: Actor, kind: EventKind) -> Self {
        Self {
            tick,
            actor,
            kind,
            decision: None,
        }
    }

    pub fn agent(tick: u64, agent: AgentId, kind: EventKind) -> Self {
        Self::new(tick, Actor::Agent(agent), kind)
    }

    pub fn with_decision(mut self, decision: Decision) -> Self {
        self.decision = Some(decision);
        self
    }

    /// True if the event took effect: non-effectful records always do,
    /// effectful ones only when allowed or guarded-and-approved.
    pub fn took_effect(&self) -> bool {
        match self.decision {
            Some(d) => d.permits(),
            None => !self.kind.is_effectful(),
        }
    }

    pub fn to_line(&self) -> String {
        let opt = |o: Option<String>| o.unwrap_or_else(|| "-".to_string());
        format!(
            "{}|{}|{}|{}|{}|{}|{}|{}",
            self.tick,
            self.actor,
            self.kind.kind_token(),
            self.kind.target_token(),
            opt(self.kind.label().map(|l| l.to_string())),
            opt(self.decision.map(|d| format!("{}@{}", d.verdict, d.layer))),
            opt(self.decision.map(|d| d.reason.to_string())),
            opt(self.kind.facets().map(|f| f.to_string())),
        )
    }

    pub fn parse_line(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split('|').collect();
        let [tick, actor, kind, target, label, decision, reason, facets] = fields[..] else {
            return Err(format!("expected 8 fields, found {}", fields.len()));
        };
        let e = |err: ParseTokenError| err.to_string();
        let tick: u64 = tick.parse().map_err(|_| format!("bad tick `{tick}`"))?;
        let actor: Actor = actor.parse().map_err(e)?;
        let label = || -> Result<TaintLabel, String> { label.parse().map_err(e) };
        let facets = || -> Result<PayloadFacets, String> { facets.parse().map_err(e) };
        let carrier = || -> Result<CarrierId, String> { target.parse().map_err(e) };
        let channel = || -> Result<ChannelRef, String> { target.parse().map_err(e) };

        let (head, arg) = match kind.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (kind, None),
        };
        let kind = match (head, arg) {
            ("write", None) => EventKind::Write {
                carrier: carrier()?,
                label: label()?,
                facets: facets()?,
            },
            ("read" | "read-attenuated", None) => EventKind::ExposedRead {
                carrier: carrier()?,
                label: label()?,
                facets: facets()?,
                high_cap: head == "read",
            },
            ("read-opaque", None) => EventKind::OpaqueRead {
                carrier: carrier()?,
                label: label()?,
            },
            ("action", Some(a)) => EventKind::HighRiskAction(a.parse().map_err(e)?),
            ("send", None) => EventKind::MessageSend {
                channel: channel()?,
                label: label()?,
                facets: facets()?,
            },
            ("recv", None) => EventKind::MessageReceive {
                channel: channel()?,
                label: label()?,
                facets: facets()?,
            },
            ("promote", Some(a)) => {
                let (schema, id) = a
                    .split_once(':')
                    .ok_or_else(|| format!("bad promote token `{a}`"))?;
                EventKind::PromoteAttempt {
                    candidate: CandidateId(
                        id.parse().map_err(|_| format!("bad candidate id `{id}`"))?,
                    ),
                    schema: schema.parse().map_err(e)?,
                    target: carrier()?,
                    label: label()?,
                    facets: facets()?,
                }
            }
            ("declassify", Some(p)) => EventKind::Declassify {
                subject: if target == "-" {
                    DeclassSubject::AgentState
                } else {
                    DeclassSubject::Carrier(carrier()?)
                },
                procedure: p.parse().map_err(e)?,
            },
            ("reset", None) => EventKind::ContextReset,
            ("heartbeat", None) => EventKind::HeartbeatTick,
            ("inject", None) => EventKind::AttackerInject {
                channel: channel()?,
                facets: facets()?,
            },
            _ => return Err(format!("unknown event kind `{kind}`")),
        };

        let decision = match decision {
            "-" => None,
            d => Some(Decision::parse_parts(d, reason)?),
        };
        Ok(Event {
            tick,
            actor,
            kind,
            decision,
        })
    }
}

/// Element of a per-carrier projection: the alphabet `{W, R↑}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Access {
    Write,
    ExposedRead,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub scenario_id: String,
    events: Vec<Event>,
}

impl Trace {
    pub fn new(scenario_id: impl Into<String>) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            events: Vec::new(),
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last_tick(&self) -> Option<u64> {
        self.events.last().map(|e| e.tick)
    }

    /// Appends `event`, rejecting a tick earlier than the last one.
    /// Equal ticks are fine and keep insertion order.
    pub fn append(&mut self, event: Event) -> Result<usize, ModelError> {
        if let Some(last) = self.last_tick() {
            if event.tick < last {
                return Err(ModelError::TickRegression {
                    last,
                    event: event.tick,
                });
            }
        }
        self.events.push(event);
        Ok(self.events.len() - 1)
    }

    pub fn carriers(&self) -> BTreeSet<CarrierId> {
        self.events.iter().filter_map(|e| e.kind.carrier()).collect()
    }

    pub fn to_log(&self) -> String {
        let mut out = format!("# scenario {}\n", self.scenario_id);
        for e in &self.events {
            out.push_str(&e.to_line());
            out.push('\n');
        }
        out
    }

    pub fn from_log(log: &str) -> Result<Self, ModelError> {
        let mut trace = Trace::new("");
        for (i, raw) in log.lines().enumerate() {
            let line = raw.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(id) = comment.trim().strip_prefix("scenario ") {
                    trace.scenario_id = id.trim().to_string();
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let event = Event::parse_line(line).map_err(|message| ModelError::Parse {
                line: i + 1,
                message,
            })?;
            trace.append(event)?;
        }
        Ok(trace)
    }
}

/// Functional form of [`Trace::append`].
pub fn append_event(mut trace: Trace, event: Event) -> Result<Trace, ModelError> {
    trace.append(event)?;
    Ok(trace)
}

/// Projects `trace` onto `{W, R↑}` for one carrier. Opaque reads, messages
/// and other carriers drop out. A promotion writes into its target
/// trusted-memory carrier, so it projects as `W`.
pub fn project_carrier(trace: &Trace, carrier: CarrierId) -> Vec<Access> {
    project_carrier_where(trace, carrier, |_| true)
}

/// [`project_carrier`] restricted to events accepted by `keep`.
pub fn project_carrier_where(
    trace: &Trace,
    carrier: CarrierId,
    mut keep: impl FnMut(&Event) -> bool,
) -> Vec<Access> {
    trace
        .events()
        .iter()
        .filter(|e| e.kind.carrier() == Some(carrier))
        .filter_map(|e| {
            let access = match e.kind {
                EventKind::Write { .. } | EventKind::PromoteAttempt { .. } => Access::Write,
                EventKind::ExposedRead { .. } => Access::ExposedRead,
                _ => return None,
            };
            keep(e).then_some(access)
        })
        .collect()
}
