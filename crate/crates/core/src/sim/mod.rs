//! Deterministic discrete-time simulator of a multi-agent ecosystem.
//!
//! Per tick, in order:
//! 1. messages sent last tick are delivered (receive, exposed read of the
//!    recipient's inbox, interaction-driven turn);
//! 2. the attacker's single injection is queued, if this is its tick;
//! 3. agents whose heartbeat period divides the tick take a scheduled turn.
//!
//! Every write, exposed read, high-risk action and promotion goes through
//! [`mediate`] and is logged with its decision before it can take effect.

pub mod agent;
pub mod framework;
pub mod random;
pub mod transform;

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use agent::{
    agent_turn, capabilities, AgentProfile, Compliance, ComplianceTable, Intent, Permissions,
    Privilege, Proposal, Stimulus, TurnContext, Trigger,
};
pub use framework::{CarrierRole, Framework};
pub use transform::transform_payload;

use crate::memory::{
    CandidateId, CandidateSource, GateError, Lease, MemoryCandidate, MemoryGate, MemoryScope,
    PromotionPolicy, SchemaKind,
};
use crate::model::{
    ActionKind, Actor, AgentId, Autoload, Carrier, CarrierClass, CarrierId, ChannelId, ChannelRef,
    DeclassSubject, Event, EventKind, ModelError, PayloadFacets, TaintLabel, Trace,
};
use crate::policy::{
    mediate, Decision, EnforcementConfig, Layer, MediationError, MediationView, Reason,
};
use crate::taint::{
    content_label, declassify, mark_contamination, propagate_on_write, AgentDecisionState,
    Authorizer, Clearance, DeclassOutcome, DeclassPolicy, DeclassProcedure, DeclassTarget,
    SourceRef,
};
use crate::verify::{self, Report, VerifyError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelSpec {
    pub name: String,
    /// Leaves the ecosystem: peer sends on it reach no agent.
    pub external: bool,
    /// Per-hop transform strength; falls back to the scenario default.
    pub strength: Option<u8>,
}

impl ChannelSpec {
    pub fn internal(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            external: false,
            strength: None,
        }
    }

    pub fn external(name: impl Into<String>) -> Self {
        Self {
            external: true,
            ..Self::internal(name)
        }
    }
}

/// The attacker's one message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Injection {
    pub channel: usize,
    pub tick: u64,
    pub facets: PayloadFacets,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub seed: u64,
    pub max_ticks: u64,
    pub transform_strength: u8,
    /// Run deterministic validation on heartbeat carriers each turn.
    pub declassification: bool,
    pub enforcement: EnforcementConfig,
    pub promotion: PromotionPolicy,
    pub agents: Vec<AgentProfile>,
    pub channels: Vec<ChannelSpec>,
    pub injection: Injection,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("scenario has no agents")]
    NoAgents,
    #[error("duplicate agent name `{0}`")]
    DuplicateAgent(String),
    #[error("agent `{0}`: heartbeat period must be at least 1")]
    ZeroPeriod(String),
    #[error("agent `{agent}`: unknown channel index {channel}")]
    UnknownChannel { agent: String, channel: usize },
    #[error("injection channel index {0} does not exist")]
    InjectionChannel(usize),
    #[error("injection tick {tick} is past max_ticks {max}")]
    InjectionTick { tick: u64, max: u64 },
    #[error("transform strength {0} is above 4")]
    Strength(u8),
    #[error("agent `{0}`: lease window is inverted")]
    Lease(String),
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.agents.is_empty() {
            return Err(ScenarioError::NoAgents);
        }
        let mut names = BTreeSet::new();
        for a in &self.agents {
            if !names.insert(a.name.as_str()) {
                return Err(ScenarioError::DuplicateAgent(a.name.clone()));
            }
            if a.heartbeat_period == 0 {
                return Err(ScenarioError::ZeroPeriod(a.name.clone()));
            }
            if let Some(&channel) = a.channels.iter().find(|c| **c >= self.channels.len()) {
                return Err(ScenarioError::UnknownChannel {
                    agent: a.name.clone(),
                    channel,
                });
            }
            if matches!(a.lease, Some((s, e)) if s > e) {
                return Err(ScenarioError::Lease(a.name.clone()));
            }
        }
        if self.injection.channel >= self.channels.len() {
            return Err(ScenarioError::InjectionChannel(self.injection.channel));
        }
        if self.injection.tick > self.max_ticks {
            return Err(ScenarioError::InjectionTick {
                tick: self.injection.tick,
                max: self.max_ticks,
            });
        }
        let strengths = self.channels.iter().filter_map(|c| c.strength);
        if let Some(s) = strengths.chain([self.transform_strength]).find(|s| *s > 4) {
            return Err(ScenarioError::Strength(s));
        }
        Ok(())
    }

    pub fn agent_index(&self, name: &str) -> Option<usize> {
        self.agents.iter().position(|a| a.name == name)
    }

    fn channel_ref(&self, index: usize) -> ChannelRef {
        ChannelRef {
            id: ChannelId(index as u32),
            external: self.channels[index].external,
        }
    }

    fn strength(&self, channel: usize) -> u8 {
        self.channels[channel]
            .strength
            .unwrap_or(self.transform_strength)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("mediation gap: {0}")]
    Mediation(#[from] MediationError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error("verifier rejected the simulator's own trace: {0}")]
    Verify(#[from] VerifyError),
}

impl SimError {
    /// Internal invariant breach rather than bad input.
    pub fn is_internal(&self) -> bool {
        !matches!(self, SimError::Scenario(_))
    }
}

#[derive(Debug, Clone)]
struct AgentRuntime {
    id: AgentId,
    profile: AgentProfile,
    capabilities: BTreeSet<ActionKind>,
    state: AgentDecisionState,
    gate: MemoryGate,
    /// Workspace carriers in rank order.
    carriers: Vec<(CarrierRole, CarrierId)>,
    /// Parallel to `profile.channels`.
    inboxes: Vec<CarrierId>,
    /// Facets sent so far, per channel index.
    sent: BTreeMap<usize, PayloadFacets>,
    session_started: bool,
}

impl AgentRuntime {
    fn role(&self, role: CarrierRole) -> Option<CarrierId> {
        self.roles(role).next()
    }

    fn roles(&self, role: CarrierRole) -> impl Iterator<Item = CarrierId> + '_ {
        self.carriers
            .iter()
            .filter(move |(r, _)| *r == role)
            .map(|(_, c)| *c)
    }
}

#[derive(Debug, Clone, Copy)]
struct Message {
    channel: usize,
    sender: Option<usize>,
    label: TaintLabel,
    facets: PayloadFacets,
}

/// Facets the agent complied with during one turn.
#[derive(Debug, Clone, Copy, Default)]
struct Uptake {
    facets: PayloadFacets,
    label: Option<TaintLabel>,
}

impl Uptake {
    fn add(&mut self, label: TaintLabel, facets: PayloadFacets) {
        self.facets = self.facets.union(facets);
        self.label = self.label.max(Some(label));
    }

    fn stimulus(self, trigger: Trigger) -> Stimulus {
        Stimulus {
            trigger,
            facets: self.facets,
            label: self.label.unwrap_or(TaintLabel::Clean),
        }
    }
}

/// Complete mutable state of one running scenario.
#[derive(Debug, Clone)]
pub struct Ecosystem {
    scenario: Scenario,
    tick: u64,
    carriers: Vec<Carrier>,
    agents: Vec<AgentRuntime>,
    leases: Vec<Lease>,
    outbound: Vec<Message>,
    trace: Trace,
    rng: ChaCha8Rng,
}

impl MediationView for Ecosystem {
    fn carrier(&self, id: CarrierId) -> Option<&Carrier> {
        self.carriers.get(id.0 as usize)
    }

    fn agent_state(&self, agent: AgentId) -> Option<&AgentDecisionState> {
        self.agents.get(agent.0 as usize).map(|a| &a.state)
    }

    fn leases(&self) -> &[Lease] {
        &self.leases
    }

    fn candidate(&self, agent: AgentId, id: CandidateId) -> Option<&MemoryCandidate> {
        self.agents.get(agent.0 as usize)?.gate.candidate(id)
    }

    fn promotion_policy(&self) -> &PromotionPolicy {
        &self.scenario.promotion
    }
}

impl Ecosystem {
    pub fn new(scenario: Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let mut carriers = Vec::new();
        let mut leases = Vec::new();
        let mut agents = Vec::new();
        for (i, profile) in scenario.agents.iter().enumerate() {
            let id = AgentId(i as u32);
            let mut slots = profile.framework.template(profile.workspace_files);
            slots.extend((0..profile.channels.len()).map(framework::inbox_slot));
            let mut own = Vec::new();
            let mut inboxes = Vec::new();
            for slot in slots {
                let cid = CarrierId(carriers.len() as u32);
                let c = Carrier::new(
                    cid,
                    slot.class,
                    slot.position,
                    slot.autoload,
                    slot.scope,
                    TaintLabel::Clean,
                )?;
                carriers.push(c);
                match slot.role {
                    CarrierRole::Inbox(_) => inboxes.push(cid),
                    role => own.push((role, cid)),
                }
                if slot.class == CarrierClass::TaskLocalState {
                    let (start, end) = profile.lease.unwrap_or((0, scenario.max_ticks));
                    leases.push(Lease::new(cid, start, end)?);
                }
            }
            let capabilities = profile.capabilities();
            agents.push(AgentRuntime {
                id,
                state: AgentDecisionState::new(id, capabilities.iter().copied()),
                capabilities,
                profile: profile.clone(),
                gate: MemoryGate::new(),
                carriers: own,
                inboxes,
                sent: BTreeMap::new(),
                session_started: false,
            });
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            trace: Trace::new(scenario.id.clone()),
            scenario,
            tick: 0,
            carriers,
            agents,
            leases,
            outbound: Vec::new(),
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn carriers(&self) -> &[Carrier] {
        &self.carriers
    }

    pub fn gate(&self, agent: AgentId) -> Option<&MemoryGate> {
        self.agents.get(agent.0 as usize).map(|a| &a.gate)
    }

    /// Carrier ids an agent owns, with their roles, in rank order.
    pub fn agent_carriers(&self, agent: AgentId) -> Vec<(CarrierRole, CarrierId)> {
        self.agents
            .get(agent.0 as usize)
            .map(|a| a.carriers.clone())
            .unwrap_or_default()
    }

    pub fn is_finished(&self) -> bool {
        self.tick > self.scenario.max_ticks
    }

    /// Advances one tick.
    pub fn step(&mut self) -> Result<(), SimError> {
        if self.is_finished() {
            return Ok(());
        }
        for msg in std::mem::take(&mut self.outbound) {
            let recipients: Vec<usize> = (0..self.agents.len())
                .filter(|r| Some(*r) != msg.sender)
                .filter(|r| self.agents[*r].profile.channels.contains(&msg.channel))
                .filter(|_| msg.sender.is_none() || !self.scenario.channels[msg.channel].external)
                .collect();
            for r in recipients {
                self.deliver(msg, r)?;
            }
        }

        let inj = self.scenario.injection;
        if inj.tick == self.tick {
            let channel = self.scenario.channel_ref(inj.channel);
            let kind = EventKind::AttackerInject {
                channel,
                facets: inj.facets,
            };
            self.trace.append(Event::new(self.tick, Actor::Attacker, kind))?;
            self.outbound.push(Message {
                channel: inj.channel,
                sender: None,
                label: TaintLabel::Tainted,
                facets: inj.facets,
            });
        }

        if self.tick > 0 {
            for a in 0..self.agents.len() {
                if self.tick.is_multiple_of(self.agents[a].profile.heartbeat_period) {
                    self.heartbeat_turn(a)?;
                }
            }
        }
        self.tick += 1;
        Ok(())
    }

    pub fn run(mut self) -> Result<Trace, SimError> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(self.trace)
    }

    fn record(&mut self, a: usize, kind: EventKind) -> Result<(), SimError> {
        let e = Event::agent(self.tick, self.agents[a].id, kind);
        self.trace.append(e)?;
        Ok(())
    }

    fn decide(&mut self, a: usize, kind: EventKind) -> Result<Decision, SimError> {
        let event = Event::agent(self.tick, self.agents[a].id, kind);
        let decision = mediate(&event, self, &self.scenario.enforcement)?;
        self.trace.append(event.with_decision(decision))?;
        Ok(decision)
    }

    fn carrier_mut(&mut self, id: CarrierId) -> &mut Carrier {
        &mut self.carriers[id.0 as usize]
    }

    fn contaminate(&mut self, a: usize, source: SourceRef, label: TaintLabel) {
        let attenuation = self.scenario.enforcement.attenuation;
        let agent = &mut self.agents[a];
        agent.state = mark_contamination(agent.state.clone(), source, label);
        if agent.state.contaminated && attenuation {
            agent.state.attenuate_all();
        }
    }

    /// Exposed read; returns what reached the decision state, if allowed.
    fn exposed_read(
        &mut self,
        a: usize,
        id: CarrierId,
    ) -> Result<Option<(TaintLabel, PayloadFacets)>, SimError> {
        let memgate = self.scenario.enforcement.memgate;
        let c = &self.carriers[id.0 as usize];
        let projected = c.class == CarrierClass::TrustedMemory && memgate;
        let label = c.label;
        let facets = if projected { PayloadFacets::NONE } else { c.content };
        let high_cap = self.agents[a].state.has_high_cap();
        let kind = EventKind::ExposedRead {
            carrier: id,
            label,
            facets,
            high_cap,
        };
        if !self.decide(a, kind)?.permits() {
            return Ok(None);
        }
        if projected {
            let tick = self.tick;
            self.agents[a].gate.render_projection(tick);
        }
        self.contaminate(a, SourceRef::Carrier(id), label);
        Ok(Some((label, facets)))
    }

    /// Exposed read whose payload, if complied with, feeds this turn.
    fn load(&mut self, a: usize, id: CarrierId, uptake: &mut Uptake) -> Result<bool, SimError> {
        let Some((label, facets)) = self.exposed_read(a, id)? else {
            return Ok(false);
        };
        if !facets.is_empty() {
            let position = self.carriers[id.0 as usize].injection_position;
            if self.agents[a].profile.compliance.resolve(position, &mut self.rng) {
                uptake.add(label, facets);
            }
        }
        Ok(true)
    }

    fn act(&mut self, a: usize, action: ActionKind) -> Result<bool, SimError> {
        if !self.agents[a].capabilities.contains(&action) {
            return Ok(false);
        }
        Ok(self.decide(a, EventKind::HighRiskAction(action))?.permits())
    }

    fn write(
        &mut self,
        a: usize,
        id: CarrierId,
        facets: PayloadFacets,
        origin: TaintLabel,
    ) -> Result<bool, SimError> {
        if let Some(action) = ActionKind::for_write(&self.carriers[id.0 as usize]) {
            if !self.act(a, action)? {
                return Ok(false);
            }
        }
        let label = content_label(&self.agents[a].state, origin);
        let kind = EventKind::Write {
            carrier: id,
            label,
            facets,
        };
        if !self.decide(a, kind)?.permits() {
            return Ok(false);
        }
        let new_label = propagate_on_write(&self.agents[a].state, &self.carriers[id.0 as usize], origin);
        let c = self.carrier_mut(id);
        c.label = new_label;
        c.content = c.content.union(facets);
        Ok(true)
    }

    fn send(
        &mut self,
        a: usize,
        channel: ChannelRef,
        facets: PayloadFacets,
        origin: TaintLabel,
    ) -> Result<(), SimError> {
        let label = content_label(&self.agents[a].state, origin);
        self.record(
            a,
            EventKind::MessageSend {
                channel,
                label,
                facets,
            },
        )?;
        let sent = self.agents[a].sent.entry(channel.id.0 as usize).or_default();
        *sent = sent.union(facets);
        self.outbound.push(Message {
            channel: channel.id.0 as usize,
            sender: Some(a),
            label,
            facets,
        });
        Ok(())
    }

    fn remember(
        &mut self,
        a: usize,
        facets: PayloadFacets,
        origin: TaintLabel,
    ) -> Result<bool, SimError> {
        let candidate = MemoryCandidate {
            schema_kind: SchemaKind::FreeFormInstruction,
            source: CandidateSource::AgentSummary,
            scope: MemoryScope::SelfPersistent,
            authority: 0,
            ttl: 30,
            label: content_label(&self.agents[a].state, origin),
            facets,
            value: 0,
        };
        let id = self.agents[a].gate.submit_candidate(candidate);
        self.promote(a, id)
    }

    fn promote(&mut self, a: usize, id: CandidateId) -> Result<bool, SimError> {
        let Some(memory) = self.agents[a].role(CarrierRole::Memory) else {
            return Ok(false);
        };
        let c = self.agents[a]
            .gate
            .candidate(id)
            .cloned()
            .ok_or(GateError::UnknownCandidate(id))?;
        let kind = EventKind::PromoteAttempt {
            candidate: id,
            schema: c.schema_kind,
            target: memory,
            label: c.label,
            facets: c.facets,
        };
        if !self.decide(a, kind)?.permits() {
            return Ok(false);
        }
        let tick = self.tick;
        if self.scenario.enforcement.memgate {
            let policy = self.scenario.promotion.clone();
            let admitted = self.agents[a].gate.promote(id, &policy, tick)?;
            if admitted && c.label.is_untrusted() {
                // Only the typed projection of the entry is ever rendered.
                self.run_declassification(a, memory, DeclassProcedure::TypedPromotion)?;
            }
        } else {
            // With the gate off, the raw entry lands in autoloaded memory.
            self.agents[a].gate.promote_unchecked(id, tick)?;
            let m = self.carrier_mut(memory);
            if c.label.is_untrusted() {
                m.label = c.label;
            }
            m.content = m.content.union(c.facets);
        }
        Ok(true)
    }

    fn turn_context(&self, a: usize, facets: PayloadFacets) -> TurnContext {
        let agent = &self.agents[a];
        let holds = |c: Option<CarrierId>| {
            c.is_some_and(|c| facets.is_subset_of(self.carriers[c.0 as usize].content))
        };
        let persist_target = agent.role(CarrierRole::Heartbeat);
        let config_target = agent.role(CarrierRole::Identity);
        let (external, internal): (Vec<ChannelRef>, Vec<ChannelRef>) = agent
            .profile
            .channels
            .iter()
            .map(|c| self.scenario.channel_ref(*c))
            .partition(|c| c.external);
        TurnContext {
            privilege: Some(agent.profile.privilege),
            capabilities: agent.capabilities.clone(),
            persist_target,
            persisted: holds(persist_target),
            config_target,
            config_written: holds(config_target),
            has_memory: agent.role(CarrierRole::Memory).is_some(),
            relayed: internal
                .iter()
                .copied()
                .filter(|c| {
                    agent
                        .sent
                        .get(&(c.id.0 as usize))
                        .is_some_and(|f| facets.is_subset_of(*f))
                })
                .collect(),
            internal_channels: internal,
            external_channels: external,
            exfil_sources: config_target
                .into_iter()
                .chain(agent.roles(CarrierRole::Workspace).take(2))
                .collect(),
        }
    }

    fn respond(&mut self, a: usize, stimulus: Stimulus) -> Result<(), SimError> {
        let ctx = self.turn_context(a, stimulus.facets);
        let origin = stimulus.label;
        for Intent(steps) in agent_turn(&ctx, &stimulus) {
            for step in steps {
                let ok = match step {
                    Proposal::Act(action) => self.act(a, action)?,
                    Proposal::Write { carrier, facets } => self.write(a, carrier, facets, origin)?,
                    Proposal::ExposedRead(c) => self.exposed_read(a, c)?.is_some(),
                    Proposal::Send { channel, facets } => {
                        self.send(a, channel, facets, origin)?;
                        true
                    }
                    Proposal::Remember { facets } => self.remember(a, facets, origin)?,
                };
                if !ok {
                    break;
                }
            }
        }
        Ok(())
    }

    fn deliver(&mut self, msg: Message, r: usize) -> Result<(), SimError> {
        let channel = self.scenario.channel_ref(msg.channel);
        let facets = match msg.sender {
            None => msg.facets,
            Some(_) => transform_payload(msg.facets, self.scenario.strength(msg.channel)),
        };
        self.record(
            r,
            EventKind::MessageReceive {
                channel,
                label: msg.label,
                facets,
            },
        )?;
        let slot = self.agents[r]
            .profile
            .channels
            .iter()
            .position(|c| *c == msg.channel)
            .expect("recipient is on the channel");
        let inbox = self.agents[r].inboxes[slot];
        let c = self.carrier_mut(inbox);
        if msg.label.is_untrusted() {
            c.label = msg.label;
        }
        c.content = facets;
        let mut uptake = Uptake::default();
        self.load(r, inbox, &mut uptake)?;
        self.respond(r, uptake.stimulus(Trigger::Message(channel)))
    }

    fn heartbeat_turn(&mut self, a: usize) -> Result<(), SimError> {
        self.record(a, EventKind::HeartbeatTick)?;
        if self.agents[a].profile.session_reset && self.agents[a].session_started {
            self.record(a, EventKind::ContextReset)?;
            self.agents[a].state.context_reset();
            self.agents[a].session_started = false;
        }
        let mut uptake = Uptake::default();
        let autoloaded = |agent: &AgentRuntime, carriers: &[Carrier], when: Autoload| {
            agent
                .carriers
                .iter()
                .map(|(_, c)| *c)
                .filter(|c| carriers[c.0 as usize].autoload == when)
                .collect::<Vec<_>>()
        };
        if !self.agents[a].session_started {
            for c in autoloaded(&self.agents[a], &self.carriers, Autoload::SessionStart) {
                self.load(a, c, &mut uptake)?;
            }
            self.agents[a].session_started = true;
        }
        let scheduled = autoloaded(&self.agents[a], &self.carriers, Autoload::Heartbeat);
        if self.scenario.declassification {
            for &c in &scheduled {
                self.declassify_carrier(a, c)?;
            }
        }
        for &c in &scheduled {
            self.load(a, c, &mut uptake)?;
        }

        let workload = self.agents[a].profile.workload;
        let files: Vec<CarrierId> = self.agents[a].roles(CarrierRole::Workspace).collect();
        let turn = (self.tick / self.agents[a].profile.heartbeat_period) as usize;
        if workload {
            if let Some(hb) = self.agents[a].role(CarrierRole::Heartbeat) {
                let label = self.carriers[hb.0 as usize].label;
                self.decide(a, EventKind::OpaqueRead { carrier: hb, label })?;
            }
            if !files.is_empty() {
                self.load(a, files[turn % files.len()], &mut uptake)?;
            }
        }

        self.respond(a, uptake.stimulus(Trigger::Heartbeat))?;

        if workload {
            self.workload_writes(a, &files, turn)?;
        }
        Ok(())
    }

    /// Benign background work: task-local note, ordinary output file and a
    /// typed memory promotion from tool output.
    fn workload_writes(&mut self, a: usize, files: &[CarrierId], turn: usize) -> Result<(), SimError> {
        let clean = TaintLabel::Clean;
        if let Some(task) = self.agents[a].role(CarrierRole::TaskState) {
            self.write(a, task, PayloadFacets::NONE, clean)?;
        }
        if self.agents[a].profile.permissions.file_write() && !files.is_empty() {
            self.write(a, files[(turn + 1) % files.len()], PayloadFacets::NONE, clean)?;
        }
        if self.agents[a].role(CarrierRole::Memory).is_some() {
            let candidate = MemoryCandidate {
                schema_kind: SchemaKind::TypedTaskNote,
                source: CandidateSource::ToolOutput,
                scope: MemoryScope::SelfSession,
                authority: 1,
                ttl: 30,
                label: content_label(&self.agents[a].state, clean),
                facets: PayloadFacets::NONE,
                value: self.tick,
            };
            let id = self.agents[a].gate.submit_candidate(candidate);
            self.promote(a, id)?;
        }
        Ok(())
    }

    fn declassify_carrier(&mut self, a: usize, id: CarrierId) -> Result<(), SimError> {
        if !self.carriers[id.0 as usize].label.is_untrusted() {
            return Ok(());
        }
        self.run_declassification(a, id, DeclassProcedure::DeterministicValidation)
    }

    fn run_declassification(
        &mut self,
        a: usize,
        id: CarrierId,
        procedure: DeclassProcedure,
    ) -> Result<(), SimError> {
        let outcome = declassify(
            DeclassTarget::Carrier(self.carrier_mut(id)),
            Clearance::Procedure(procedure),
            Authorizer::Runtime,
            &DeclassPolicy::with([procedure]),
        );
        let decision = match outcome {
            DeclassOutcome::Cleared => Decision::allow(Layer::Runtime),
            DeclassOutcome::Refused(_) => Decision::deny(Reason::DeclassRefused, Layer::Runtime),
        };
        let kind = EventKind::Declassify {
            subject: DeclassSubject::Carrier(id),
            procedure,
        };
        let e = Event::agent(self.tick, self.agents[a].id, kind).with_decision(decision);
        self.trace.append(e)?;
        Ok(())
    }
}

/// Runs `scenario` to `max_ticks` and returns its trace.
pub fn simulate(scenario: &Scenario) -> Result<Trace, SimError> {
    Ecosystem::new(scenario.clone())?.run()
}

/// Runs `scenario`; the report is computed by the verifier from the
/// serialized trace alone.
pub fn run_scenario(scenario: &Scenario) -> Result<(Trace, Report), SimError> {
    let trace = simulate(scenario)?;
    let report = verify::verify_log(&trace.to_log())?;
    Ok((trace, report))
}

#[cfg(test)]
mod tests;
