//! The reference monitor: one entry point, [`mediate`], composing sealed
//! configuration, the RTW read rule, the memory gate and capability
//! attenuation. Each carrier class is cut at one fixed point.
//!
//! A disabled layer still names itself on the decision it passes through,
//! so toggling one layer can only change decisions tagged with that layer.

use std::fmt;
use std::str::FromStr;

use crate::memory::{check_lease_write, CandidateId, Lease, MemoryCandidate, PromotionPolicy};
use crate::model::{ActionKind, Actor, AgentId, Carrier, CarrierClass, CarrierId, Event, EventKind};
use crate::rtw::{enforce_exposed_read, enforce_opaque_read};
use crate::taint::AgentDecisionState;
use crate::token::{token_enum, ParseTokenError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verdict {
    Allow,
    Deny,
    /// Requires approval; resolved by [`GuardMode`].
    Guard,
}

token_enum!(Verdict, "verdict" {
    Allow => "allow",
    Deny => "deny",
    Guard => "guard",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Reason {
    SealedConfig,
    RtwReEntry,
    LeaseExpired,
    PromotionRejected,
    AttenuatedHighRisk,
    NotMediatedLowRisk,
    DeclassRefused,
    Ok,
}

token_enum!(Reason, "reason" {
    SealedConfig => "sealed-config",
    RtwReEntry => "rtw-re-entry",
    LeaseExpired => "lease-expired",
    PromotionRejected => "promotion-rejected",
    AttenuatedHighRisk => "attenuated-highrisk",
    NotMediatedLowRisk => "not-mediated-lowrisk",
    DeclassRefused => "declass-refused",
    Ok => "ok",
});

/// The layer a decision is attributed to. `Runtime` covers bookkeeping
/// that belongs to no defense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Layer {
    Seal,
    Rtw,
    MemGate,
    Attenuation,
    Runtime,
}

token_enum!(Layer, "layer" {
    Seal => "seal",
    Rtw => "rtw",
    MemGate => "memgate",
    Attenuation => "attenuation",
    Runtime => "runtime",
});

impl Layer {
    /// The four toggleable defense layers.
    pub const DEFENSES: [Layer; 4] = [Layer::Seal, Layer::Rtw, Layer::MemGate, Layer::Attenuation];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Decision {
    pub verdict: Verdict,
    pub reason: Reason,
    pub layer: Layer,
}

impl Decision {
    pub fn allow(layer: Layer) -> Self {
        Self {
            verdict: Verdict::Allow,
            reason: Reason::Ok,
            layer,
        }
    }

    pub fn allow_because(reason: Reason, layer: Layer) -> Self {
        Self {
            verdict: Verdict::Allow,
            reason,
            layer,
        }
    }

    pub fn deny(reason: Reason, layer: Layer) -> Self {
        Self {
            verdict: Verdict::Deny,
            reason,
            layer,
        }
    }

    pub fn guard(reason: Reason, layer: Layer) -> Self {
        Self {
            verdict: Verdict::Guard,
            reason,
            layer,
        }
    }

    /// Allowed outright, or guarded and approved. A guard reaching the trace
    /// has already been resolved by the guard mode, so it counts as effect.
    pub fn permits(self) -> bool {
        self.verdict != Verdict::Deny
    }

    /// Parses the `verdict@layer` and `reason` trace fields.
    pub fn parse_parts(decision: &str, reason: &str) -> Result<Self, String> {
        let (verdict, layer) = decision
            .split_once('@')
            .ok_or_else(|| format!("bad decision `{decision}`"))?;
        let e = |err: ParseTokenError| err.to_string();
        Ok(Self {
            verdict: verdict.parse().map_err(e)?,
            layer: layer.parse().map_err(e)?,
            reason: reason.parse().map_err(e)?,
        })
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}({})", self.verdict, self.layer, self.reason)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum GuardMode {
    #[default]
    DenyAll,
    ApproveAll,
}

token_enum!(GuardMode, "guard mode" {
    DenyAll => "deny",
    ApproveAll => "approve",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EnforcementConfig {
    pub rtw: bool,
    pub seal: bool,
    pub memgate: bool,
    pub attenuation: bool,
    pub guard_mode: GuardMode,
}

impl EnforcementConfig {
    pub fn all() -> Self {
        Self {
            rtw: true,
            seal: true,
            memgate: true,
            attenuation: true,
            guard_mode: GuardMode::DenyAll,
        }
    }

    pub fn none() -> Self {
        Self {
            rtw: false,
            seal: false,
            memgate: false,
            attenuation: false,
            guard_mode: GuardMode::DenyAll,
        }
    }

    /// Exactly one defense layer on.
    pub fn only(layer: Layer) -> Self {
        Self::none().with(layer, true)
    }

    pub fn with(mut self, layer: Layer, on: bool) -> Self {
        match layer {
            Layer::Seal => self.seal = on,
            Layer::Rtw => self.rtw = on,
            Layer::MemGate => self.memgate = on,
            Layer::Attenuation => self.attenuation = on,
            Layer::Runtime => {}
        }
        self
    }

    pub fn with_guard(mut self, guard_mode: GuardMode) -> Self {
        self.guard_mode = guard_mode;
        self
    }

    pub fn enabled(&self, layer: Layer) -> bool {
        match layer {
            Layer::Seal => self.seal,
            Layer::Rtw => self.rtw,
            Layer::MemGate => self.memgate,
            Layer::Attenuation => self.attenuation,
            Layer::Runtime => true,
        }
    }

    /// Comma list of enabled layers, or `all` / `none`.
    pub fn layers_token(&self) -> String {
        let on: Vec<&str> = Layer::DEFENSES
            .iter()
            .filter(|l| self.enabled(**l))
            .map(|l| l.as_str())
            .collect();
        match on.len() {
            0 => "none".into(),
            4 => "all".into(),
            _ => on.join(","),
        }
    }
}

impl Default for EnforcementConfig {
    fn default() -> Self {
        Self::all()
    }
}

/// Parses `all`, `none`, or a comma list drawn from `rtw,seal,memgate,attenuation`.
/// The guard mode is left at its default.
impl FromStr for EnforcementConfig {
    type Err = ParseTokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "all" => return Ok(Self::all()),
            "none" | "" => return Ok(Self::none()),
            _ => {}
        }
        s.split(',').try_fold(Self::none(), |cfg, part| {
            let layer: Layer = part.trim().parse()?;
            if layer == Layer::Runtime {
                return Err(ParseTokenError::new("layer", part));
            }
            Ok(cfg.with(layer, true))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CutPoint {
    WriteTime,
    ExposedReadTime,
    PromotionTime,
    PostReadAttenuation,
}

pub fn cut_point_for(class: CarrierClass) -> CutPoint {
    match class {
        CarrierClass::StaticConfig => CutPoint::WriteTime,
        CarrierClass::WorkspaceFile | CarrierClass::SharedChannelLog => CutPoint::ExposedReadTime,
        CarrierClass::TrustedMemory
        | CarrierClass::CandidateMemory
        | CarrierClass::TaskLocalState => CutPoint::PromotionTime,
        CarrierClass::ExternalSource => CutPoint::PostReadAttenuation,
    }
}

impl CutPoint {
    pub fn layer(self) -> Layer {
        match self {
            CutPoint::WriteTime => Layer::Seal,
            CutPoint::ExposedReadTime => Layer::Rtw,
            CutPoint::PromotionTime => Layer::MemGate,
            CutPoint::PostReadAttenuation => Layer::Attenuation,
        }
    }
}

/// Capability attenuation for a high-risk action.
pub fn attenuate(
    state: &AgentDecisionState,
    action: ActionKind,
    config: &EnforcementConfig,
) -> Decision {
    debug_assert!(action.is_high_risk());
    if state.contaminated && config.attenuation {
        match config.guard_mode {
            GuardMode::DenyAll => Decision::deny(Reason::AttenuatedHighRisk, Layer::Attenuation),
            GuardMode::ApproveAll => {
                Decision::guard(Reason::AttenuatedHighRisk, Layer::Attenuation)
            }
        }
    } else {
        Decision::allow(Layer::Attenuation)
    }
}

/// Read-only snapshot of ecosystem state the monitor consults.
pub trait MediationView {
    fn carrier(&self, id: CarrierId) -> Option<&Carrier>;
    fn agent_state(&self, agent: AgentId) -> Option<&AgentDecisionState>;
    fn leases(&self) -> &[Lease];
    fn candidate(&self, agent: AgentId, id: CandidateId) -> Option<&MemoryCandidate>;
    fn promotion_policy(&self) -> &PromotionPolicy;
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MediationError {
    #[error("event kind `{0}` has no mediation rule")]
    UnmediatedKind(&'static str),
    #[error("effectful event attributed to the attacker")]
    AttackerEffect,
    #[error("unknown carrier {0}")]
    UnknownCarrier(CarrierId),
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("unknown memory candidate {0:?}")]
    UnknownCandidate(CandidateId),
}

/// Decides `event` before it takes effect.
pub fn mediate(
    event: &Event,
    view: &impl MediationView,
    config: &EnforcementConfig,
) -> Result<Decision, MediationError> {
    let agent = match event.actor {
        Actor::Agent(a) => a,
        Actor::Attacker => return Err(MediationError::AttackerEffect),
    };
    let state = || view.agent_state(agent).ok_or(MediationError::UnknownAgent(agent));
    let carrier = |id| view.carrier(id).ok_or(MediationError::UnknownCarrier(id));

    let decision = match &event.kind {
        EventKind::Write { carrier: id, .. } => {
            mediate_write(carrier(*id)?, event.tick, view.leases(), config)
        }
        EventKind::ExposedRead { carrier: id, .. } => {
            let c = carrier(*id)?;
            match cut_point_for(c.class) {
                CutPoint::ExposedReadTime if config.rtw => enforce_exposed_read(c.label, state()?),
                cut => Decision::allow(cut.layer()),
            }
        }
        EventKind::OpaqueRead { carrier: id, .. } => enforce_opaque_read(carrier(*id)?.label),
        EventKind::HighRiskAction(action) => attenuate(state()?, *action, config),
        EventKind::PromoteAttempt { candidate, target, .. } => {
            carrier(*target)?;
            let c = view
                .candidate(agent, *candidate)
                .ok_or(MediationError::UnknownCandidate(*candidate))?;
            if !config.memgate || view.promotion_policy().admits(c) {
                Decision::allow(Layer::MemGate)
            } else {
                Decision::deny(Reason::PromotionRejected, Layer::MemGate)
            }
        }
        EventKind::Declassify { .. } => return Err(MediationError::UnmediatedKind("declassify")),
        EventKind::MessageSend { .. } => return Err(MediationError::UnmediatedKind("send")),
        EventKind::MessageReceive { .. } => return Err(MediationError::UnmediatedKind("recv")),
        EventKind::ContextReset => return Err(MediationError::UnmediatedKind("reset")),
        EventKind::HeartbeatTick => return Err(MediationError::UnmediatedKind("heartbeat")),
        EventKind::AttackerInject { .. } => return Err(MediationError::UnmediatedKind("inject")),
    };
    Ok(decision)
}

fn mediate_write(c: &Carrier, tick: u64, leases: &[Lease], config: &EnforcementConfig) -> Decision {
    match c.class {
        CarrierClass::StaticConfig if config.seal => {
            Decision::deny(Reason::SealedConfig, Layer::Seal)
        }
        CarrierClass::StaticConfig => Decision::allow(Layer::Seal),
        CarrierClass::TaskLocalState if config.memgate => check_lease_write(c, tick, leases),
        // Trusted memory is only reachable through promotion.
        CarrierClass::TrustedMemory if config.memgate => {
            Decision::deny(Reason::PromotionRejected, Layer::MemGate)
        }
        CarrierClass::TaskLocalState
        | CarrierClass::TrustedMemory
        | CarrierClass::CandidateMemory => Decision::allow(Layer::MemGate),
        // Read-time and post-read classes are not cut at write time.
        CarrierClass::WorkspaceFile
        | CarrierClass::SharedChannelLog
        | CarrierClass::ExternalSource => {
            Decision::allow_because(Reason::NotMediatedLowRisk, Layer::Runtime)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::{CandidateSource, MemoryScope, SchemaKind};
    use crate::model::{Autoload, InjectionPosition, PayloadFacets, Scope, TaintLabel};
    use std::collections::BTreeMap;

    struct View {
        carriers: BTreeMap<CarrierId, Carrier>,
        state: AgentDecisionState,
        leases: Vec<Lease>,
        candidates: BTreeMap<CandidateId, MemoryCandidate>,
        policy: PromotionPolicy,
    }

    impl MediationView for View {
        fn carrier(&self, id: CarrierId) -> Option<&Carrier> {
            self.carriers.get(&id)
        }
        fn agent_state(&self, agent: AgentId) -> Option<&AgentDecisionState> {
            (agent == self.state.agent).then_some(&self.state)
        }
        fn leases(&self) -> &[Lease] {
            &self.leases
        }
        fn candidate(&self, _agent: AgentId, id: CandidateId) -> Option<&MemoryCandidate> {
            self.candidates.get(&id)
        }
        fn promotion_policy(&self) -> &PromotionPolicy {
            &self.policy
        }
    }

    const CONFIG: CarrierId = CarrierId(0);
    const FILE: CarrierId = CarrierId(1);
    const MEMORY: CarrierId = CarrierId(2);
    const TASK: CarrierId = CarrierId(3);

    fn view(contaminated: bool) -> View {
        let mk = |id, class, autoload, label| {
            Carrier::new(
                id,
                class,
                InjectionPosition::UserPrompt,
                autoload,
                Scope::AgentLocal,
                label,
            )
            .unwrap()
        };
        let carriers = [
            mk(CONFIG, CarrierClass::StaticConfig, Autoload::SessionStart, TaintLabel::Clean),
            mk(FILE, CarrierClass::WorkspaceFile, Autoload::Heartbeat, TaintLabel::Tainted),
            mk(MEMORY, CarrierClass::TrustedMemory, Autoload::SessionStart, TaintLabel::Clean),
            mk(TASK, CarrierClass::TaskLocalState, Autoload::Heartbeat, TaintLabel::Clean),
        ];
        let mut state = AgentDecisionState::new(AgentId(0), ActionKind::ALL.iter().copied());
        state.contaminated = contaminated;
        let candidate = MemoryCandidate {
            schema_kind: SchemaKind::FreeFormInstruction,
            source: CandidateSource::AgentSummary,
            scope: MemoryScope::SelfPersistent,
            authority: 0,
            ttl: 1,
            label: TaintLabel::TaintedDerived,
            facets: PayloadFacets::ALL,
            value: 0,
        };
        View {
            carriers: carriers.into_iter().map(|c| (c.id, c)).collect(),
            state,
            leases: vec![Lease::new(TASK, 0, 9).unwrap()],
            candidates: [(CandidateId(0), candidate)].into_iter().collect(),
            policy: PromotionPolicy::default(),
        }
    }

    fn ev(kind: EventKind) -> Event {
        Event::agent(9, AgentId(0), kind)
    }

    fn write(carrier: CarrierId) -> Event {
        ev(EventKind::Write {
            carrier,
            label: TaintLabel::TaintedDerived,
            facets: PayloadFacets::ALL,
        })
    }

    fn read(carrier: CarrierId) -> Event {
        ev(EventKind::ExposedRead {
            carrier,
            label: TaintLabel::Tainted,
            facets: PayloadFacets::ALL,
            high_cap: true,
        })
    }

    fn promote() -> Event {
        ev(EventKind::PromoteAttempt {
            candidate: CandidateId(0),
            schema: SchemaKind::FreeFormInstruction,
            target: MEMORY,
            label: TaintLabel::TaintedDerived,
            facets: PayloadFacets::ALL,
        })
    }

    fn shell() -> Event {
        ev(EventKind::HighRiskAction(ActionKind::SendMessage))
    }

    #[test]
    fn mediation_examples() {
        let all = EnforcementConfig::all();
        let v = view(true);
        let d = mediate(&write(CONFIG), &v, &all).unwrap();
        assert_eq!((d.verdict, d.reason), (Verdict::Deny, Reason::SealedConfig));
        let d = mediate(&read(FILE), &view(false), &all).unwrap();
        assert_eq!((d.verdict, d.reason), (Verdict::Deny, Reason::RtwReEntry));
        let d = mediate(&shell(), &v, &all).unwrap();
        assert_eq!((d.verdict, d.reason), (Verdict::Deny, Reason::AttenuatedHighRisk));
        let d = mediate(&promote(), &v, &all).unwrap();
        assert_eq!((d.verdict, d.reason), (Verdict::Deny, Reason::PromotionRejected));

        let none = EnforcementConfig::none();
        for e in [write(CONFIG), read(FILE), shell(), promote(), write(TASK)] {
            assert_eq!(mediate(&e, &v, &none).unwrap().verdict, Verdict::Allow);
        }
    }

    #[test]
    fn disabled_layer_keeps_its_tag() {
        let v = view(true);
        for e in [write(CONFIG), read(FILE), shell(), promote()] {
            let on = mediate(&e, &v, &EnforcementConfig::all()).unwrap();
            let off = mediate(&e, &v, &EnforcementConfig::none()).unwrap();
            assert_eq!(on.layer, off.layer);
            assert!(Layer::DEFENSES.contains(&on.layer));
        }
    }

    #[test]
    fn guard_mode() {
        let v = view(true);
        let approve = EnforcementConfig::all().with_guard(GuardMode::ApproveAll);
        let d = mediate(&shell(), &v, &approve).unwrap();
        assert_eq!(d.verdict, Verdict::Guard);
        assert!(d.permits());
        assert_eq!(
            attenuate(&view(false).state, ActionKind::InvokeShell, &approve).verdict,
            Verdict::Allow
        );
        let off = EnforcementConfig::all().with(Layer::Attenuation, false);
        assert_eq!(
            attenuate(&v.state, ActionKind::WriteConfig, &off).verdict,
            Verdict::Allow
        );
    }

    #[test]
    fn lease_writes_and_direct_memory_writes() {
        let v = view(false);
        let all = EnforcementConfig::all();
        assert_eq!(mediate(&write(TASK), &v, &all).unwrap().verdict, Verdict::Allow);
        let mut late = write(TASK);
        late.tick = 10;
        assert_eq!(mediate(&late, &v, &all).unwrap().reason, Reason::LeaseExpired);
        assert_eq!(mediate(&write(MEMORY), &v, &all).unwrap().verdict, Verdict::Deny);
        assert_eq!(mediate(&write(FILE), &v, &all).unwrap().verdict, Verdict::Allow);
    }

    #[test]
    fn gaps_are_errors() {
        let v = view(false);
        let all = EnforcementConfig::all();
        assert!(matches!(
            mediate(&ev(EventKind::ContextReset), &v, &all),
            Err(MediationError::UnmediatedKind(_))
        ));
        let mut attacker = shell();
        attacker.actor = Actor::Attacker;
        assert_eq!(mediate(&attacker, &v, &all), Err(MediationError::AttackerEffect));
        assert_eq!(
            mediate(&write(CarrierId(40)), &v, &all),
            Err(MediationError::UnknownCarrier(CarrierId(40)))
        );
    }

    #[test]
    fn cut_points() {
        assert_eq!(cut_point_for(CarrierClass::StaticConfig), CutPoint::WriteTime);
        assert_eq!(cut_point_for(CarrierClass::WorkspaceFile), CutPoint::ExposedReadTime);
        assert_eq!(cut_point_for(CarrierClass::SharedChannelLog), CutPoint::ExposedReadTime);
        assert_eq!(cut_point_for(CarrierClass::ExternalSource), CutPoint::PostReadAttenuation);
        for c in [
            CarrierClass::TrustedMemory,
            CarrierClass::CandidateMemory,
            CarrierClass::TaskLocalState,
        ] {
            assert_eq!(cut_point_for(c), CutPoint::PromotionTime);
        }
    }

    #[test]
    fn enforcement_tokens() {
        assert_eq!("all".parse::<EnforcementConfig>().unwrap(), EnforcementConfig::all());
        assert_eq!("none".parse::<EnforcementConfig>().unwrap(), EnforcementConfig::none());
        let two: EnforcementConfig = "rtw, seal".parse().unwrap();
        assert!(two.rtw && two.seal && !two.memgate && !two.attenuation);
        assert_eq!(two.layers_token(), "seal,rtw");
        assert!("rtw,runtime".parse::<EnforcementConfig>().is_err());
        assert!("firewall".parse::<EnforcementConfig>().is_err());
    }

    #[test]
    fn decision_parts_round_trip() {
        for v in Verdict::ALL {
            for r in Reason::ALL {
                for l in Layer::ALL {
                    let d = Decision {
                        verdict: *v,
                        reason: *r,
                        layer: *l,
                    };
                    let back = Decision::parse_parts(&format!("{v}@{l}"), r.as_str()).unwrap();
                    assert_eq!(back, d);
                }
            }
        }
        assert!(Decision::parse_parts("allow", "ok").is_err());
    }
}
