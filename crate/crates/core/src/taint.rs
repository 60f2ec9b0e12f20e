//! Taint initialization, conservative propagation, decision-state
//! contamination and external declassification.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{ActionKind, AgentId, Carrier, CarrierClass, CarrierId, TaintLabel};
use crate::token::token_enum;

/// Where a carrier's initial content came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    SignedBaseline,
    UserProvided,
    Downloaded,
    ExternalSync,
    AgentWritten { contaminated: bool },
}

/// Something whose content can contaminate a decision state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SourceRef {
    Carrier(CarrierId),
    Channel(u32),
}

/// The LLM decision state of one agent, as seen by the runtime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentDecisionState {
    pub agent: AgentId,
    pub contaminated: bool,
    /// Per action: may it run without attenuation right now.
    pub high_cap: BTreeMap<ActionKind, bool>,
    pub contamination_sources: BTreeSet<SourceRef>,
}

impl AgentDecisionState {
    /// A clean state holding `capabilities` unattenuated.
    pub fn new(agent: AgentId, capabilities: impl IntoIterator<Item = ActionKind>) -> Self {
        Self {
            agent,
            contaminated: false,
            high_cap: capabilities.into_iter().map(|a| (a, true)).collect(),
            contamination_sources: BTreeSet::new(),
        }
    }

    /// Any high-risk capability still usable without attenuation.
    pub fn has_high_cap(&self) -> bool {
        self.high_cap.values().any(|v| *v)
    }

    pub fn attenuate_all(&mut self) {
        self.high_cap.values_mut().for_each(|v| *v = false);
    }

    fn restore_caps(&mut self) {
        self.high_cap.values_mut().for_each(|v| *v = true);
    }

    /// Runtime-issued context reset: clears contamination and restores
    /// capabilities. Carrier labels are untouched.
    pub fn context_reset(&mut self) {
        self.contaminated = false;
        self.contamination_sources.clear();
        self.restore_caps();
    }
}

/// Label a carrier starts with. Provenance alone decides; the class is
/// accepted so callers do not have to special-case it.
pub fn initial_label(_class: CarrierClass, provenance: Provenance) -> TaintLabel {
    match provenance {
        Provenance::SignedBaseline => TaintLabel::Clean,
        Provenance::UserProvided | Provenance::Downloaded | Provenance::ExternalSync => {
            TaintLabel::External
        }
        Provenance::AgentWritten { contaminated: false } => TaintLabel::Clean,
        Provenance::AgentWritten { contaminated: true } => TaintLabel::TaintedDerived,
    }
}

/// Label of content written by `writer` from material labeled `origin`.
/// Untrusted origin relayed by a clean writer becomes `Tainted`.
pub fn content_label(writer: &AgentDecisionState, origin: TaintLabel) -> TaintLabel {
    if writer.contaminated {
        TaintLabel::TaintedDerived
    } else if origin.is_untrusted() {
        TaintLabel::Tainted
    } else {
        TaintLabel::Clean
    }
}

/// New label of `target` after an allowed write. Clean writes never
/// launder an untrusted carrier.
pub fn propagate_on_write(
    writer: &AgentDecisionState,
    target: &Carrier,
    content_origin: TaintLabel,
) -> TaintLabel {
    match content_label(writer, content_origin) {
        TaintLabel::Clean => target.label,
        tainted => tainted,
    }
}

/// Applies an allowed exposed read of content labeled `label` from `source`.
pub fn mark_contamination(
    mut state: AgentDecisionState,
    source: SourceRef,
    label: TaintLabel,
) -> AgentDecisionState {
    if label.is_untrusted() {
        state.contaminated = true;
        state.contamination_sources.insert(source);
    }
    state
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DeclassProcedure {
    DeterministicValidation,
    BoundedExtraction,
    TypedPromotion,
    SignedVerification,
    SandboxedExecution,
    ExplicitApproval,
}

token_enum!(DeclassProcedure, "declassification procedure" {
    DeterministicValidation => "DeterministicValidation",
    BoundedExtraction => "BoundedExtraction",
    TypedPromotion => "TypedPromotion",
    SignedVerification => "SignedVerification",
    SandboxedExecution => "SandboxedExecution",
    ExplicitApproval => "ExplicitApproval",
});

/// How trust is being restored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clearance {
    Procedure(DeclassProcedure),
    /// Only meaningful for a decision state.
    ContextReset,
}

/// Who asked for the declassification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Authorizer {
    Runtime,
    Operator,
    /// The agent's own decision state. Never sufficient.
    Agent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum Refusal {
    #[error("declassification requested by the decision state itself")]
    LlmOrigin,
    #[error("procedure not enabled")]
    Disabled,
    #[error("content still carries payload facets")]
    ValidationFailed,
    #[error("clearance does not apply to this subject")]
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeclassOutcome {
    Cleared,
    Refused(Refusal),
}

pub enum DeclassTarget<'a> {
    Carrier(&'a mut Carrier),
    State(&'a mut AgentDecisionState),
}

/// Which declassification procedures the runtime will run. Empty by
/// default, so every procedure is refused.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeclassPolicy {
    pub enabled: BTreeSet<DeclassProcedure>,
}

impl DeclassPolicy {
    pub fn with(procedures: impl IntoIterator<Item = DeclassProcedure>) -> Self {
        Self {
            enabled: procedures.into_iter().collect(),
        }
    }
}

/// Restores trust to a carrier or decision state. Refused requests leave
/// the target untouched.
///
/// Carriers are cleared only when they carry no payload facets; the
/// validators are deterministic checks over typed content.
pub fn declassify(
    target: DeclassTarget<'_>,
    clearance: Clearance,
    authorizer: Authorizer,
    policy: &DeclassPolicy,
) -> DeclassOutcome {
    if authorizer == Authorizer::Agent {
        return DeclassOutcome::Refused(Refusal::LlmOrigin);
    }
    match (target, clearance) {
        (DeclassTarget::State(state), Clearance::ContextReset) => {
            state.context_reset();
            DeclassOutcome::Cleared
        }
        (DeclassTarget::Carrier(_), Clearance::ContextReset) => {
            DeclassOutcome::Refused(Refusal::NotApplicable)
        }
        (_, Clearance::Procedure(p)) if !policy.enabled.contains(&p) => {
            DeclassOutcome::Refused(Refusal::Disabled)
        }
        (DeclassTarget::Carrier(c), Clearance::Procedure(_)) => {
            if !c.content.is_empty() {
                return DeclassOutcome::Refused(Refusal::ValidationFailed);
            }
            c.label = TaintLabel::Clean;
            DeclassOutcome::Cleared
        }
        (DeclassTarget::State(s), Clearance::Procedure(_)) => {
            s.context_reset();
            DeclassOutcome::Cleared
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Autoload, InjectionPosition, PayloadFacets, Scope};

    fn state(contaminated: bool) -> AgentDecisionState {
        let mut s = AgentDecisionState::new(AgentId(1), [ActionKind::SendMessage]);
        s.contaminated = contaminated;
        s
    }

    fn carrier(label: TaintLabel) -> Carrier {
        let mut c = Carrier::new(
            CarrierId(4),
            CarrierClass::WorkspaceFile,
            InjectionPosition::UserPrompt,
            Autoload::Heartbeat,
            Scope::AgentLocal,
            TaintLabel::Clean,
        )
        .unwrap();
        c.label = label;
        c
    }

    #[test]
    fn initial_labels() {
        assert_eq!(
            initial_label(CarrierClass::StaticConfig, Provenance::SignedBaseline),
            TaintLabel::Clean
        );
        assert_eq!(
            initial_label(CarrierClass::WorkspaceFile, Provenance::Downloaded),
            TaintLabel::External
        );
        assert_eq!(
            initial_label(
                CarrierClass::WorkspaceFile,
                Provenance::AgentWritten { contaminated: true }
            ),
            TaintLabel::TaintedDerived
        );
        assert_eq!(
            initial_label(
                CarrierClass::WorkspaceFile,
                Provenance::AgentWritten { contaminated: false }
            ),
            TaintLabel::Clean
        );
    }

    #[test]
    fn write_rule_table() {
        // Writer x origin, against the rule: contaminated writer wins, then
        // untrusted origin, else the target keeps its label.
        let target = carrier(TaintLabel::Clean);
        for contaminated in [false, true] {
            for origin in [TaintLabel::Clean, TaintLabel::External, TaintLabel::Tainted] {
                let got = propagate_on_write(&state(contaminated), &target, origin);
                let want = if contaminated {
                    TaintLabel::TaintedDerived
                } else if origin == TaintLabel::Clean {
                    TaintLabel::Clean
                } else {
                    TaintLabel::Tainted
                };
                assert_eq!(got, want, "contaminated={contaminated} origin={origin}");
            }
        }
    }

    #[test]
    fn clean_write_does_not_launder() {
        let target = carrier(TaintLabel::Tainted);
        assert_eq!(
            propagate_on_write(&state(false), &target, TaintLabel::Clean),
            TaintLabel::Tainted
        );
    }

    #[test]
    fn contamination_is_sticky() {
        let s = mark_contamination(state(false), SourceRef::Channel(0), TaintLabel::Clean);
        assert!(!s.contaminated);
        let s = mark_contamination(s, SourceRef::Channel(0), TaintLabel::External);
        assert!(s.contaminated);
        let s = mark_contamination(s, SourceRef::Carrier(CarrierId(2)), TaintLabel::Clean);
        assert!(s.contaminated);
        assert_eq!(s.contamination_sources.len(), 1);
    }

    #[test]
    fn declassify_paths() {
        let policy = DeclassPolicy::with([DeclassProcedure::DeterministicValidation]);

        let mut c = carrier(TaintLabel::Tainted);
        let out = declassify(
            DeclassTarget::Carrier(&mut c),
            Clearance::Procedure(DeclassProcedure::DeterministicValidation),
            Authorizer::Runtime,
            &policy,
        );
        assert_eq!(out, DeclassOutcome::Cleared);
        assert_eq!(c.label, TaintLabel::Clean);

        let mut s = state(true);
        s.attenuate_all();
        let out = declassify(
            DeclassTarget::State(&mut s),
            Clearance::ContextReset,
            Authorizer::Runtime,
            &policy,
        );
        assert_eq!(out, DeclassOutcome::Cleared);
        assert!(!s.contaminated && s.has_high_cap());

        for p in DeclassProcedure::ALL {
            let mut c = carrier(TaintLabel::Tainted);
            let out = declassify(
                DeclassTarget::Carrier(&mut c),
                Clearance::Procedure(*p),
                Authorizer::Agent,
                &DeclassPolicy::with(DeclassProcedure::ALL.iter().copied()),
            );
            assert_eq!(out, DeclassOutcome::Refused(Refusal::LlmOrigin));
            assert_eq!(c.label, TaintLabel::Tainted);
        }
    }

    #[test]
    fn declassify_refusals_leave_state() {
        let mut c = carrier(TaintLabel::Tainted);
        let off = DeclassPolicy::default();
        let out = declassify(
            DeclassTarget::Carrier(&mut c),
            Clearance::Procedure(DeclassProcedure::DeterministicValidation),
            Authorizer::Operator,
            &off,
        );
        assert_eq!(out, DeclassOutcome::Refused(Refusal::Disabled));

        c.content = PayloadFacets::ALL;
        let on = DeclassPolicy::with([DeclassProcedure::DeterministicValidation]);
        let out = declassify(
            DeclassTarget::Carrier(&mut c),
            Clearance::Procedure(DeclassProcedure::DeterministicValidation),
            Authorizer::Runtime,
            &on,
        );
        assert_eq!(out, DeclassOutcome::Refused(Refusal::ValidationFailed));
        assert_eq!(c.label, TaintLabel::Tainted);

        let out = declassify(
            DeclassTarget::Carrier(&mut c),
            Clearance::ContextReset,
            Authorizer::Runtime,
            &on,
        );
        assert_eq!(out, DeclassOutcome::Refused(Refusal::NotApplicable));
    }
}
