//! Protection for dynamic autoloaded state: task-local leases and the
//! candidate → trusted memory promotion gate.
//!
//! Anything may be written to the candidate store. Nothing in it is ever
//! autoloaded. An entry reaches trusted memory only when every predicate of
//! the [`PromotionPolicy`] holds, and trusted memory is rendered into agent
//! context as typed entries only.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{Carrier, CarrierClass, CarrierId, PayloadFacets, TaintLabel};
use crate::policy::{Decision, Layer, Reason};
use crate::token::token_enum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CandidateId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SchemaKind {
    TypedPreference,
    TypedFact,
    TypedTaskNote,
    FreeFormInstruction,
    ToolPermission,
    PolicyUpdate,
    CrossUserRule,
    ExecutableCommand,
    ExternalCommRule,
}

token_enum!(SchemaKind, "schema kind" {
    TypedPreference => "TypedPreference",
    TypedFact => "TypedFact",
    TypedTaskNote => "TypedTaskNote",
    FreeFormInstruction => "FreeFormInstruction",
    ToolPermission => "ToolPermission",
    PolicyUpdate => "PolicyUpdate",
    CrossUserRule => "CrossUserRule",
    ExecutableCommand => "ExecutableCommand",
    ExternalCommRule => "ExternalCommRule",
});

impl SchemaKind {
    /// Schemas no policy may ever allow.
    pub fn is_forbidden(self) -> bool {
        !matches!(
            self,
            SchemaKind::TypedPreference | SchemaKind::TypedFact | SchemaKind::TypedTaskNote
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CandidateSource {
    UserDirect,
    AgentSummary,
    ToolOutput,
    ExternalContent,
}

token_enum!(CandidateSource, "candidate source" {
    UserDirect => "UserDirect",
    AgentSummary => "AgentSummary",
    ToolOutput => "ToolOutput",
    ExternalContent => "ExternalContent",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MemoryScope {
    SelfSession,
    SelfPersistent,
    CrossAgent,
}

token_enum!(MemoryScope, "memory scope" {
    SelfSession => "SelfSession",
    SelfPersistent => "SelfPersistent",
    CrossAgent => "CrossAgent",
});

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryCandidate {
    pub schema_kind: SchemaKind,
    pub source: CandidateSource,
    pub scope: MemoryScope,
    /// Small non-negative authority level; 0 is least authority.
    pub authority: u32,
    /// Lifetime in ticks once promoted.
    pub ttl: u64,
    pub label: TaintLabel,
    pub facets: PayloadFacets,
    /// Opaque typed value. Never interpreted.
    pub value: u64,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GateError {
    #[error("promotion policy may not allow forbidden schema {0}")]
    ForbiddenSchema(SchemaKind),
    #[error("unknown memory candidate {0:?}")]
    UnknownCandidate(CandidateId),
    #[error("lease window [{start}, {end}] is inverted")]
    InvertedLease { start: u64, end: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromotionPolicy {
    allowed_schemas: BTreeSet<SchemaKind>,
    pub allowed_sources: BTreeSet<CandidateSource>,
    pub allowed_scopes: BTreeSet<MemoryScope>,
    pub a_max: u32,
    pub t_max: u64,
}

impl PromotionPolicy {
    pub fn new(
        allowed_schemas: impl IntoIterator<Item = SchemaKind>,
        allowed_sources: impl IntoIterator<Item = CandidateSource>,
        allowed_scopes: impl IntoIterator<Item = MemoryScope>,
        a_max: u32,
        t_max: u64,
    ) -> Result<Self, GateError> {
        let allowed_schemas: BTreeSet<_> = allowed_schemas.into_iter().collect();
        if let Some(bad) = allowed_schemas.iter().find(|s| s.is_forbidden()) {
            return Err(GateError::ForbiddenSchema(*bad));
        }
        Ok(Self {
            allowed_schemas,
            allowed_sources: allowed_sources.into_iter().collect(),
            allowed_scopes: allowed_scopes.into_iter().collect(),
            a_max,
            t_max,
        })
    }

    pub fn allowed_schemas(&self) -> &BTreeSet<SchemaKind> {
        &self.allowed_schemas
    }

    /// The five-way conjunction deciding promotion.
    pub fn admits(&self, c: &MemoryCandidate) -> bool {
        self.allowed_schemas.contains(&c.schema_kind)
            && self.allowed_sources.contains(&c.source)
            && self.allowed_scopes.contains(&c.scope)
            && c.authority <= self.a_max
            && c.ttl <= self.t_max
    }
}

impl Default for PromotionPolicy {
    fn default() -> Self {
        Self::new(
            [
                SchemaKind::TypedPreference,
                SchemaKind::TypedFact,
                SchemaKind::TypedTaskNote,
            ],
            [CandidateSource::UserDirect, CandidateSource::ToolOutput],
            [MemoryScope::SelfSession, MemoryScope::SelfPersistent],
            2,
            90,
        )
        .expect("default policy is valid")
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PromotionPolicyConfig {
    allowed_schemas: Vec<SchemaKind>,
    allowed_sources: Vec<CandidateSource>,
    allowed_scopes: Vec<MemoryScope>,
    a_max: u32,
    t_max: u64,
}

impl<'de> Deserialize<'de> for PromotionPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let c = PromotionPolicyConfig::deserialize(d)?;
        PromotionPolicy::new(
            c.allowed_schemas,
            c.allowed_sources,
            c.allowed_scopes,
            c.a_max,
            c.t_max,
        )
        .map_err(serde::de::Error::custom)
    }
}

/// Bounded write access to one task-local carrier over `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lease {
    pub carrier: CarrierId,
    pub start: u64,
    pub end: u64,
}

impl Lease {
    pub fn new(carrier: CarrierId, start: u64, end: u64) -> Result<Self, GateError> {
        if start > end {
            return Err(GateError::InvertedLease { start, end });
        }
        Ok(Self {
            carrier,
            start,
            end,
        })
    }

    pub fn covers(&self, carrier: CarrierId, tick: u64) -> bool {
        self.carrier == carrier && (self.start..=self.end).contains(&tick)
    }
}

pub fn check_lease_write(carrier: &Carrier, tick: u64, leases: &[Lease]) -> Decision {
    debug_assert_eq!(carrier.class, CarrierClass::TaskLocalState);
    if leases.iter().any(|l| l.covers(carrier.id, tick)) {
        Decision::allow(Layer::MemGate)
    } else {
        Decision::deny(Reason::LeaseExpired, Layer::MemGate)
    }
}

/// What trusted memory looks like once rendered into context: typed fields
/// only, no facets and no free text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ProjectedEntry {
    pub id: CandidateId,
    pub schema_kind: SchemaKind,
    pub scope: MemoryScope,
    pub authority: u32,
    pub value: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct TrustedEntry {
    id: CandidateId,
    candidate: MemoryCandidate,
    promoted_at: u64,
}

/// Candidate store `M_c` and trusted store `M_t` for one agent.
#[derive(Debug, Clone, Default)]
pub struct MemoryGate {
    candidates: BTreeMap<CandidateId, MemoryCandidate>,
    trusted: Vec<TrustedEntry>,
    next_id: u64,
    promoted: BTreeSet<CandidateId>,
    rendered: BTreeSet<CandidateId>,
}

impl MemoryGate {
    pub fn new() -> Self {
        Self::default()
    }

    /// Storage is unrestricted; promotion is the gate.
    pub fn submit_candidate(&mut self, candidate: MemoryCandidate) -> CandidateId {
        let id = CandidateId(self.next_id);
        self.next_id += 1;
        self.candidates.insert(id, candidate);
        id
    }

    pub fn candidate(&self, id: CandidateId) -> Option<&MemoryCandidate> {
        self.candidates.get(&id)
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }

    pub fn trusted_count(&self) -> usize {
        self.trusted.len()
    }

    /// Moves `id` into trusted memory iff `policy` admits it. A rejected
    /// candidate stays in the candidate store.
    pub fn promote(
        &mut self,
        id: CandidateId,
        policy: &PromotionPolicy,
        tick: u64,
    ) -> Result<bool, GateError> {
        let c = self
            .candidates
            .get(&id)
            .ok_or(GateError::UnknownCandidate(id))?;
        if !policy.admits(c) {
            return Ok(false);
        }
        self.commit(id, tick);
        Ok(true)
    }

    /// Promotion with the gate switched off: any candidate is committed.
    pub fn promote_unchecked(&mut self, id: CandidateId, tick: u64) -> Result<(), GateError> {
        if !self.candidates.contains_key(&id) {
            return Err(GateError::UnknownCandidate(id));
        }
        self.commit(id, tick);
        Ok(())
    }

    fn commit(&mut self, id: CandidateId, tick: u64) {
        if let Some(candidate) = self.candidates.remove(&id) {
            self.promoted.insert(id);
            self.trusted.push(TrustedEntry {
                id,
                candidate,
                promoted_at: tick,
            });
        }
    }

    /// Typed view of trusted memory at `tick`. Expired entries are evicted
    /// here rather than on a timer.
    pub fn render_projection(&mut self, tick: u64) -> Vec<ProjectedEntry> {
        self.trusted
            .retain(|e| e.promoted_at.saturating_add(e.candidate.ttl) >= tick);
        self.rendered.extend(self.trusted.iter().map(|e| e.id));
        self.trusted
            .iter()
            .map(|e| ProjectedEntry {
                id: e.id,
                schema_kind: e.candidate.schema_kind,
                scope: e.candidate.scope,
                authority: e.candidate.authority,
                value: e.candidate.value,
            })
            .collect()
    }

    /// Raw facets of everything in trusted memory. Only reachable when the
    /// gate is disabled and memory is loaded verbatim.
    pub fn raw_facets(&self) -> PayloadFacets {
        self.trusted
            .iter()
            .fold(PayloadFacets::NONE, |acc, e| acc.union(e.candidate.facets))
    }

    /// Every id ever committed to trusted memory.
    pub fn promoted_ids(&self) -> &BTreeSet<CandidateId> {
        &self.promoted
    }

    /// Every id that has appeared in a rendered projection.
    pub fn rendered_ids(&self) -> &BTreeSet<CandidateId> {
        &self.rendered
    }

    pub fn trusted_schemas(&self) -> impl Iterator<Item = SchemaKind> + '_ {
        self.trusted.iter().map(|e| e.candidate.schema_kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Autoload, InjectionPosition, Scope};
    use crate::policy::Verdict;

    fn cand(
        schema_kind: SchemaKind,
        source: CandidateSource,
        scope: MemoryScope,
        authority: u32,
        ttl: u64,
    ) -> MemoryCandidate {
        MemoryCandidate {
            schema_kind,
            source,
            scope,
            authority,
            ttl,
            label: TaintLabel::Clean,
            facets: PayloadFacets::NONE,
            value: 7,
        }
    }

    #[test]
    fn promotion_examples() {
        let policy = PromotionPolicy::default();
        let mut gate = MemoryGate::new();
        let ok = gate.submit_candidate(cand(
            SchemaKind::TypedPreference,
            CandidateSource::UserDirect,
            MemoryScope::SelfSession,
            1,
            30,
        ));
        let free = gate.submit_candidate(cand(
            SchemaKind::FreeFormInstruction,
            CandidateSource::UserDirect,
            MemoryScope::SelfSession,
            0,
            1,
        ));
        let loud = gate.submit_candidate(cand(
            SchemaKind::TypedFact,
            CandidateSource::UserDirect,
            MemoryScope::SelfSession,
            3,
            30,
        ));
        assert_eq!(gate.promote(ok, &policy, 0), Ok(true));
        assert_eq!(gate.promote(free, &policy, 0), Ok(false));
        assert_eq!(gate.promote(loud, &policy, 0), Ok(false));
        assert_eq!(gate.trusted_count(), 1);
        assert_eq!(gate.candidate_count(), 2);
        assert_eq!(
            gate.promote(CandidateId(99), &policy, 0),
            Err(GateError::UnknownCandidate(CandidateId(99)))
        );
    }

    #[test]
    fn forbidden_schemas_rejected_by_policy() {
        for s in SchemaKind::ALL.iter().filter(|s| s.is_forbidden()) {
            assert_eq!(
                PromotionPolicy::new([*s], [], [], 0, 0),
                Err(GateError::ForbiddenSchema(*s))
            );
        }
        let toml = r#"
            allowed_schemas = ["TypedFact", "ToolPermission"]
            allowed_sources = []
            allowed_scopes = []
            a_max = 1
            t_max = 1
        "#;
        assert!(toml::from_str::<PromotionPolicy>(toml).is_err());
    }

    #[test]
    fn projection_shows_only_trusted() {
        let mut gate = MemoryGate::new();
        assert!(gate.render_projection(0).is_empty());
        let policy = PromotionPolicy::default();
        for i in 0..5 {
            let mut c = cand(
                SchemaKind::FreeFormInstruction,
                CandidateSource::AgentSummary,
                MemoryScope::SelfPersistent,
                0,
                1,
            );
            c.facets = PayloadFacets::ALL;
            c.value = i;
            gate.submit_candidate(c);
        }
        for _ in 0..2 {
            let id = gate.submit_candidate(cand(
                SchemaKind::TypedFact,
                CandidateSource::ToolOutput,
                MemoryScope::SelfSession,
                0,
                10,
            ));
            assert!(gate.promote(id, &policy, 0).unwrap());
        }
        let frag = gate.render_projection(1);
        assert_eq!(frag.len(), 2);
        assert!(frag.iter().all(|e| e.schema_kind == SchemaKind::TypedFact));
        assert!(gate.raw_facets().is_empty());
    }

    #[test]
    fn ttl_evicts_lazily() {
        let mut gate = MemoryGate::new();
        let id = gate.submit_candidate(cand(
            SchemaKind::TypedFact,
            CandidateSource::ToolOutput,
            MemoryScope::SelfSession,
            0,
            3,
        ));
        gate.promote(id, &PromotionPolicy::default(), 10).unwrap();
        assert_eq!(gate.trusted_count(), 1);
        assert_eq!(gate.render_projection(13).len(), 1);
        assert_eq!(gate.render_projection(14).len(), 0);
        assert_eq!(gate.trusted_count(), 0);
    }

    #[test]
    fn many_candidates_leave_projection_alone() {
        let mut gate = MemoryGate::new();
        let before = gate.render_projection(0);
        for i in 0..1000u64 {
            let schema = SchemaKind::ALL[(i % 9) as usize];
            gate.submit_candidate(cand(
                schema,
                CandidateSource::ExternalContent,
                MemoryScope::CrossAgent,
                (i % 5) as u32,
                i,
            ));
        }
        assert_eq!(gate.candidate_count(), 1000);
        assert_eq!(gate.render_projection(0), before);
    }

    #[test]
    fn lease_windows() {
        let c = Carrier::new(
            CarrierId(3),
            CarrierClass::TaskLocalState,
            InjectionPosition::UserPrompt,
            Autoload::Heartbeat,
            Scope::AgentLocal,
            TaintLabel::Clean,
        )
        .unwrap();
        let leases = [Lease::new(CarrierId(3), 3, 7).unwrap()];
        assert_eq!(check_lease_write(&c, 5, &leases).verdict, Verdict::Allow);
        assert_eq!(check_lease_write(&c, 3, &leases).verdict, Verdict::Allow);
        assert_eq!(check_lease_write(&c, 7, &leases).verdict, Verdict::Allow);
        let late = check_lease_write(&c, 8, &leases);
        assert_eq!(late.verdict, Verdict::Deny);
        assert_eq!(late.reason, Reason::LeaseExpired);
        assert_eq!(check_lease_write(&c, 5, &[]).verdict, Verdict::Deny);
        let other = [Lease::new(CarrierId(4), 0, 100).unwrap()];
        assert_eq!(check_lease_write(&c, 5, &other).verdict, Verdict::Deny);
        assert!(Lease::new(CarrierId(3), 8, 7).is_err());
    }
}
