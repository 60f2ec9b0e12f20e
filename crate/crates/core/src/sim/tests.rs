use super::*;
use crate::config::bundled;
use crate::model::AgentId;

fn fw_a(enforcement: EnforcementConfig) -> Scenario {
    let mut s = bundled("fwA").unwrap();
    s.enforcement = enforcement;
    s
}

#[test]
fn heartbeats_fire_when_the_period_divides_the_tick() {
    let mut s = fw_a(EnforcementConfig::none());
    s.agents.truncate(1);
    s.max_ticks = 4;
    let trace = simulate(&s).unwrap();
    let ticks: Vec<u64> = trace
        .events()
        .iter()
        .filter(|e| e.kind == EventKind::HeartbeatTick)
        .map(|e| e.tick)
        .collect();
    assert_eq!(ticks, vec![2, 4]);
}

#[test]
fn undefended_chain_reaches_the_high_agent() {
    let (_, report) = run_scenario(&fw_a(EnforcementConfig::none())).unwrap();
    assert_eq!(report.hop_ticks, vec![(0, 1), (1, 3), (2, 5)]);
    assert!(report.privilege_escalation);
    assert!(!report.chains.is_empty());
}

#[test]
fn enforced_run_has_no_effective_payload_write() {
    let s = fw_a(EnforcementConfig::all());
    let mut eco = Ecosystem::new(s).unwrap();
    while !eco.is_finished() {
        eco.step().unwrap();
    }
    for c in eco.carriers() {
        if c.class != CarrierClass::ExternalSource {
            assert!(c.content.is_empty(), "{:?}", c);
        }
    }
    let gate = eco.gate(AgentId(0)).unwrap();
    assert!(gate.rendered_ids().is_subset(gate.promoted_ids()));
    assert!(gate.raw_facets().is_empty());
}

#[test]
fn denied_events_leave_no_mark() {
    let trace = simulate(&fw_a(EnforcementConfig::all())).unwrap();
    let denied: Vec<&Event> = trace.events().iter().filter(|e| !e.took_effect()).collect();
    assert!(!denied.is_empty());
    for e in trace.events() {
        if e.kind.is_effectful() {
            assert!(e.decision.is_some());
        }
    }
}

#[test]
fn unknown_channel_is_a_scenario_error() {
    let mut s = fw_a(EnforcementConfig::none());
    s.agents[0].channels.push(9);
    assert!(matches!(
        Ecosystem::new(s),
        Err(SimError::Scenario(ScenarioError::UnknownChannel { channel: 9, .. }))
    ));
}

#[test]
fn session_reset_clears_contamination_each_heartbeat() {
    let mut s = fw_a(EnforcementConfig::all());
    s.agents[0].session_reset = true;
    let trace = simulate(&s).unwrap();
    let resets = trace
        .events()
        .iter()
        .filter(|e| e.kind == EventKind::ContextReset)
        .count();
    assert!(resets > 0);
    let report = verify::verify_log(&trace.to_log()).unwrap();
    assert!(report.chains.is_empty());
}

#[test]
fn declassification_refuses_payload_carriers() {
    let mut s = fw_a(EnforcementConfig::none());
    s.declassification = true;
    let trace = simulate(&s).unwrap();
    let refused = trace.events().iter().any(|e| {
        matches!(e.kind, EventKind::Declassify { .. })
            && e.decision.map(|d| d.reason) == Some(Reason::DeclassRefused)
    });
    assert!(refused);
}
