use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reentry_core::config::{bundled, BUNDLED};
use reentry_core::model::{Access, AgentId, CarrierClass, EventKind, PayloadFacets, Trace};
use reentry_core::policy::{EnforcementConfig, Layer, MediationView};
use reentry_core::rtw::is_rtw_safe;
use reentry_core::sim::random::random_scenario;
use reentry_core::sim::{simulate, Ecosystem, Scenario};
use reentry_core::verify::{audit_rtw, find_chains, parse_log, LogEvent, Op, Outcome, ParsedTrace};

fn finish(s: Scenario) -> Ecosystem {
    let mut eco = Ecosystem::new(s).unwrap();
    while !eco.is_finished() {
        eco.step().unwrap();
    }
    eco
}

fn scenarios() -> Vec<Scenario> {
    let configs = [EnforcementConfig::none(), EnforcementConfig::all()];
    let mut out: Vec<Scenario> = (0..150).map(|seed| random_scenario(seed, configs[seed as usize % 2])).collect();
    for (name, _) in BUNDLED {
        for c in configs {
            let mut s = bundled(name).unwrap();
            s.enforcement = c;
            out.push(s);
        }
    }
    out
}

#[test]
fn rendered_memory_was_promoted() {
    for s in scenarios() {
        let n = s.agents.len();
        let eco = finish(s);
        for a in 0..n {
            let gate = eco.gate(AgentId(a as u32)).unwrap();
            assert!(gate.rendered_ids().is_subset(gate.promoted_ids()));
        }
    }
}

#[test]
fn task_local_writes_stay_inside_their_lease() {
    for s in scenarios() {
        let eco = finish(s);
        for e in eco.trace().events() {
            let EventKind::Write { carrier, .. } = e.kind else { continue };
            let class = eco.carriers()[carrier.0 as usize].class;
            if class == CarrierClass::TaskLocalState
                && e.took_effect()
                && eco.scenario().enforcement.memgate
            {
                assert!(eco.leases().iter().any(|l| l.covers(carrier, e.tick)), "{}", e.to_line());
            }
        }
    }
}

/// Carrier contents are exactly what allowed writes (and, with the gate
/// off, allowed promotions) put there.
#[test]
fn denied_events_have_no_effect() {
    for s in scenarios() {
        let memgate = s.enforcement.memgate;
        let eco = finish(s);
        let mut expected: BTreeMap<u32, PayloadFacets> = BTreeMap::new();
        for e in eco.trace().events().iter().filter(|e| e.took_effect()) {
            let (carrier, facets) = match e.kind {
                EventKind::Write { carrier, facets, .. } => (carrier, facets),
                EventKind::PromoteAttempt { target, facets, .. } if !memgate => (target, facets),
                _ => continue,
            };
            let f = expected.entry(carrier.0).or_default();
            *f = f.union(facets);
        }
        for c in eco.carriers() {
            if c.class == CarrierClass::ExternalSource {
                continue;
            }
            let want = expected.get(&c.id.0).copied().unwrap_or_default();
            assert_eq!(c.content, want, "carrier {} in {}", c.id, eco.scenario().id);
        }
    }
}

/// Contamination as seen in the log: an allowed exposed read of untrusted
/// content since the agent's last reset.
fn contaminated_writers_label_their_output(trace: &Trace) {
    let mut dirty = BTreeMap::new();
    for e in trace.events() {
        let reentry_core::model::Actor::Agent(a) = e.actor else { continue };
        match e.kind {
            EventKind::ContextReset => {
                dirty.insert(a, false);
            }
            EventKind::ExposedRead { label, .. } if e.took_effect() && label.is_untrusted() => {
                dirty.insert(a, true);
            }
            EventKind::Write { label, .. } | EventKind::PromoteAttempt { label, .. }
                if dirty.get(&a).copied().unwrap_or(false) =>
            {
                assert!(label.is_untrusted(), "{}", e.to_line());
            }
            _ => {}
        }
    }
}

#[test]
fn derived_taint_is_closed_under_writes() {
    for s in scenarios() {
        contaminated_writers_label_their_output(&simulate(&s).unwrap());
    }
}

#[test]
fn contaminated_agents_cannot_act_under_attenuation() {
    for seed in 0..150 {
        let trace = simulate(&random_scenario(seed, EnforcementConfig::all())).unwrap();
        let mut dirty = BTreeMap::new();
        for e in trace.events() {
            let reentry_core::model::Actor::Agent(a) = e.actor else { continue };
            match e.kind {
                EventKind::ContextReset => {
                    dirty.insert(a, false);
                }
                EventKind::ExposedRead { label, .. } if e.took_effect() && label.is_untrusted() => {
                    dirty.insert(a, true);
                }
                EventKind::HighRiskAction(_) if dirty.get(&a).copied().unwrap_or(false) => {
                    assert!(!e.took_effect(), "seed {seed}: {}", e.to_line());
                }
                _ => {}
            }
        }
    }
}

#[test]
fn no_attacker_activity_after_the_injection() {
    for s in scenarios() {
        let trace = simulate(&s).unwrap();
        let attacker = trace
            .events()
            .iter()
            .filter(|e| e.actor == reentry_core::model::Actor::Attacker)
            .count();
        assert_eq!(attacker, 1);
    }
}

#[test]
fn adding_a_layer_never_adds_witnesses() {
    for (name, _) in BUNDLED {
        for bits in 0u8..16 {
            let mut cfg = EnforcementConfig::none();
            for (i, l) in Layer::DEFENSES.iter().enumerate() {
                cfg = cfg.with(*l, bits >> i & 1 == 1);
            }
            let mut s = bundled(name).unwrap();
            s.enforcement = cfg;
            let count = |s: &Scenario| {
                let log = simulate(s).unwrap().to_log();
                find_chains(&parse_log(&log).unwrap()).len()
            };
            let here = count(&s);
            for l in Layer::DEFENSES {
                if !cfg.enabled(l) {
                    let mut more = s.clone();
                    more.enforcement = cfg.with(l, true);
                    assert!(count(&more) <= here, "{name}: {} + {l}", cfg.layers_token());
                }
            }
        }
    }
}

fn fuzz_event(rng: &mut ChaCha8Rng) -> LogEvent {
    let carrier = format!("f{}", rng.random_range(0..3));
    let outcome = if rng.random_bool(0.8) { Outcome::Allow } else { Outcome::Deny };
    let label = ["clean", "external", "tainted", "tainted-derived"][rng.random_range(0..4)];
    let op = match rng.random_range(0..5) {
        0 | 1 => Op::Write,
        2 => Op::Promote,
        3 => Op::Read,
        _ => Op::ReadAttenuated,
    };
    LogEvent {
        line: 0,
        tick: 0,
        agent: Some(rng.random_range(0..2)),
        op,
        target: Some(carrier),
        label: Some(label.to_string()),
        outcome: Some(outcome),
        layer: Some("rtw".to_string()),
        reason: None,
        facets: rng.random_range(0..16),
    }
}

/// Per-carrier projection: untrusted effective writes are `W`, effective
/// high-capability reads are `R`.
fn projection(events: &[LogEvent], carrier: &str) -> Vec<Access> {
    events
        .iter()
        .filter(|e| e.target.as_deref() == Some(carrier) && e.took_effect())
        .filter_map(|e| match e.op {
            Op::Write | Op::Promote if e.untrusted() => Some(Access::Write),
            Op::Read => Some(Access::ExposedRead),
            _ => None,
        })
        .collect()
}

#[test]
fn audit_agrees_with_the_monitor_on_fuzzed_traces() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut unsafe_traces = 0;
    for _ in 0..10_000 {
        let len = rng.random_range(0..12);
        let trace = ParsedTrace {
            scenario_id: "fuzz".into(),
            events: (0..len).map(|_| fuzz_event(&mut rng)).collect(),
        };
        let per_carrier = ["f0", "f1", "f2"]
            .iter()
            .all(|c| is_rtw_safe(&projection(&trace.events, c)).safe());
        assert_eq!(audit_rtw(&trace), per_carrier, "{:?}", trace.events);
        unsafe_traces += usize::from(!per_carrier);
    }
    assert!(unsafe_traces > 1000);
}

#[test]
fn enforced_bundled_traces_pass_the_audit() {
    for (name, _) in BUNDLED {
        let mut s = bundled(name).unwrap();
        s.enforcement = EnforcementConfig::all();
        let log = simulate(&s).unwrap().to_log();
        assert!(audit_rtw(&parse_log(&log).unwrap()), "{name}");
        s.enforcement = EnforcementConfig::none();
        let log = simulate(&s).unwrap().to_log();
        assert!(!audit_rtw(&parse_log(&log).unwrap()), "{name}");
    }
}
