//! Seeded random scenario generator for stress tests.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::agent::{AgentProfile, Compliance, ComplianceTable, Permissions, Privilege};
use super::framework::Framework;
use super::{ChannelSpec, Injection, Scenario};
use crate::memory::PromotionPolicy;
use crate::model::PayloadFacets;
use crate::policy::EnforcementConfig;

pub const MAX_AGENTS: usize = 6;
pub const MAX_CARRIERS_PER_AGENT: usize = 12;
pub const MAX_TICKS: u64 = 200;

fn compliance(rng: &mut ChaCha8Rng) -> Compliance {
    match rng.random_range(0..4) {
        0 => Compliance::NeverComply,
        1 => Compliance::SeededBernoulli(rng.random_range(0.1..0.9)),
        _ => Compliance::AlwaysComply,
    }
}

fn facets(rng: &mut ChaCha8Rng) -> PayloadFacets {
    loop {
        let f = PayloadFacets {
            persist: rng.random_bool(0.8),
            propagate: rng.random_bool(0.8),
            harm: rng.random_bool(0.7),
            verbatim: rng.random_bool(0.5),
        };
        if !f.is_empty() {
            return f;
        }
    }
}

/// Draws a valid scenario with at most [`MAX_AGENTS`] agents,
/// [`MAX_CARRIERS_PER_AGENT`] carriers per agent and [`MAX_TICKS`] ticks.
pub fn random_scenario(seed: u64, enforcement: EnforcementConfig) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_agents = rng.random_range(1..=MAX_AGENTS);
    let n_channels = rng.random_range(1..=4usize);
    let channels: Vec<ChannelSpec> = (0..n_channels)
        .map(|i| ChannelSpec {
            name: format!("ch{i}"),
            external: i > 0 && rng.random_bool(0.25),
            strength: rng.random_bool(0.2).then(|| rng.random_range(0..=4)),
        })
        .collect();
    let all: Vec<usize> = (0..n_channels).collect();

    let agents = (0..n_agents)
        .map(|i| {
            let framework = *[Framework::A, Framework::B, Framework::C]
                .choose(&mut rng)
                .expect("non-empty");
            let privilege = if rng.random_bool(0.4) {
                Privilege::High
            } else {
                Privilege::Low
            };
            let mut profile = AgentProfile::new(format!("agent{i}"), framework, privilege);
            profile.heartbeat_period = rng.random_range(1..=6);
            let k = rng.random_range(1..=n_channels.min(3));
            profile.channels = all.choose_multiple(&mut rng, k).copied().collect();
            profile.channels.sort_unstable();
            profile.permissions = *Permissions::ALL.choose(&mut rng).expect("non-empty");
            profile.session_reset = rng.random_bool(0.2);
            profile.workload = rng.random_bool(0.7);
            profile.compliance = ComplianceTable {
                system_prompt: compliance(&mut rng),
                user_prompt: compliance(&mut rng),
            };
            let fixed = framework.template(Some(0)).len() + profile.channels.len();
            let room = MAX_CARRIERS_PER_AGENT - fixed;
            profile.workspace_files = Some(rng.random_range(1..=room));
            if rng.random_bool(0.3) {
                let start = rng.random_range(0..20);
                profile.lease = Some((start, start + rng.random_range(0..40)));
            }
            profile
        })
        .collect();

    let max_ticks = rng.random_range(10..=MAX_TICKS);
    let injection = Injection {
        channel: rng.random_range(0..n_channels),
        tick: rng.random_range(0..=max_ticks / 4),
        facets: facets(&mut rng),
    };
    Scenario {
        id: format!("random-{seed}"),
        seed,
        max_ticks,
        transform_strength: if rng.random_bool(0.7) {
            0
        } else {
            rng.random_range(1..=4)
        },
        declassification: rng.random_bool(0.3),
        enforcement,
        promotion: PromotionPolicy::default(),
        agents,
        channels,
        injection,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Ecosystem;

    #[test]
    fn generated_scenarios_stay_in_bounds() {
        for seed in 0..200 {
            let s = random_scenario(seed, EnforcementConfig::all());
            s.validate().unwrap();
            assert!(s.agents.len() <= MAX_AGENTS);
            assert!(s.max_ticks <= MAX_TICKS);
            let eco = Ecosystem::new(s.clone()).unwrap();
            for i in 0..s.agents.len() {
                let own = eco.agent_carriers(crate::model::AgentId(i as u32)).len();
                assert!(own + s.agents[i].channels.len() <= MAX_CARRIERS_PER_AGENT);
            }
        }
    }

    #[test]
    fn same_seed_same_scenario() {
        let a = random_scenario(7, EnforcementConfig::none());
        let b = random_scenario(7, EnforcementConfig::none());
        assert_eq!(a, b);
    }
}
