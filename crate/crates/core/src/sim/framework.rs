//! Carrier templates. Frameworks differ only in which carriers exist and
//! where they enter the model context; the event vocabulary is shared.

use serde::{Deserialize, Serialize};

use crate::model::{Autoload, CarrierClass, InjectionPosition, Scope};
use crate::token::token_enum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Framework {
    A,
    B,
    C,
}

token_enum!(Framework, "framework" {
    A => "A",
    B => "B",
    C => "C",
});

/// What a carrier is for inside one agent's workspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CarrierRole {
    Identity,
    Memory,
    Heartbeat,
    TaskState,
    ChannelLog,
    Workspace,
    Candidates,
    /// Landing point for messages on the agent's `n`-th channel.
    Inbox(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CarrierSlot {
    pub role: CarrierRole,
    pub class: CarrierClass,
    pub position: InjectionPosition,
    pub autoload: Autoload,
    pub scope: Scope,
}

const fn slot(
    role: CarrierRole,
    class: CarrierClass,
    position: InjectionPosition,
    autoload: Autoload,
) -> CarrierSlot {
    CarrierSlot {
        role,
        class,
        position,
        autoload,
        scope: Scope::AgentLocal,
    }
}

use CarrierClass as K;
use CarrierRole as R;
use InjectionPosition::{NotInjected, SystemPrompt, UserPrompt};

const IDENTITY: CarrierSlot = slot(R::Identity, K::StaticConfig, SystemPrompt, Autoload::SessionStart);
const HEARTBEAT: CarrierSlot = slot(R::Heartbeat, K::WorkspaceFile, UserPrompt, Autoload::Heartbeat);
const TASK_STATE: CarrierSlot = slot(R::TaskState, K::TaskLocalState, UserPrompt, Autoload::Heartbeat);
const WORKSPACE: CarrierSlot = slot(R::Workspace, K::WorkspaceFile, UserPrompt, Autoload::OnDemand);
const CANDIDATES: CarrierSlot = slot(R::Candidates, K::CandidateMemory, NotInjected, Autoload::Never);

impl Framework {
    pub fn default_workspace_files(self) -> usize {
        match self {
            Framework::A | Framework::B => 7,
            Framework::C => 4,
        }
    }

    /// Carriers in rank order: for each role, earlier slots rank higher.
    /// Inboxes are added per channel by the simulator.
    pub fn template(self, workspace_files: Option<usize>) -> Vec<CarrierSlot> {
        let files = workspace_files.unwrap_or(self.default_workspace_files());
        let mut slots = match self {
            Framework::A => vec![
                IDENTITY,
                slot(R::Memory, K::TrustedMemory, SystemPrompt, Autoload::SessionStart),
                HEARTBEAT,
                TASK_STATE,
            ],
            Framework::B => vec![
                IDENTITY,
                slot(R::Memory, K::TrustedMemory, SystemPrompt, Autoload::SessionStart),
                HEARTBEAT,
                TASK_STATE,
                CarrierSlot {
                    scope: Scope::SharedCrossAgent,
                    ..slot(R::ChannelLog, K::SharedChannelLog, UserPrompt, Autoload::OnDemand)
                },
            ],
            Framework::C => vec![
                IDENTITY,
                HEARTBEAT,
                TASK_STATE,
                slot(R::Memory, K::TrustedMemory, UserPrompt, Autoload::Heartbeat),
            ],
        };
        slots.extend(std::iter::repeat_n(WORKSPACE, files));
        slots.push(CANDIDATES);
        slots
    }
}

/// Persistent carriers that reach the model context, split by position:
/// `(system prompt, user prompt)`.
pub fn injectable_counts(slots: &[CarrierSlot]) -> (usize, usize) {
    let persistent = slots
        .iter()
        .filter(|s| !matches!(s.class, K::CandidateMemory | K::ExternalSource));
    persistent.fold((0, 0), |(sys, usr), s| match s.position {
        SystemPrompt => (sys + 1, usr),
        UserPrompt => (sys, usr + 1),
        NotInjected => (sys, usr),
    })
}

pub fn inbox_slot(channel_index: usize) -> CarrierSlot {
    slot(R::Inbox(channel_index), K::ExternalSource, UserPrompt, Autoload::OnDemand)
}
