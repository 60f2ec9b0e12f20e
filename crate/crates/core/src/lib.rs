//! Temporal re-entry defenses for autonomous agents, a deterministic
//! multi-agent worm simulator, and an offline trace verifier.
//!
//! The runtime mediates every write, exposed read, high-risk action and
//! memory promotion through [`policy::mediate`]. Four layers can be toggled
//! independently: sealed configuration, the read-after-tainted-write
//! monitor, the memory promotion gate with task-local leases, and
//! capability attenuation after contamination.

pub mod config;
pub mod memory;
pub mod model;
pub mod policy;
pub mod report;
pub mod rtw;
pub mod sim;
pub mod taint;
mod token;
pub mod verify;

pub use token::ParseTokenError;
