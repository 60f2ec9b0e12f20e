//! Read-after-tainted-write monitor.
//!
//! Static form: a per-carrier projection is safe iff it lies in `R↑* W*`,
//! i.e. no exposed read ever follows a write. Dynamic form: an exposed read
//! of a tainted carrier is denied while the reader still holds unattenuated
//! high-risk capabilities.

use crate::model::{Access, TaintLabel};
use crate::policy::{Decision, Layer, Reason};
use crate::taint::AgentDecisionState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RtwVerdict {
    /// Indices of the first write and the first exposed read after it.
    pub first_violation: Option<(usize, usize)>,
}

impl RtwVerdict {
    pub fn safe(&self) -> bool {
        self.first_violation.is_none()
    }
}

pub fn is_rtw_safe(projection: &[Access]) -> RtwVerdict {
    let mut first_write = None;
    for (i, access) in projection.iter().enumerate() {
        match (access, first_write) {
            (Access::Write, None) => first_write = Some(i),
            (Access::ExposedRead, Some(w)) => {
                return RtwVerdict {
                    first_violation: Some((w, i)),
                }
            }
            _ => {}
        }
    }
    RtwVerdict {
        first_violation: None,
    }
}

/// Dynamic rule for exposed re-entry.
///
/// Only `Tainted`/`TaintedDerived` content is refused. `External` content
/// with no attacker-derived write behind it is first-read contamination and
/// is left to capability attenuation.
pub fn enforce_exposed_read(carrier_label: TaintLabel, state: &AgentDecisionState) -> Decision {
    if carrier_label.is_tainted() && state.has_high_cap() {
        Decision::deny(Reason::RtwReEntry, Layer::Rtw)
    } else {
        Decision::allow(Layer::Rtw)
    }
}

/// Opaque reads hand back bounded certificates only, so they are always
/// allowed. The caller must not deliver any content facets.
pub fn enforce_opaque_read(_carrier_label: TaintLabel) -> Decision {
    Decision::allow(Layer::Rtw)
}
