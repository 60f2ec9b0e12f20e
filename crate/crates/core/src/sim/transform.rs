//! Per-hop payload degradation. Summarization, paraphrase and compression
//! only ever strip facets, in a fixed order.

use crate::model::PayloadFacets;

/// Strength at which every facet, `persist` included, is gone.
pub const MAX_STRENGTH: u8 = 4;

/// Clears the first `strength` facets of verbatim, harm, propagate, persist.
pub fn transform_payload(facets: PayloadFacets, strength: u8) -> PayloadFacets {
    let k = strength.min(MAX_STRENGTH);
    facets.retain(PayloadFacets {
        verbatim: k < 1,
        harm: k < 2,
        propagate: k < 3,
        persist: k < 4,
    })
}
