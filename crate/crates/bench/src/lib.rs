//! Inputs shared by the criterion benchmarks under `benches/`.

use challenge_core::fixture;
use challenge_core::scoring::{Judgment, Verdict};

/// Three full panels over the bundled set that agree with the published
/// verdicts: 972 judgments.
pub fn bundled_panels() -> Vec<Judgment> {
    let set = fixture::challenge_set();
    let marks = fixture::verdicts();
    let mut out = Vec::with_capacity(972);
    for ann in ["a", "b", "c"] {
        for item in set.item_ids() {
            for sys in fixture::SYSTEMS {
                out.push(Judgment {
                    annotator_id: ann.into(),
                    item_id: item.into(),
                    system_id: sys.into(),
                    verdict: if marks.get(sys, item).unwrap_or(false) { Verdict::Yes } else { Verdict::No },
                    revision: 0,
                    timestamp: 0,
                });
            }
        }
    }
    out
}
