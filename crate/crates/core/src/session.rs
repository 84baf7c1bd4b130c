//! Blinded, per-annotator presentation plans.
//!
//! Every annotator sees every item. Item order is shuffled per annotator;
//! within each item the system outputs are shuffled again and labelled
//! `A`, `B`, `C`, ... in presentation order. The mapping back to system ids
//! lives in a separate [`BlindingKey`].

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::model::{ChallengeSet, SystemOutputSet};
use crate::rng::{annotator_seed, SplitMix64};
use crate::scoring::{Judgment, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("output matrix incomplete: {} missing pairs, first ({}, {})", .0.len(), .0[0].0, .0[0].1)]
    IncompleteMatrix(Vec<(String, String)>),
    #[error("duplicate annotator id `{0}`")]
    DuplicateAnnotator(String),
    #[error("no annotators")]
    NoAnnotators,
    #[error("no systems in output matrix")]
    NoSystems,
    #[error("unknown slot ({annotator_id}, {item_id}, {blind_label})")]
    UnknownSlot { annotator_id: String, item_id: String, blind_label: String },
    #[error("duplicate judgment for slot ({annotator_id}, {item_id}, {blind_label})")]
    DuplicateSlot { annotator_id: String, item_id: String, blind_label: String },
    #[error("no blinding entry maps ({annotator_id}, {item_id}) to system `{system_id}`")]
    UnknownSystem { annotator_id: String, item_id: String, system_id: String },
}

/// Label for the `index`-th output shown: A..Z, then AA, AB, ...
pub fn blind_label(index: usize) -> String {
    let mut n = index + 1;
    let mut out = Vec::new();
    while n > 0 {
        n -= 1;
        out.push(b'A' + (n % 26) as u8);
        n /= 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindOutput {
    pub blind_label: String,
    pub translation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionItem {
    pub item_id: String,
    pub blinded_outputs: Vec<BlindOutput>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSession {
    pub annotator_id: String,
    pub master_seed: u64,
    pub items: Vec<SessionItem>,
}

impl AnnotationSession {
    pub fn slot_count(&self) -> usize {
        self.items.iter().map(|i| i.blinded_outputs.len()).sum()
    }

    pub fn item(&self, item_id: &str) -> Option<&SessionItem> {
        self.items.iter().find(|i| i.item_id == item_id)
    }

    pub fn has_slot(&self, item_id: &str, label: &str) -> bool {
        self.item(item_id).is_some_and(|i| i.blinded_outputs.iter().any(|o| o.blind_label == label))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("session serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyEntry {
    pub annotator_id: String,
    pub item_id: String,
    pub blind_label: String,
    pub system_id: String,
}

/// `(annotator, item, label) -> system`. Sensitive: never shown to annotators.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "KeyDocument", into = "KeyDocument")]
pub struct BlindingKey {
    entries: BTreeMap<(String, String, String), String>,
}

#[derive(Serialize, Deserialize)]
struct KeyDocument {
    sensitive: bool,
    entries: Vec<KeyEntry>,
}

impl From<KeyDocument> for BlindingKey {
    fn from(doc: KeyDocument) -> Self {
        let entries = doc
            .entries
            .into_iter()
            .map(|e| ((e.annotator_id, e.item_id, e.blind_label), e.system_id))
            .collect();
        BlindingKey { entries }
    }
}

impl From<BlindingKey> for KeyDocument {
    fn from(key: BlindingKey) -> Self {
        KeyDocument { sensitive: true, entries: key.entries() }
    }
}

impl BlindingKey {
    pub fn system_for(&self, annotator_id: &str, item_id: &str, label: &str) -> Option<&str> {
        self.entries
            .get(&(annotator_id.to_string(), item_id.to_string(), label.to_string()))
            .map(String::as_str)
    }

    pub fn label_for(&self, annotator_id: &str, item_id: &str, system_id: &str) -> Option<&str> {
        let lo = (annotator_id.to_string(), item_id.to_string(), String::new());
        self.entries
            .range(lo..)
            .take_while(|((a, i, _), _)| a == annotator_id && i == item_id)
            .find(|(_, s)| s.as_str() == system_id)
            .map(|((_, _, l), _)| l.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> Vec<KeyEntry> {
        self.entries
            .iter()
            .map(|((a, i, l), s)| KeyEntry {
                annotator_id: a.clone(),
                item_id: i.clone(),
                blind_label: l.clone(),
                system_id: s.clone(),
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("key serializes");
        s.push('\n');
        s
    }
}

/// Builds one session per annotator plus the key that unblinds them all.
///
/// Base orders are the set's item order and the sorted system ids, so the
/// row order of the outputs document does not influence the plan.
pub fn build_sessions(
    set: &ChallengeSet,
    outputs: &SystemOutputSet,
    annotators: &[String],
    master_seed: u64,
) -> Result<(Vec<AnnotationSession>, BlindingKey), SessionError> {
    if outputs.systems().is_empty() {
        return Err(SessionError::NoSystems);
    }
    let missing = outputs.missing_pairs(set);
    if !missing.is_empty() {
        return Err(SessionError::IncompleteMatrix(missing));
    }
    if annotators.is_empty() {
        return Err(SessionError::NoAnnotators);
    }
    let mut seen = HashSet::new();
    for a in annotators {
        if !seen.insert(a.as_str()) {
            return Err(SessionError::DuplicateAnnotator(a.clone()));
        }
    }

    let mut systems: Vec<&str> = outputs.systems().iter().map(String::as_str).collect();
    systems.sort_unstable();

    let mut key = BlindingKey::default();
    let mut sessions = Vec::with_capacity(annotators.len());
    for annotator in annotators {
        let mut rng = SplitMix64::new(annotator_seed(master_seed, annotator));
        let mut order: Vec<&str> = set.item_ids().collect();
        rng.shuffle(&mut order);
        let items = order
            .into_iter()
            .map(|item_id| {
                let mut shown = systems.clone();
                rng.shuffle(&mut shown);
                let blinded_outputs = shown
                    .into_iter()
                    .enumerate()
                    .map(|(pos, sys)| {
                        let label = blind_label(pos);
                        key.entries.insert(
                            (annotator.clone(), item_id.to_string(), label.clone()),
                            sys.to_string(),
                        );
                        BlindOutput {
                            blind_label: label,
                            translation: outputs.get(sys, item_id).expect("matrix complete").to_string(),
                        }
                    })
                    .collect();
                SessionItem { item_id: item_id.to_string(), blinded_outputs }
            })
            .collect();
        sessions.push(AnnotationSession { annotator_id: annotator.clone(), master_seed, items });
    }
    Ok((sessions, key))
}

/// A verdict recorded against a blind label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindJudgment {
    pub annotator_id: String,
    pub item_id: String,
    pub blind_label: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub revision: u64,
    #[serde(default)]
    pub timestamp: u64,
}

pub fn unblind(blind: &[BlindJudgment], key: &BlindingKey) -> Result<Vec<Judgment>, SessionError> {
    let mut seen = HashSet::new();
    blind
        .iter()
        .map(|b| {
            let slot = (b.annotator_id.as_str(), b.item_id.as_str(), b.blind_label.as_str());
            if !seen.insert(slot) {
                return Err(SessionError::DuplicateSlot {
                    annotator_id: b.annotator_id.clone(),
                    item_id: b.item_id.clone(),
                    blind_label: b.blind_label.clone(),
                });
            }
            let system_id = key.system_for(&b.annotator_id, &b.item_id, &b.blind_label).ok_or_else(|| {
                SessionError::UnknownSlot {
                    annotator_id: b.annotator_id.clone(),
                    item_id: b.item_id.clone(),
                    blind_label: b.blind_label.clone(),
                }
            })?;
            Ok(Judgment {
                annotator_id: b.annotator_id.clone(),
                item_id: b.item_id.clone(),
                system_id: system_id.to_string(),
                verdict: b.verdict,
                revision: b.revision,
                timestamp: b.timestamp,
            })
        })
        .collect()
}

/// Inverse of [`unblind`]: replaces system ids by the annotator's labels.
pub fn blind(judgments: &[Judgment], key: &BlindingKey) -> Result<Vec<BlindJudgment>, SessionError> {
    judgments
        .iter()
        .map(|j| {
            let label = key.label_for(&j.annotator_id, &j.item_id, &j.system_id).ok_or_else(|| {
                SessionError::UnknownSystem {
                    annotator_id: j.annotator_id.clone(),
                    item_id: j.item_id.clone(),
                    system_id: j.system_id.clone(),
                }
            })?;
            Ok(BlindJudgment {
                annotator_id: j.annotator_id.clone(),
                item_id: j.item_id.clone(),
                blind_label: label.to_string(),
                verdict: j.verdict,
                revision: j.revision,
                timestamp: j.timestamp,
            })
        })
        .collect()
}
