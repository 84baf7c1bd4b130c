//! Challenge-set data model.
//!
//! All types here are plain values. Invariants are checked by
//! [`crate::validate::validate_challenge_set`], which the parsers in
//! [`crate::format`] run before handing a set back to the caller.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The three structural divergence families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivergenceCategory {
    MorphoSyntactic,
    LexicoSyntactic,
    Syntactic,
}

impl DivergenceCategory {
    pub const ALL: [DivergenceCategory; 3] = [
        DivergenceCategory::MorphoSyntactic,
        DivergenceCategory::LexicoSyntactic,
        DivergenceCategory::Syntactic,
    ];

    /// Machine name used in documents (`morpho-syntactic`, ...).
    pub fn as_str(self) -> &'static str {
        match self {
            DivergenceCategory::MorphoSyntactic => "morpho-syntactic",
            DivergenceCategory::LexicoSyntactic => "lexico-syntactic",
            DivergenceCategory::Syntactic => "syntactic",
        }
    }

    /// Display name used in rendered tables.
    pub fn title(self) -> &'static str {
        match self {
            DivergenceCategory::MorphoSyntactic => "Morpho-syntactic",
            DivergenceCategory::LexicoSyntactic => "Lexico-syntactic",
            DivergenceCategory::Syntactic => "Syntactic",
        }
    }
}

impl fmt::Display for DivergenceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DivergenceCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DivergenceCategory::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s) || c.title().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown divergence category `{s}`"))
    }
}

/// Half-open span `[start, end)` in Unicode scalar values of its host string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HighlightSpan {
    pub start: usize,
    pub end: usize,
}

impl HighlightSpan {
    pub fn new(start: usize, end: usize) -> Self {
        HighlightSpan { start, end }
    }

    /// Slice the span out of `host`, or `None` when it does not fit.
    pub fn slice<'a>(&self, host: &'a str) -> Option<&'a str> {
        if self.start >= self.end {
            return None;
        }
        let begin = char_to_byte(host, self.start)?;
        let end = char_to_byte(host, self.end)?;
        Some(&host[begin..end])
    }
}

fn char_to_byte(host: &str, chars: usize) -> Option<usize> {
    if chars == 0 {
        return Some(0);
    }
    match host.char_indices().nth(chars) {
        Some((b, _)) => Some(b),
        None if host.chars().count() == chars => Some(host.len()),
        None => None,
    }
}

/// Checks the span list against `host`; returns a description of the first problem.
pub fn check_spans(spans: &[HighlightSpan], host: &str) -> Result<(), String> {
    let len = host.chars().count();
    let mut prev_end = 0usize;
    for (i, span) in spans.iter().enumerate() {
        if span.start >= span.end {
            return Err(format!("span {i} [{}, {}) is empty or inverted", span.start, span.end));
        }
        if span.end > len {
            return Err(format!(
                "span {i} [{}, {}) exceeds string length {len}",
                span.start, span.end
            ));
        }
        if i > 0 && span.start < prev_end {
            return Err(format!(
                "span {i} [{}, {}) overlaps or precedes the previous span",
                span.start, span.end
            ));
        }
        prev_end = span.end;
    }
    Ok(())
}

/// True if `id` matches `S<digits><lowercase letter><optional digit>`.
pub fn is_valid_item_id(id: &str) -> bool {
    let bytes = id.as_bytes();
    let Some(rest) = bytes.strip_prefix(b"S") else {
        return false;
    };
    let digits = rest.iter().take_while(|b| b.is_ascii_digit()).count();
    if digits == 0 {
        return false;
    }
    match &rest[digits..] {
        [l] => l.is_ascii_lowercase(),
        [l, d] => l.is_ascii_lowercase() && d.is_ascii_digit(),
        _ => false,
    }
}

/// One probe sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeItem {
    pub id: String,
    pub category: DivergenceCategory,
    pub subcategory: String,
    pub question: String,
    pub source: String,
    #[serde(default)]
    pub source_highlights: Vec<HighlightSpan>,
    pub reference: String,
    pub reference_highlights: Vec<HighlightSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

impl ChallengeItem {
    pub fn highlighted_source(&self) -> Vec<&str> {
        self.source_highlights.iter().filter_map(|s| s.slice(&self.source)).collect()
    }

    pub fn highlighted_reference(&self) -> Vec<&str> {
        self.reference_highlights.iter().filter_map(|s| s.slice(&self.reference)).collect()
    }
}

/// A named, versioned, ordered list of items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeSet {
    pub name: String,
    pub version: String,
    pub source_language: String,
    pub target_language: String,
    pub items: Vec<ChallengeItem>,
}

/// A subcategory with the ids of its items, in set order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subcategory<'a> {
    pub name: &'a str,
    pub category: DivergenceCategory,
    pub item_ids: Vec<&'a str>,
}

impl ChallengeSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, id: &str) -> Option<&ChallengeItem> {
        self.items.iter().find(|it| it.id == id)
    }

    pub fn item_ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|it| it.id.as_str())
    }

    /// Subcategories in order of first appearance. The category is the one
    /// declared by the first item; consistency is a validation concern.
    pub fn subcategories(&self) -> Vec<Subcategory<'_>> {
        let mut out: Vec<Subcategory<'_>> = Vec::new();
        for it in &self.items {
            match out.iter_mut().find(|s| s.name == it.subcategory) {
                Some(s) => s.item_ids.push(&it.id),
                None => out.push(Subcategory {
                    name: &it.subcategory,
                    category: it.category,
                    item_ids: vec![&it.id],
                }),
            }
        }
        out
    }

    /// Categories in order of first appearance.
    pub fn categories(&self) -> Vec<DivergenceCategory> {
        let mut out = Vec::new();
        for it in &self.items {
            if !out.contains(&it.category) {
                out.push(it.category);
            }
        }
        out
    }

    pub fn category_counts(&self) -> BTreeMap<DivergenceCategory, usize> {
        let mut counts = BTreeMap::new();
        for it in &self.items {
            *counts.entry(it.category).or_insert(0) += 1;
        }
        counts
    }
}

/// One candidate translation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemOutput {
    pub system_id: String,
    pub item_id: String,
    pub translation: String,
}

/// Candidate translations indexed by `(system_id, item_id)`.
///
/// Systems keep their order of first appearance in the source document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SystemOutputSet {
    systems: Vec<String>,
    by_pair: BTreeMap<(String, String), String>,
}

impl SystemOutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an output. Returns `false` (and leaves the set untouched)
    /// when the pair is already present.
    pub fn insert(&mut self, output: SystemOutput) -> bool {
        let key = (output.system_id, output.item_id);
        if self.by_pair.contains_key(&key) {
            return false;
        }
        if !self.systems.contains(&key.0) {
            self.systems.push(key.0.clone());
        }
        self.by_pair.insert(key, output.translation);
        true
    }

    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    pub fn len(&self) -> usize {
        self.by_pair.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_pair.is_empty()
    }

    pub fn get(&self, system_id: &str, item_id: &str) -> Option<&str> {
        self.by_pair
            .get(&(system_id.to_string(), item_id.to_string()))
            .map(String::as_str)
    }

    /// Outputs in `(system order, item id)` order.
    pub fn iter(&self) -> impl Iterator<Item = SystemOutput> + '_ {
        self.systems.iter().flat_map(move |sys| {
            self.by_pair
                .range((sys.clone(), String::new())..)
                .take_while(move |((s, _), _)| s == sys)
                .map(|((s, i), t)| SystemOutput {
                    system_id: s.clone(),
                    item_id: i.clone(),
                    translation: t.clone(),
                })
        })
    }

    /// `(system, item)` pairs absent from the matrix, in system then set order.
    pub fn missing_pairs(&self, set: &ChallengeSet) -> Vec<(String, String)> {
        let mut missing = Vec::new();
        for sys in &self.systems {
            for id in set.item_ids() {
                if !self.by_pair.contains_key(&(sys.clone(), id.to_string())) {
                    missing.push((sys.clone(), id.to_string()));
                }
            }
        }
        missing
    }

    pub fn is_complete(&self, set: &ChallengeSet) -> bool {
        !self.systems.is_empty() && self.missing_pairs(set).is_empty()
    }

    pub fn item_ids(&self) -> BTreeSet<&str> {
        self.by_pair.keys().map(|(_, i)| i.as_str()).collect()
    }
}

impl FromIterator<SystemOutput> for SystemOutputSet {
    fn from_iter<I: IntoIterator<Item = SystemOutput>>(iter: I) -> Self {
        let mut set = SystemOutputSet::new();
        for o in iter {
            set.insert(o);
        }
        set
    }
}
