//! Authoring lints: source vocabulary frequency and sentence length.
//!
//! Tokenizer: lowercase the text, split on whitespace, strip any leading
//! and trailing characters that are not alphanumeric. Apostrophes and
//! hyphens inside a token are kept, so `It's` becomes `it's`.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::ChallengeSet;

pub const DEFAULT_MIN_COUNT: u64 = 100;
pub const DEFAULT_MAX_TOKENS: usize = 15;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LintError {
    #[error("empty frequency input")]
    Empty,
    #[error("line {line}: malformed count `{value}`")]
    MalformedCount { line: usize, value: String },
    #[error("line {line}: expected `token<TAB>count`")]
    MalformedLine { line: usize },
    #[error("frequency input is not valid UTF-8")]
    Encoding,
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| {
            raw.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyInput {
    /// `token<TAB>count` lines.
    Table,
    /// Raw text, tokenized and counted.
    Corpus,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: HashMap<String, u64>,
    total: u64,
}

impl FrequencyTable {
    pub fn lookup(&self, token: &str) -> u64 {
        self.counts.get(&token.to_lowercase()).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&mut self, token: &str, count: u64) {
        *self.counts.entry(token.to_lowercase()).or_insert(0) += count;
        self.total += count;
    }
}

impl<S: AsRef<str>> FromIterator<(S, u64)> for FrequencyTable {
    fn from_iter<I: IntoIterator<Item = (S, u64)>>(iter: I) -> Self {
        let mut table = FrequencyTable::default();
        for (tok, n) in iter {
            table.add(tok.as_ref(), n);
        }
        table
    }
}

pub fn load_frequency_table(bytes: &[u8], mode: FrequencyInput) -> Result<FrequencyTable, LintError> {
    let text = std::str::from_utf8(bytes).map_err(|_| LintError::Encoding)?;
    if text.trim().is_empty() {
        return Err(LintError::Empty);
    }
    let mut table = FrequencyTable::default();
    match mode {
        FrequencyInput::Corpus => {
            for tok in tokenize(text) {
                table.add(&tok, 1);
            }
        }
        FrequencyInput::Table => {
            for (idx, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let (token, count) = line
                    .split_once('\t')
                    .ok_or(LintError::MalformedLine { line: idx + 1 })?;
                let count = count.trim().parse::<u64>().map_err(|_| LintError::MalformedCount {
                    line: idx + 1,
                    value: count.trim().to_string(),
                })?;
                table.add(token.trim(), count);
            }
        }
    }
    if table.distinct() == 0 {
        return Err(LintError::Empty);
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingKind {
    RareToken,
    NonceToken,
    LongSentence,
}

impl FindingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingKind::RareToken => "rare-token",
            FindingKind::NonceToken => "nonce-token",
            FindingKind::LongSentence => "long-sentence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintFinding {
    pub item_id: String,
    pub kind: FindingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
    /// Token position in the tokenized source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    pub detail: String,
}

impl fmt::Display for LintFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let subject = match (&self.token, self.length) {
            (Some(t), _) => t.clone(),
            (None, Some(n)) => n.to_string(),
            _ => String::new(),
        };
        write!(f, "{}\t{}\t{}\t{}", self.item_id, self.kind.as_str(), subject, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintReport {
    pub findings: Vec<LintFinding>,
}

impl LintReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.findings.len()
    }

    /// Merges two reports keeping `(item set order, position)` ordering.
    pub fn merge(mut self, other: LintReport, set: &ChallengeSet) -> LintReport {
        self.findings.extend(other.findings);
        let order: HashMap<&str, usize> = set.item_ids().enumerate().map(|(i, id)| (id, i)).collect();
        self.findings.sort_by_key(|f| {
            (
                order.get(f.item_id.as_str()).copied().unwrap_or(usize::MAX),
                f.position.unwrap_or(usize::MAX),
                f.kind,
            )
        });
        self
    }

    /// One finding per line, tab separated.
    pub fn to_text(&self) -> String {
        self.findings.iter().map(|f| format!("{f}\n")).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("lint report serializes")
    }
}

/// Flags source tokens whose corpus count is below `min_count`.
///
/// A token with count zero is a nonce token regardless of `min_count`.
/// Each distinct token is reported once per item, at its first position.
pub fn lint_vocabulary(
    set: &ChallengeSet,
    freq: &FrequencyTable,
    min_count: u64,
    exceptions: &[String],
) -> LintReport {
    let exceptions: HashSet<String> = exceptions.iter().map(|e| e.to_lowercase()).collect();
    let mut findings = Vec::new();
    for item in &set.items {
        let mut seen = HashSet::new();
        for (pos, tok) in tokenize(&item.source).into_iter().enumerate() {
            if exceptions.contains(&tok) || !seen.insert(tok.clone()) {
                continue;
            }
            let count = freq.lookup(&tok);
            let kind = if count == 0 {
                FindingKind::NonceToken
            } else if count < min_count {
                FindingKind::RareToken
            } else {
                continue;
            };
            let detail = match kind {
                FindingKind::NonceToken => "0 occurrences in training corpus".to_string(),
                _ => format!("{count} occurrences, below {min_count}"),
            };
            findings.push(LintFinding {
                item_id: item.id.clone(),
                kind,
                token: Some(tok),
                position: Some(pos),
                count: Some(count),
                length: None,
                detail,
            });
        }
    }
    LintReport { findings }
}

pub fn lint_length(set: &ChallengeSet, max_tokens: usize) -> LintReport {
    let findings = set
        .items
        .iter()
        .filter_map(|item| {
            let n = tokenize(&item.source).len();
            (n > max_tokens).then(|| LintFinding {
                item_id: item.id.clone(),
                kind: FindingKind::LongSentence,
                token: None,
                position: None,
                count: None,
                length: Some(n),
                detail: format!("{n} tokens, above {max_tokens}"),
            })
        })
        .collect();
    LintReport { findings }
}
