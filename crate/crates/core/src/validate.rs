//! Structural validation of challenge sets.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lint::{lint_length, DEFAULT_MAX_TOKENS};
use crate::model::{check_spans, is_valid_item_id, ChallengeSet, DivergenceCategory};

/// Subcategories with fewer items than this get a warning.
pub const MIN_ITEMS_PER_SUBCATEGORY: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_id: Option<String>,
    /// Field path inside the item, e.g. `reference_highlights[1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
}

impl Issue {
    pub fn set(message: impl Into<String>) -> Self {
        Issue { item_id: None, field: None, message: message.into() }
    }

    pub fn item(item_id: &str, field: &str, message: impl Into<String>) -> Self {
        Issue {
            item_id: Some(item_id.to_string()),
            field: Some(field.to_string()),
            message: message.into(),
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.item_id, &self.field) {
            (Some(id), Some(field)) => write!(f, "{id}.{field}: {}", self.message),
            (Some(id), None) => write!(f, "{id}: {}", self.message),
            (None, Some(field)) => write!(f, "{field}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
    pub items: usize,
    pub subcategories: usize,
    pub category_counts: BTreeMap<DivergenceCategory, usize>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn summary(&self) -> String {
        format!(
            "{} items, {} subcategories, {} errors, {} warnings",
            self.items,
            self.subcategories,
            self.errors.len(),
            self.warnings.len()
        )
    }
}

pub fn validate_challenge_set(set: &ChallengeSet) -> ValidationReport {
    validate_with_length_limit(set, DEFAULT_MAX_TOKENS)
}

pub fn validate_with_length_limit(set: &ChallengeSet, max_tokens: usize) -> ValidationReport {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();

    if set.items.is_empty() {
        errors.push(Issue::set("empty challenge set"));
    }

    let mut seen = HashSet::new();
    for item in &set.items {
        let id = item.id.as_str();
        if !is_valid_item_id(id) {
            errors.push(Issue::item(id, "id", format!("malformed id `{id}`")));
        }
        if !seen.insert(id) {
            errors.push(Issue::item(id, "id", format!("duplicate id `{id}`")));
        }
        for (field, value) in [
            ("subcategory", &item.subcategory),
            ("question", &item.question),
            ("source", &item.source),
            ("reference", &item.reference),
        ] {
            if value.trim().is_empty() {
                errors.push(Issue::item(id, field, "must not be empty"));
            }
        }
        if let Err(e) = check_spans(&item.source_highlights, &item.source) {
            errors.push(Issue::item(id, "source_highlights", e));
        }
        if item.reference_highlights.is_empty() {
            errors.push(Issue::item(id, "reference_highlights", "missing divergence locus"));
        } else if let Err(e) = check_spans(&item.reference_highlights, &item.reference) {
            errors.push(Issue::item(id, "reference_highlights", e));
        }
    }

    let mut declared: HashMap<&str, DivergenceCategory> = HashMap::new();
    for item in &set.items {
        let first = *declared.entry(item.subcategory.as_str()).or_insert(item.category);
        if first != item.category {
            errors.push(Issue::item(
                &item.id,
                "category",
                format!(
                    "subcategory `{}` already declared as {first}, item says {}",
                    item.subcategory, item.category
                ),
            ));
        }
    }

    let subcategories = set.subcategories();
    for sub in &subcategories {
        if sub.item_ids.len() < MIN_ITEMS_PER_SUBCATEGORY {
            warnings.push(Issue::set(format!(
                "subcategory `{}` has {} items (fewer than {MIN_ITEMS_PER_SUBCATEGORY})",
                sub.name,
                sub.item_ids.len()
            )));
        }
    }
    for finding in lint_length(set, max_tokens).findings {
        warnings.push(Issue::item(&finding.item_id, "source", finding.detail));
    }

    ValidationReport {
        errors,
        warnings,
        items: set.items.len(),
        subcategories: subcategories.len(),
        category_counts: set.category_counts(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChallengeItem, HighlightSpan};

    fn item(id: &str, sub: &str, cat: DivergenceCategory) -> ChallengeItem {
        ChallengeItem {
            id: id.into(),
            category: cat,
            subcategory: sub.into(),
            question: "Correct?".into(),
            source: "He gave it to the man.".into(),
            source_highlights: vec![HighlightSpan::new(8, 10)],
            reference: "Il le donna à l'homme.".into(),
            reference_highlights: vec![HighlightSpan::new(3, 5)],
            notes: None,
        }
    }

    fn set(items: Vec<ChallengeItem>) -> ChallengeSet {
        ChallengeSet {
            name: "t".into(),
            version: "1".into(),
            source_language: "en".into(),
            target_language: "fr".into(),
            items,
        }
    }

    #[test]
    fn empty_set_is_an_error() {
        let report = validate_challenge_set(&set(vec![]));
        assert_eq!(report.errors, vec![Issue::set("empty challenge set")]);
    }

    #[test]
    fn small_subcategory_only_warns() {
        let c = DivergenceCategory::Syntactic;
        let report = validate_challenge_set(&set(vec![item("S1a", "Clitics", c), item("S1b", "Clitics", c)]));
        assert!(report.is_valid());
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].message.contains("`Clitics` has 2 items"));
    }

    #[test]
    fn hard_errors() {
        let c = DivergenceCategory::Syntactic;
        let mut no_locus = item("S2a", "X", c);
        no_locus.reference_highlights.clear();
        let mut bad_span = item("S2b", "X", c);
        bad_span.source_highlights = vec![HighlightSpan::new(0, 500)];
        let mut wrong_cat = item("S2c", "X", DivergenceCategory::MorphoSyntactic);
        wrong_cat.question = " ".into();
        let report = validate_challenge_set(&set(vec![
            item("S1a", "X", c),
            item("S1a", "X", c),
            item("bad", "X", c),
            no_locus,
            bad_span,
            wrong_cat,
        ]));
        let rendered: Vec<String> = report.errors.iter().map(ToString::to_string).collect();
        assert!(rendered.contains(&"S1a.id: duplicate id `S1a`".to_string()), "{rendered:?}");
        assert!(rendered.contains(&"bad.id: malformed id `bad`".to_string()));
        assert!(rendered.contains(&"S2a.reference_highlights: missing divergence locus".to_string()));
        assert!(rendered.iter().any(|r| r.starts_with("S2b.source_highlights: span 0")));
        assert!(rendered.contains(&"S2c.question: must not be empty".to_string()));
        assert!(rendered.iter().any(|r| r.starts_with("S2c.category: subcategory `X`")));
    }

    #[test]
    fn validation_is_pure() {
        let c = DivergenceCategory::LexicoSyntactic;
        let s = set(vec![item("S1a", "A", c), item("S1b", "A", c)]);
        assert_eq!(validate_challenge_set(&s), validate_challenge_set(&s));
    }
}
