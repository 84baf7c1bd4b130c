//! JSON document formats.
//!
//! Challenge set (`challenge-set/1`):
//!
//! ```json
//! {
//!   "schema": "challenge-set/1",
//!   "name": "...", "version": "...",
//!   "source_language": "en", "target_language": "fr",
//!   "items": [{
//!     "id": "S1a", "category": "morpho-syntactic",
//!     "subcategory": "Agreement across distractors",
//!     "question": "...", "source": "...",
//!     "source_highlights": [{"start": 35, "end": 41}],
//!     "reference": "...", "reference_highlights": [{"start": 30, "end": 38}],
//!     "notes": "optional"
//!   }]
//! }
//! ```
//!
//! Highlight offsets count Unicode scalar values. System outputs
//! (`system-outputs/1`) are `{"outputs": [{system_id, item_id, translation}]}`
//! or a bare array of the same records.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{ChallengeItem, ChallengeSet, SystemOutput, SystemOutputSet};
use crate::validate::{validate_challenge_set, Issue};

pub const CHALLENGE_SET_SCHEMA: &str = "challenge-set/1";
pub const OUTPUTS_SCHEMA: &str = "system-outputs/1";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("unsupported schema `{found}`, expected `{expected}`")]
    Schema { found: String, expected: &'static str },
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error("invalid challenge set: {}", join_issues(.0))]
    Invalid(Vec<Issue>),
    #[error("outputs[{index}]: unknown item id `{item_id}` (system `{system_id}`)")]
    UnknownItem { index: usize, system_id: String, item_id: String },
    #[error("outputs[{index}]: duplicate output for ({system_id}, {item_id})")]
    DuplicatePair { index: usize, system_id: String, item_id: String },
}

fn join_issues(issues: &[Issue]) -> String {
    issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Serialize)]
struct SetDocument<'a> {
    schema: &'static str,
    name: &'a str,
    version: &'a str,
    source_language: &'a str,
    target_language: &'a str,
    items: &'a [ChallengeItem],
}

fn field_error(path: impl Into<String>, e: impl ToString) -> FormatError {
    FormatError::Field { path: path.into(), message: e.to_string() }
}

fn take<T: DeserializeOwned>(obj: &mut serde_json::Map<String, Value>, key: &str) -> Result<T, FormatError> {
    let value = obj
        .remove(key)
        .ok_or_else(|| field_error(key, format!("missing required field `{key}`")))?;
    serde_json::from_value(value).map_err(|e| field_error(key, e))
}

fn check_schema(obj: &serde_json::Map<String, Value>, expected: &'static str) -> Result<(), FormatError> {
    match obj.get("schema") {
        None => Ok(()),
        Some(Value::String(s)) if s == expected => Ok(()),
        Some(other) => Err(FormatError::Schema {
            found: other.as_str().map(str::to_string).unwrap_or_else(|| other.to_string()),
            expected,
        }),
    }
}

/// Parses and validates a challenge-set document.
pub fn parse_challenge_set(bytes: &[u8]) -> Result<ChallengeSet, FormatError> {
    let set = read_challenge_set(bytes)?;
    let report = validate_challenge_set(&set);
    if !report.errors.is_empty() {
        return Err(FormatError::Invalid(report.errors));
    }
    Ok(set)
}

/// Parses a challenge-set document without validating its content.
pub fn read_challenge_set(bytes: &[u8]) -> Result<ChallengeSet, FormatError> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| FormatError::Malformed(e.to_string()))?;
    let Value::Object(mut obj) = doc else {
        return Err(FormatError::Malformed("top level must be an object".into()));
    };
    check_schema(&obj, CHALLENGE_SET_SCHEMA)?;
    let name = take(&mut obj, "name")?;
    let version = take(&mut obj, "version")?;
    let source_language = take(&mut obj, "source_language")?;
    let target_language = take(&mut obj, "target_language")?;
    let raw_items: Vec<Value> = take(&mut obj, "items")?;

    let mut items = Vec::with_capacity(raw_items.len());
    for (index, raw) in raw_items.into_iter().enumerate() {
        let id = raw.get("id").and_then(Value::as_str).map(str::to_string);
        let item: ChallengeItem = serde_json::from_value(raw).map_err(|e| {
            let path = match &id {
                Some(id) => format!("items[{index}] ({id})"),
                None => format!("items[{index}]"),
            };
            field_error(path, e)
        })?;
        items.push(item);
    }

    Ok(ChallengeSet { name, version, source_language, target_language, items })
}

pub fn challenge_set_to_json(set: &ChallengeSet) -> String {
    let doc = SetDocument {
        schema: CHALLENGE_SET_SCHEMA,
        name: &set.name,
        version: &set.version,
        source_language: &set.source_language,
        target_language: &set.target_language,
        items: &set.items,
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("challenge set serializes");
    out.push('\n');
    out
}

/// Result of [`parse_outputs`]: the matrix plus the `(system, item)` pairs it lacks.
#[derive(Debug, Clone)]
pub struct ParsedOutputs {
    pub outputs: SystemOutputSet,
    pub missing: Vec<(String, String)>,
}

impl ParsedOutputs {
    pub fn warnings(&self) -> Vec<String> {
        self.missing
            .iter()
            .map(|(s, i)| format!("missing output for ({s}, {i})"))
            .collect()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RecordList<T> {
    Bare(Vec<T>),
    Wrapped(serde_json::Map<String, Value>),
}

fn records<T: DeserializeOwned>(bytes: &[u8], key: &str, schema: &'static str) -> Result<Vec<T>, FormatError> {
    let list: RecordList<Value> =
        serde_json::from_slice(bytes).map_err(|e| FormatError::Malformed(e.to_string()))?;
    let raw = match list {
        RecordList::Bare(v) => v,
        RecordList::Wrapped(mut obj) => {
            check_schema(&obj, schema)?;
            take::<Vec<Value>>(&mut obj, key)?
        }
    };
    raw.into_iter()
        .enumerate()
        .map(|(i, v)| serde_json::from_value(v).map_err(|e| field_error(format!("{key}[{i}]"), e)))
        .collect()
}

pub fn parse_outputs(bytes: &[u8], set: &ChallengeSet) -> Result<ParsedOutputs, FormatError> {
    let rows: Vec<SystemOutput> = records(bytes, "outputs", OUTPUTS_SCHEMA)?;
    let mut outputs = SystemOutputSet::new();
    for (index, row) in rows.into_iter().enumerate() {
        if set.item(&row.item_id).is_none() {
            return Err(FormatError::UnknownItem { index, system_id: row.system_id, item_id: row.item_id });
        }
        let (system_id, item_id) = (row.system_id.clone(), row.item_id.clone());
        if !outputs.insert(row) {
            return Err(FormatError::DuplicatePair { index, system_id, item_id });
        }
    }
    let missing = outputs.missing_pairs(set);
    Ok(ParsedOutputs { outputs, missing })
}

pub fn outputs_to_json(outputs: &SystemOutputSet) -> String {
    #[derive(Serialize)]
    struct Doc {
        schema: &'static str,
        outputs: Vec<SystemOutput>,
    }
    let mut out = serde_json::to_string_pretty(&Doc { schema: OUTPUTS_SCHEMA, outputs: outputs.iter().collect() })
        .expect("outputs serialize");
    out.push('\n');
    out
}

/// Parses a list of records stored either bare or under `key`.
pub fn parse_records<T: DeserializeOwned>(bytes: &[u8], key: &str) -> Result<Vec<T>, FormatError> {
    let list: RecordList<Value> =
        serde_json::from_slice(bytes).map_err(|e| FormatError::Malformed(e.to_string()))?;
    let raw = match list {
        RecordList::Bare(v) => v,
        RecordList::Wrapped(mut obj) => take::<Vec<Value>>(&mut obj, key)?,
    };
    raw.into_iter()
        .enumerate()
        .map(|(i, v)| serde_json::from_value(v).map_err(|e| field_error(format!("{key}[{i}]"), e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_ITEM: &str = r#"{
      "schema": "challenge-set/1",
      "name": "toy", "version": "1", "source_language": "en", "target_language": "fr",
      "items": [{
        "id": "S1a", "category": "syntactic", "subcategory": "Clitic pronouns",
        "question": "Are the pronouns right?",
        "source": "He gave it to the man.", "source_highlights": [{"start": 8, "end": 10}],
        "reference": "Il le donna à l'homme.", "reference_highlights": [{"start": 3, "end": 5}]
      }]
    }"#;

    #[test]
    fn parses_minimal_document() {
        let set = parse_challenge_set(ONE_ITEM.as_bytes()).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.items[0].highlighted_reference(), ["le"]);
        assert_eq!(set.items[0].highlighted_source(), ["it"]);
        let again = parse_challenge_set(challenge_set_to_json(&set).as_bytes()).unwrap();
        assert_eq!(set, again);
    }

    #[test]
    fn duplicate_ids_are_named() {
        let doc: Value = serde_json::from_str(ONE_ITEM).unwrap();
        let mut doc = doc;
        let item = doc["items"][0].clone();
        doc["items"].as_array_mut().unwrap().push(item);
        let err = parse_challenge_set(doc.to_string().as_bytes()).unwrap_err();
        assert!(err.to_string().contains("duplicate id `S1a`"), "{err}");
    }

    #[test]
    fn empty_locus_rejected() {
        let text = ONE_ITEM.replace(r#""reference_highlights": [{"start": 3, "end": 5}]"#, r#""reference_highlights": []"#);
        let err = parse_challenge_set(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("S1a.reference_highlights: missing divergence locus"), "{err}");
    }

    #[test]
    fn missing_field_reports_path() {
        let text = ONE_ITEM.replace(r#""question": "Are the pronouns right?","#, "");
        let err = parse_challenge_set(text.as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("items[0] (S1a)") && msg.contains("question"), "{msg}");
        let err = parse_challenge_set(br#"{"name": "x"}"#).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn malformed_and_span_errors() {
        assert!(matches!(parse_challenge_set(b"{not json"), Err(FormatError::Malformed(_))));
        let text = ONE_ITEM.replace(r#"{"start": 3, "end": 5}"#, r#"{"start": 3, "end": 50}"#);
        let err = parse_challenge_set(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("S1a.reference_highlights"), "{err}");
        let text = ONE_ITEM.replace("challenge-set/1", "challenge-set/9");
        assert!(matches!(parse_challenge_set(text.as_bytes()), Err(FormatError::Schema { .. })));
    }

    #[test]
    fn outputs_unknown_item_and_duplicates() {
        let set = parse_challenge_set(ONE_ITEM.as_bytes()).unwrap();
        let err = parse_outputs(br#"[{"system_id": "A", "item_id": "S99z", "translation": "x"}]"#, &set).unwrap_err();
        assert!(matches!(err, FormatError::UnknownItem { ref item_id, .. } if item_id == "S99z"));
        let err = parse_outputs(
            br#"{"outputs": [{"system_id": "A", "item_id": "S1a", "translation": "x"},
                             {"system_id": "A", "item_id": "S1a", "translation": "y"}]}"#,
            &set,
        )
        .unwrap_err();
        assert!(matches!(err, FormatError::DuplicatePair { index: 1, .. }));
    }
}
