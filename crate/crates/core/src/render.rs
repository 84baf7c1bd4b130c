//! Appendix-style markdown listing of a challenge set.

use std::fmt::Write as _;

use crate::model::{ChallengeSet, HighlightSpan, SystemOutputSet};
use crate::scoring::VerdictMatrix;

pub const BOLD: &str = "**";
pub const CHECK: &str = "✓";
pub const CROSS: &str = "✗";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error("verdict for ({system_id}, {item_id}) has no matching output")]
    UnknownVerdict { system_id: String, item_id: String },
    #[error("no verdict for output ({system_id}, {item_id})")]
    MissingVerdict { system_id: String, item_id: String },
}

/// Wraps each span of `text` in bold markers.
pub fn emphasize(text: &str, spans: &[HighlightSpan]) -> String {
    let mut out = String::with_capacity(text.len() + spans.len() * 4);
    let mut spans = spans.iter().peekable();
    let mut open = false;
    for (pos, ch) in text.chars().enumerate() {
        if open && spans.peek().is_some_and(|s| s.end == pos) {
            out.push_str(BOLD);
            open = false;
            spans.next();
        }
        if !open && spans.peek().is_some_and(|s| s.start == pos) {
            out.push_str(BOLD);
            open = true;
        }
        out.push(ch);
    }
    if open {
        out.push_str(BOLD);
    }
    out
}

pub fn render_formatted(
    set: &ChallengeSet,
    outputs: Option<&SystemOutputSet>,
    verdicts: Option<&VerdictMatrix>,
) -> Result<String, RenderError> {
    if let (Some(outs), Some(verdicts)) = (outputs, verdicts) {
        for v in verdicts.to_item_verdicts() {
            if outs.get(&v.system_id, &v.item_id).is_none() {
                return Err(RenderError::UnknownVerdict { system_id: v.system_id, item_id: v.item_id });
            }
        }
        for o in outs.iter() {
            if verdicts.get(&o.system_id, &o.item_id).is_none() {
                return Err(RenderError::MissingVerdict { system_id: o.system_id, item_id: o.item_id });
            }
        }
    }

    let mut doc = String::new();
    let _ = writeln!(
        doc,
        "# {} (version {}, {} → {})",
        set.name, set.version, set.source_language, set.target_language
    );
    let mut category = None;
    for sub in set.subcategories() {
        if category != Some(sub.category) {
            let _ = write!(doc, "\n## {}\n", sub.category.title());
            category = Some(sub.category);
        }
        let _ = write!(doc, "\n### {} ({} items)\n", sub.name, sub.item_ids.len());
        let mut question: Option<&str> = None;
        for id in &sub.item_ids {
            let item = set.item(id).expect("subcategory ids come from the set");
            if question != Some(item.question.as_str()) {
                let _ = write!(doc, "\n_{}_\n", item.question);
                question = Some(&item.question);
            }
            let _ = write!(doc, "\n#### {}\n\n", item.id);
            if let Some(note) = &item.notes {
                let _ = writeln!(doc, "> {note}\n");
            }
            let _ = writeln!(doc, "- Source: {}", emphasize(&item.source, &item.source_highlights));
            let _ = writeln!(doc, "- Ref: {}", emphasize(&item.reference, &item.reference_highlights));
            if let Some(outs) = outputs {
                for sys in outs.systems() {
                    let Some(text) = outs.get(sys, id) else { continue };
                    let mark = match verdicts.and_then(|v| v.get(sys, id)) {
                        Some(true) => format!(" {CHECK}"),
                        Some(false) => format!(" {CROSS}"),
                        None => String::new(),
                    };
                    let _ = writeln!(doc, "- {sys}: {text}{mark}");
                }
            }
        }
    }
    Ok(doc)
}
