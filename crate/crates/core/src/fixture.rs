//! The bundled English–French challenge set: 108 items, the outputs of
//! three systems, and each output's majority verdict.
//!
//! The published summary tables are transcribed separately below so that
//! reproduction compares scores computed from the verdicts against values
//! that were not derived from them.

use crate::format::{parse_challenge_set, parse_outputs, parse_records, FormatError};
use crate::model::{ChallengeSet, DivergenceCategory, SystemOutputSet};
use crate::scoring::{score_verdicts, ItemVerdict, ScoreReport, ScoringPolicy, VerdictMatrix};

pub const CHALLENGE_SET_JSON: &str = include_str!("../data/challenge_set.json");
pub const OUTPUTS_JSON: &str = include_str!("../data/outputs.json");
pub const VERDICTS_JSON: &str = include_str!("../data/verdicts.json");

/// Systems with published per-item verdicts, in table column order.
pub const SYSTEMS: [&str; 3] = ["PBMT-1", "NMT", "Google"];

pub fn challenge_set() -> ChallengeSet {
    parse_challenge_set(CHALLENGE_SET_JSON.as_bytes()).expect("bundled challenge set is valid")
}

pub fn outputs(set: &ChallengeSet) -> SystemOutputSet {
    parse_outputs(OUTPUTS_JSON.as_bytes(), set).expect("bundled outputs are valid").outputs
}

pub fn item_verdicts() -> Result<Vec<ItemVerdict>, FormatError> {
    parse_records(VERDICTS_JSON.as_bytes(), "verdicts")
}

pub fn verdicts() -> VerdictMatrix {
    item_verdicts().expect("bundled verdicts are valid").iter().collect()
}

pub fn system_order() -> Vec<String> {
    SYSTEMS.iter().map(|s| s.to_string()).collect()
}

/// One row of the published fine-grained table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PublishedRow {
    pub category: DivergenceCategory,
    pub subcategory: &'static str,
    pub items: usize,
    /// Percent for PBMT-1, NMT, Google.
    pub percent: [u32; 3],
}

const fn row(category: DivergenceCategory, subcategory: &'static str, items: usize, percent: [u32; 3]) -> PublishedRow {
    PublishedRow { category, subcategory, items, percent }
}

use DivergenceCategory::{LexicoSyntactic as Lex, MorphoSyntactic as Morph, Syntactic as Syn};

pub const PUBLISHED_FINE_GRAINED: [PublishedRow; 26] = [
    row(Morph, "Agreement across distractors", 3, [0, 100, 100]),
    row(Morph, "Agreement through control verbs", 4, [25, 25, 25]),
    row(Morph, "Agreement with coordinated target", 3, [0, 100, 100]),
    row(Morph, "Agreement with coordinated source", 12, [17, 92, 75]),
    row(Morph, "Agreement of past participles", 4, [25, 75, 75]),
    row(Morph, "Subjunctive mood", 3, [33, 33, 67]),
    row(Lex, "Argument switch", 3, [0, 0, 0]),
    row(Lex, "Double-object verbs", 3, [33, 67, 100]),
    row(Lex, "Fail-to", 3, [67, 100, 67]),
    row(Lex, "Manner-of-movement verbs", 4, [0, 0, 0]),
    row(Lex, "Overlapping subcat frames", 5, [60, 100, 100]),
    row(Lex, "NP-to-VP", 3, [33, 67, 67]),
    row(Lex, "Factitives", 3, [0, 33, 67]),
    row(Lex, "Noun compounds", 9, [67, 67, 78]),
    row(Lex, "Common idioms", 6, [50, 0, 33]),
    row(Lex, "Syntactically flexible idioms", 2, [0, 0, 0]),
    row(Syn, "Yes-no question syntax", 3, [33, 100, 100]),
    row(Syn, "Tag questions", 3, [0, 0, 100]),
    row(Syn, "Stranded preps", 6, [0, 0, 100]),
    row(Syn, "Adv-triggered inversion", 3, [0, 0, 33]),
    row(Syn, "Middle voice", 3, [0, 0, 0]),
    row(Syn, "Fronted should", 3, [67, 33, 33]),
    row(Syn, "Clitic pronouns", 5, [40, 80, 60]),
    row(Syn, "Ordinal placement", 3, [100, 100, 100]),
    row(Syn, "Inalienable possession", 6, [50, 17, 83]),
    row(Syn, "Zero REL PRO", 3, [0, 33, 100]),
];

/// Published judgment-level summary: PBMT-1, PBMT-2, NMT, Google, agreement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PublishedSummaryRow {
    /// `None` for the overall row.
    pub category: Option<DivergenceCategory>,
    pub pbmt1: u32,
    pub pbmt2: u32,
    pub nmt: u32,
    pub google: u32,
    pub agreement: u32,
}

impl PublishedSummaryRow {
    /// Percent for a system with published verdicts.
    pub fn percent_for(&self, system: &str) -> Option<u32> {
        match system {
            "PBMT-1" => Some(self.pbmt1),
            "PBMT-2" => Some(self.pbmt2),
            "NMT" => Some(self.nmt),
            "Google" => Some(self.google),
            _ => None,
        }
    }
}

pub const PUBLISHED_SUMMARY: [PublishedSummaryRow; 4] = [
    PublishedSummaryRow { category: Some(Morph), pbmt1: 16, pbmt2: 16, nmt: 72, google: 65, agreement: 94 },
    PublishedSummaryRow { category: Some(Lex), pbmt1: 42, pbmt2: 46, nmt: 52, google: 62, agreement: 94 },
    PublishedSummaryRow { category: Some(Syn), pbmt1: 33, pbmt2: 33, nmt: 40, google: 75, agreement: 81 },
    PublishedSummaryRow { category: None, pbmt1: 31, pbmt2: 32, nmt: 53, google: 68, agreement: 89 },
];

/// Corpus BLEU reported alongside the summary (PBMT-1, PBMT-2, NMT).
pub const PUBLISHED_BLEU: [(&str, &str); 3] = [("PBMT-1", "34.2"), ("PBMT-2", "36.5"), ("NMT", "36.9")];

/// One published fine-grained row next to its recomputed counterpart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowComparison {
    pub published: PublishedRow,
    /// Items found for the subcategory; 0 if it is absent.
    pub items: usize,
    /// Recomputed percent per system, `None` where no rate exists.
    pub percent: [Option<u32>; 3],
}

impl RowComparison {
    pub fn matches(&self) -> bool {
        self.items == self.published.items
            && self.percent.iter().zip(self.published.percent).all(|(got, want)| *got == Some(want))
    }
}

/// Compares subcategory scores against the published fine-grained table.
pub fn compare_fine_grained(report: &ScoreReport) -> Vec<RowComparison> {
    PUBLISHED_FINE_GRAINED
        .iter()
        .map(|published| {
            let found = report
                .subcategory(published.subcategory)
                .filter(|s| s.category == published.category);
            RowComparison {
                published: *published,
                items: found.map_or(0, |s| s.items),
                percent: SYSTEMS.map(|sys| found.and_then(|s| s.rates.get(sys)).and_then(|r| r.percent())),
            }
        })
        .collect()
}

/// Scores the bundled verdicts under the default policy.
pub fn bundled_report() -> ScoreReport {
    score_verdicts(&challenge_set(), &verdicts(), &system_order(), &ScoringPolicy::default())
        .expect("bundled verdicts cover the set")
}
