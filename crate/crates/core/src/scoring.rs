//! Aggregation of panel judgments and the derived success rates.
//!
//! Two aggregation levels are reported:
//!
//! * item level: each `(item, system)` panel collapses to a single
//!   bridged / not-bridged flag by strict majority of the full panel, and a
//!   rate is bridged items over items;
//! * judgment level: every individual Yes counts, and a rate is Yes
//!   judgments over all counted judgments.
//!
//! Not-applicable verdicts are handled by [`ScoringPolicy`]; by default they
//! are non-positive at item level and excluded at judgment level.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{ChallengeSet, DivergenceCategory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Yes,
    No,
    NotApplicable,
}

impl Verdict {
    pub const ALL: [Verdict; 3] = [Verdict::Yes, Verdict::No, Verdict::NotApplicable];

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
            Verdict::NotApplicable => "not-applicable",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid verdict `{0}`; allowed values: yes, no, not-applicable")]
pub struct InvalidVerdict(pub String);

impl FromStr for Verdict {
    type Err = InvalidVerdict;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Verdict::ALL
            .into_iter()
            .find(|v| v.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| InvalidVerdict(s.to_string()))
    }
}

/// One annotator's verdict on one system's output for one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub annotator_id: String,
    pub item_id: String,
    pub system_id: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub revision: u64,
    /// Milliseconds since the Unix epoch; 0 when unknown.
    #[serde(default)]
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoringError {
    #[error("incomplete panel for ({item_id}, {system_id}): {found} of {expected} judgments")]
    IncompletePanel { item_id: String, system_id: String, found: usize, expected: usize },
    #[error("conflicting judgments for ({annotator_id}, {item_id}, {system_id}) at revision {revision}")]
    ConflictingRevision { annotator_id: String, item_id: String, system_id: String, revision: u64 },
    #[error("no verdict for ({system_id}, {item_id})")]
    MissingPair { system_id: String, item_id: String },
    #[error("verdict for unknown item `{0}`")]
    UnknownItem(String),
    #[error("panel size must be positive")]
    EmptyPanel,
    #[error("no systems to score")]
    NoSystems,
}

/// How not-applicable verdicts enter the majority rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItemNaPolicy {
    /// Counted as a non-positive vote; bridged iff `2 * yes > panel`.
    #[default]
    NonPositive,
    /// Dropped from the panel; bridged iff `2 * yes > yes + no`.
    Abstain,
}

/// How not-applicable verdicts enter judgment-level rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JudgmentNaPolicy {
    /// Removed from numerator and denominator.
    #[default]
    Exclude,
    /// Counted in the denominator as a failed judgment.
    CountAsNegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringPolicy {
    pub panel_size: usize,
    pub item_na: ItemNaPolicy,
    pub judgment_na: JudgmentNaPolicy,
}

impl Default for ScoringPolicy {
    fn default() -> Self {
        ScoringPolicy { panel_size: 3, item_na: ItemNaPolicy::default(), judgment_na: JudgmentNaPolicy::default() }
    }
}

impl ScoringPolicy {
    pub fn with_panel(panel_size: usize) -> Self {
        ScoringPolicy { panel_size, ..Default::default() }
    }

    /// Human-readable statement of the N/A handling, for report headers.
    pub fn describe(&self) -> String {
        let item = match self.item_na {
            ItemNaPolicy::NonPositive => "N/A counts as non-positive at item level",
            ItemNaPolicy::Abstain => "N/A abstains at item level",
        };
        let judgment = match self.judgment_na {
            JudgmentNaPolicy::Exclude => "N/A excluded at judgment level",
            JudgmentNaPolicy::CountAsNegative => "N/A counts as negative at judgment level",
        };
        format!("panel of {}; {item}; {judgment}", self.panel_size)
    }
}

/// Exact success rate `numerator / denominator`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Rate {
    pub numerator: u64,
    pub denominator: u64,
}

impl Rate {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        Rate { numerator, denominator }
    }

    pub fn fraction(&self) -> Option<f64> {
        (self.denominator > 0).then(|| self.numerator as f64 / self.denominator as f64)
    }

    /// Integer percent, rounding halves up. `None` for an empty denominator.
    pub fn percent(&self) -> Option<u32> {
        (self.denominator > 0)
            .then(|| ((200 * self.numerator + self.denominator) / (2 * self.denominator)) as u32)
    }

    fn add(&mut self, hit: bool) {
        self.denominator += 1;
        if hit {
            self.numerator += 1;
        }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

/// Keeps the highest revision per `(annotator, item, system)`.
///
/// Output is sorted by `(item, system, annotator)`.
pub fn effective_judgments(judgments: &[Judgment]) -> Result<Vec<Judgment>, ScoringError> {
    let mut best: BTreeMap<(&str, &str, &str), &Judgment> = BTreeMap::new();
    for j in judgments {
        let key = (j.item_id.as_str(), j.system_id.as_str(), j.annotator_id.as_str());
        match best.get(&key) {
            Some(prev) if prev.revision > j.revision => {}
            Some(prev) if prev.revision == j.revision => {
                if prev.verdict != j.verdict {
                    return Err(ScoringError::ConflictingRevision {
                        annotator_id: j.annotator_id.clone(),
                        item_id: j.item_id.clone(),
                        system_id: j.system_id.clone(),
                        revision: j.revision,
                    });
                }
            }
            _ => {
                best.insert(key, j);
            }
        }
    }
    Ok(best.into_values().cloned().collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregatedVerdict {
    pub item_id: String,
    pub system_id: String,
    pub yes_count: usize,
    pub no_count: usize,
    pub na_count: usize,
    pub panel_size: usize,
    pub bridged: bool,
}

impl AggregatedVerdict {
    pub fn unanimous(&self) -> bool {
        [self.yes_count, self.no_count, self.na_count].contains(&self.panel_size)
    }
}

/// Strict-majority rule.
pub fn is_bridged(yes: usize, no: usize, na: usize, policy: ItemNaPolicy) -> bool {
    match policy {
        ItemNaPolicy::NonPositive => 2 * yes > yes + no + na,
        ItemNaPolicy::Abstain => 2 * yes > yes + no,
    }
}

/// Collapses panels into bridged flags under the default N/A policy.
pub fn aggregate(judgments: &[Judgment], panel_size: usize) -> Result<Vec<AggregatedVerdict>, ScoringError> {
    aggregate_with(judgments, &ScoringPolicy::with_panel(panel_size))
}

pub fn aggregate_with(judgments: &[Judgment], policy: &ScoringPolicy) -> Result<Vec<AggregatedVerdict>, ScoringError> {
    if policy.panel_size == 0 {
        return Err(ScoringError::EmptyPanel);
    }
    let effective = effective_judgments(judgments)?;
    let mut panels: BTreeMap<(&str, &str), [usize; 3]> = BTreeMap::new();
    for j in &effective {
        let counts = panels.entry((j.item_id.as_str(), j.system_id.as_str())).or_default();
        counts[j.verdict as usize] += 1;
    }
    panels
        .into_iter()
        .map(|((item, system), [yes, no, na])| {
            let found = yes + no + na;
            if found != policy.panel_size {
                return Err(ScoringError::IncompletePanel {
                    item_id: item.to_string(),
                    system_id: system.to_string(),
                    found,
                    expected: policy.panel_size,
                });
            }
            Ok(AggregatedVerdict {
                item_id: item.to_string(),
                system_id: system.to_string(),
                yes_count: yes,
                no_count: no,
                na_count: na,
                panel_size: policy.panel_size,
                bridged: is_bridged(yes, no, na, policy.item_na),
            })
        })
        .collect()
}

/// `(annotator, item, system)` triples with no effective judgment.
pub fn missing_judgments(
    judgments: &[Judgment],
    set: &ChallengeSet,
    systems: &[String],
    annotators: &[String],
) -> Vec<(String, String, String)> {
    let present: BTreeSet<(&str, &str, &str)> = judgments
        .iter()
        .map(|j| (j.annotator_id.as_str(), j.item_id.as_str(), j.system_id.as_str()))
        .collect();
    let mut missing = Vec::new();
    for item in set.item_ids() {
        for sys in systems {
            for ann in annotators {
                if !present.contains(&(ann.as_str(), item, sys.as_str())) {
                    missing.push((ann.clone(), item.to_string(), sys.clone()));
                }
            }
        }
    }
    missing
}

/// Item-level outcome for a `(system, item)` pair without panel detail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemVerdict {
    pub system_id: String,
    pub item_id: String,
    pub bridged: bool,
}

/// Bridged flags keyed by `(system, item)`; systems keep first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerdictMatrix {
    systems: Vec<String>,
    cells: BTreeMap<(String, String), bool>,
}

impl VerdictMatrix {
    pub fn insert(&mut self, system_id: &str, item_id: &str, bridged: bool) {
        if !self.systems.iter().any(|s| s == system_id) {
            self.systems.push(system_id.to_string());
        }
        self.cells.insert((system_id.to_string(), item_id.to_string()), bridged);
    }

    pub fn get(&self, system_id: &str, item_id: &str) -> Option<bool> {
        self.cells.get(&(system_id.to_string(), item_id.to_string())).copied()
    }

    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn to_item_verdicts(&self) -> Vec<ItemVerdict> {
        self.cells
            .iter()
            .map(|((s, i), &b)| ItemVerdict { system_id: s.clone(), item_id: i.clone(), bridged: b })
            .collect()
    }

    /// Checks that every system covers every item of `set` and nothing else.
    pub fn check_against(&self, set: &ChallengeSet) -> Result<(), ScoringError> {
        if self.systems.is_empty() {
            return Err(ScoringError::NoSystems);
        }
        for (_, item) in self.cells.keys() {
            if set.item(item).is_none() {
                return Err(ScoringError::UnknownItem(item.clone()));
            }
        }
        for sys in &self.systems {
            for item in set.item_ids() {
                if self.get(sys, item).is_none() {
                    return Err(ScoringError::MissingPair { system_id: sys.clone(), item_id: item.to_string() });
                }
            }
        }
        Ok(())
    }
}

impl<'a> FromIterator<&'a AggregatedVerdict> for VerdictMatrix {
    fn from_iter<I: IntoIterator<Item = &'a AggregatedVerdict>>(iter: I) -> Self {
        let mut m = VerdictMatrix::default();
        for v in iter {
            m.insert(&v.system_id, &v.item_id, v.bridged);
        }
        m
    }
}

impl<'a> FromIterator<&'a ItemVerdict> for VerdictMatrix {
    fn from_iter<I: IntoIterator<Item = &'a ItemVerdict>>(iter: I) -> Self {
        let mut m = VerdictMatrix::default();
        for v in iter {
            m.insert(&v.system_id, &v.item_id, v.bridged);
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubcategoryScore {
    pub category: DivergenceCategory,
    pub subcategory: String,
    pub items: usize,
    pub rates: BTreeMap<String, Rate>,
}

/// Item-level rate per `(subcategory, system)`, subcategories in set order.
pub fn subcategory_scores(matrix: &VerdictMatrix, set: &ChallengeSet) -> Result<Vec<SubcategoryScore>, ScoringError> {
    matrix.check_against(set)?;
    Ok(set
        .subcategories()
        .into_iter()
        .map(|sub| {
            let rates = matrix
                .systems()
                .iter()
                .map(|sys| {
                    let mut rate = Rate::default();
                    for id in &sub.item_ids {
                        rate.add(matrix.get(sys, id).unwrap_or(false));
                    }
                    (sys.clone(), rate)
                })
                .collect();
            SubcategoryScore {
                category: sub.category,
                subcategory: sub.name.to_string(),
                items: sub.item_ids.len(),
                rates,
            }
        })
        .collect())
}

/// Per-category and overall rates for each system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRates {
    pub categories: BTreeMap<DivergenceCategory, BTreeMap<String, Rate>>,
    pub overall: BTreeMap<String, Rate>,
}

pub fn category_scores_item_level(matrix: &VerdictMatrix, set: &ChallengeSet) -> Result<CategoryRates, ScoringError> {
    matrix.check_against(set)?;
    let mut categories: BTreeMap<DivergenceCategory, BTreeMap<String, Rate>> = BTreeMap::new();
    let mut overall: BTreeMap<String, Rate> = BTreeMap::new();
    for sys in matrix.systems() {
        for item in &set.items {
            let hit = matrix.get(sys, &item.id).unwrap_or(false);
            categories.entry(item.category).or_default().entry(sys.clone()).or_default().add(hit);
            overall.entry(sys.clone()).or_default().add(hit);
        }
    }
    Ok(CategoryRates { categories, overall })
}

/// Verdicts per `(item_id, system_id)`.
type Panels = BTreeMap<(String, String), Vec<Verdict>>;

/// Effective judgments grouped per `(item, system)` panel, after checking
/// that every pair of `set` x judged systems carries a full panel.
fn complete_panels(
    judgments: &[Judgment],
    set: &ChallengeSet,
    policy: &ScoringPolicy,
) -> Result<(Vec<String>, Panels), ScoringError> {
    if policy.panel_size == 0 {
        return Err(ScoringError::EmptyPanel);
    }
    let effective = effective_judgments(judgments)?;
    let mut systems: Vec<String> = Vec::new();
    for j in judgments {
        if !systems.contains(&j.system_id) {
            systems.push(j.system_id.clone());
        }
    }
    if systems.is_empty() {
        return Err(ScoringError::NoSystems);
    }
    let mut panels = Panels::new();
    for j in effective {
        if set.item(&j.item_id).is_none() {
            return Err(ScoringError::UnknownItem(j.item_id));
        }
        panels.entry((j.item_id, j.system_id)).or_default().push(j.verdict);
    }
    for item in set.item_ids() {
        for sys in &systems {
            let found = panels.get(&(item.to_string(), sys.clone())).map_or(0, Vec::len);
            if found == 0 {
                return Err(ScoringError::MissingPair { system_id: sys.clone(), item_id: item.to_string() });
            }
            if found != policy.panel_size {
                return Err(ScoringError::IncompletePanel {
                    item_id: item.to_string(),
                    system_id: sys.clone(),
                    found,
                    expected: policy.panel_size,
                });
            }
        }
    }
    Ok((systems, panels))
}

/// Judgment-level rates: Yes judgments over counted judgments.
pub fn judgment_level_scores(
    judgments: &[Judgment],
    set: &ChallengeSet,
    policy: &ScoringPolicy,
) -> Result<CategoryRates, ScoringError> {
    let (_, panels) = complete_panels(judgments, set, policy)?;
    let mut categories: BTreeMap<DivergenceCategory, BTreeMap<String, Rate>> = BTreeMap::new();
    let mut overall: BTreeMap<String, Rate> = BTreeMap::new();
    for ((item_id, sys), verdicts) in &panels {
        let category = set.item(item_id).expect("checked above").category;
        let cat_rate = categories.entry(category).or_default().entry(sys.clone()).or_default();
        let all_rate = overall.entry(sys.clone()).or_default();
        for v in verdicts {
            let counted = match (v, policy.judgment_na) {
                (Verdict::NotApplicable, JudgmentNaPolicy::Exclude) => None,
                (v, _) => Some(*v == Verdict::Yes),
            };
            if let Some(hit) = counted {
                cat_rate.add(hit);
                all_rate.add(hit);
            }
        }
    }
    Ok(CategoryRates { categories, overall })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementScores {
    pub categories: BTreeMap<DivergenceCategory, Rate>,
    pub overall: Rate,
}

/// Fraction of `(item, system)` panels whose verdicts are all identical.
pub fn agreement(judgments: &[Judgment], set: &ChallengeSet, policy: &ScoringPolicy) -> Result<AgreementScores, ScoringError> {
    let (_, panels) = complete_panels(judgments, set, policy)?;
    let mut categories: BTreeMap<DivergenceCategory, Rate> = BTreeMap::new();
    let mut overall = Rate::default();
    for ((item_id, _), verdicts) in &panels {
        let unanimous = verdicts.windows(2).all(|w| w[0] == w[1]);
        let category = set.item(item_id).expect("checked above").category;
        categories.entry(category).or_default().add(unanimous);
        overall.add(unanimous);
    }
    Ok(AgreementScores { categories, overall })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub category: DivergenceCategory,
    pub items: usize,
    pub item_level: BTreeMap<String, Rate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judgment_level: Option<BTreeMap<String, Rate>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement: Option<Rate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverallScore {
    pub items: usize,
    pub item_level: BTreeMap<String, Rate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judgment_level: Option<BTreeMap<String, Rate>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement: Option<Rate>,
}

/// Everything the report tables need.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub policy: ScoringPolicy,
    pub policy_note: String,
    pub systems: Vec<String>,
    pub subcategories: Vec<SubcategoryScore>,
    pub categories: Vec<CategoryScore>,
    pub overall: OverallScore,
}

impl ScoreReport {
    pub fn has_judgment_level(&self) -> bool {
        self.overall.judgment_level.is_some()
    }

    pub fn is_empty(&self) -> bool {
        self.systems.is_empty() || self.subcategories.is_empty()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("score report serializes");
        s.push('\n');
        s
    }

    pub fn subcategory(&self, name: &str) -> Option<&SubcategoryScore> {
        self.subcategories.iter().find(|s| s.subcategory == name)
    }
}

fn order_systems(preferred: &[String], present: &[String]) -> Vec<String> {
    let mut out: Vec<String> = preferred.iter().filter(|s| present.contains(s)).cloned().collect();
    for s in present {
        if !out.contains(s) {
            out.push(s.clone());
        }
    }
    out
}

/// Item-level report from bridged flags alone (no agreement data).
///
/// `system_order` fixes column order; systems it does not mention follow in
/// first-seen order.
pub fn score_verdicts(
    set: &ChallengeSet,
    matrix: &VerdictMatrix,
    system_order: &[String],
    policy: &ScoringPolicy,
) -> Result<ScoreReport, ScoringError> {
    let subcategories = subcategory_scores(matrix, set)?;
    let rates = category_scores_item_level(matrix, set)?;
    let counts = set.category_counts();
    let categories = set
        .categories()
        .into_iter()
        .map(|c| CategoryScore {
            category: c,
            items: counts[&c],
            item_level: rates.categories.get(&c).cloned().unwrap_or_default(),
            judgment_level: None,
            agreement: None,
        })
        .collect();
    Ok(ScoreReport {
        policy: *policy,
        policy_note: policy.describe(),
        systems: order_systems(system_order, matrix.systems()),
        subcategories,
        categories,
        overall: OverallScore { items: set.len(), item_level: rates.overall, judgment_level: None, agreement: None },
    })
}

/// Full report from individual judgments.
pub fn score_judgments(
    set: &ChallengeSet,
    judgments: &[Judgment],
    system_order: &[String],
    policy: &ScoringPolicy,
) -> Result<ScoreReport, ScoringError> {
    let verdicts = aggregate_with(judgments, policy)?;
    let matrix: VerdictMatrix = verdicts.iter().collect();
    let mut report = score_verdicts(set, &matrix, system_order, policy)?;
    let judged = judgment_level_scores(judgments, set, policy)?;
    let agree = agreement(judgments, set, policy)?;
    for cat in &mut report.categories {
        cat.judgment_level = Some(judged.categories.get(&cat.category).cloned().unwrap_or_default());
        cat.agreement = agree.categories.get(&cat.category).copied();
    }
    report.overall.judgment_level = Some(judged.overall);
    report.overall.agreement = Some(agree.overall);
    Ok(report)
}
