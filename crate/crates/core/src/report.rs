//! Summary and fine-grained tables, and their exports.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{ChallengeSet, DivergenceCategory};
use crate::scoring::{Rate, ScoreReport};

/// Placeholder for cells with no value.
pub const UNAVAILABLE: &str = "—";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("nothing to render")]
    Empty,
    #[error("metric value for unknown system `{0}`")]
    UnknownSystem(String),
    #[error("unknown export format `{0}`; expected markdown, csv or json")]
    UnknownFormat(String),
    #[error("subcategory `{subcategory}` has {found} items in the report but {expected} in the set")]
    CountMismatch { subcategory: String, found: usize, expected: usize },
    #[error("subcategory `{0}` missing from the report")]
    MissingSubcategory(String),
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    Markdown,
    Csv,
    Json,
}

impl FromStr for ExportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ExportFormat::Markdown),
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            _ => Err(ReportError::UnknownFormat(s.to_string())),
        }
    }
}

/// Which aggregation the summary cells come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateLevel {
    ItemLevel,
    JudgmentLevel,
}

/// Externally supplied per-system numbers (e.g. corpus BLEU), shown verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricRow {
    pub label: String,
    pub values: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub cells: Vec<Option<u32>>,
    pub agreement: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub level: RateLevel,
    pub systems: Vec<String>,
    pub rows: Vec<SummaryRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub footer: Option<MetricFooter>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricFooter {
    pub label: String,
    pub values: Vec<Option<String>>,
}

fn percents(systems: &[String], rates: &BTreeMap<String, Rate>) -> Vec<Option<u32>> {
    systems.iter().map(|s| rates.get(s).and_then(Rate::percent)).collect()
}

/// Category rows plus Overall. Uses judgment-level rates when the report
/// has them, item-level rates otherwise.
pub fn summary_table(report: &ScoreReport, metrics: Option<&MetricRow>) -> Result<SummaryTable, ReportError> {
    if report.is_empty() {
        return Err(ReportError::Empty);
    }
    let level = if report.has_judgment_level() { RateLevel::JudgmentLevel } else { RateLevel::ItemLevel };
    let pick = |item: &BTreeMap<String, Rate>, judged: &Option<BTreeMap<String, Rate>>| match level {
        RateLevel::JudgmentLevel => percents(&report.systems, judged.as_ref().expect("judgment level present")),
        RateLevel::ItemLevel => percents(&report.systems, item),
    };
    let mut rows: Vec<SummaryRow> = report
        .categories
        .iter()
        .map(|c| SummaryRow {
            label: c.category.title().to_string(),
            cells: pick(&c.item_level, &c.judgment_level),
            agreement: c.agreement.and_then(|r| r.percent()),
        })
        .collect();
    rows.push(SummaryRow {
        label: "Overall".to_string(),
        cells: pick(&report.overall.item_level, &report.overall.judgment_level),
        agreement: report.overall.agreement.and_then(|r| r.percent()),
    });

    let footer = match metrics {
        None => None,
        Some(m) => {
            if let Some(unknown) = m.values.keys().find(|k| !report.systems.contains(k)) {
                return Err(ReportError::UnknownSystem(unknown.clone()));
            }
            Some(MetricFooter {
                label: m.label.clone(),
                values: report.systems.iter().map(|s| m.values.get(s).cloned()).collect(),
            })
        }
    };
    Ok(SummaryTable { level, systems: report.systems.clone(), rows, footer })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FineGrainedRow {
    pub category: DivergenceCategory,
    pub subcategory: String,
    pub items: usize,
    pub cells: Vec<Option<u32>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FineGrainedTable {
    pub systems: Vec<String>,
    pub rows: Vec<FineGrainedRow>,
}

impl FineGrainedTable {
    pub fn row(&self, subcategory: &str) -> Option<&FineGrainedRow> {
        self.rows.iter().find(|r| r.subcategory == subcategory)
    }
}

/// One row per subcategory, in set order.
pub fn fine_grained_table(report: &ScoreReport, set: &ChallengeSet) -> Result<FineGrainedTable, ReportError> {
    if report.is_empty() {
        return Err(ReportError::Empty);
    }
    let rows = set
        .subcategories()
        .into_iter()
        .map(|sub| {
            let scored = report
                .subcategory(sub.name)
                .ok_or_else(|| ReportError::MissingSubcategory(sub.name.to_string()))?;
            if scored.items != sub.item_ids.len() {
                return Err(ReportError::CountMismatch {
                    subcategory: sub.name.to_string(),
                    found: scored.items,
                    expected: sub.item_ids.len(),
                });
            }
            Ok(FineGrainedRow {
                category: sub.category,
                subcategory: sub.name.to_string(),
                items: sub.item_ids.len(),
                cells: percents(&report.systems, &scored.rates),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FineGrainedTable { systems: report.systems.clone(), rows })
}

/// Tabular view shared by the markdown and CSV writers.
pub trait Tabular: Serialize {
    fn header(&self) -> Vec<String>;
    /// Rows of cells; `None` marks an unavailable percentage.
    fn body(&self) -> Vec<Vec<Cell>>;
    /// Leading text columns; the rest are right-aligned in markdown.
    fn label_columns(&self) -> usize {
        1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cell {
    Text(String),
    Percent(Option<u32>),
}

impl Cell {
    fn markdown(&self) -> String {
        match self {
            Cell::Text(t) => t.clone(),
            Cell::Percent(Some(p)) => format!("{p}%"),
            Cell::Percent(None) => UNAVAILABLE.to_string(),
        }
    }

    fn csv(&self) -> String {
        match self {
            Cell::Text(t) if t == UNAVAILABLE => String::new(),
            Cell::Text(t) => t.clone(),
            Cell::Percent(Some(p)) => p.to_string(),
            Cell::Percent(None) => String::new(),
        }
    }
}

impl Tabular for SummaryTable {
    fn header(&self) -> Vec<String> {
        let mut h = vec!["Divergence type".to_string()];
        h.extend(self.systems.iter().cloned());
        h.push("Agreement".to_string());
        h
    }

    fn body(&self) -> Vec<Vec<Cell>> {
        let mut rows: Vec<Vec<Cell>> = self
            .rows
            .iter()
            .map(|r| {
                let mut cells = vec![Cell::Text(r.label.clone())];
                cells.extend(r.cells.iter().map(|c| Cell::Percent(*c)));
                cells.push(Cell::Percent(r.agreement));
                cells
            })
            .collect();
        if let Some(footer) = &self.footer {
            let mut cells = vec![Cell::Text(footer.label.clone())];
            cells.extend(
                footer.values.iter().map(|v| Cell::Text(v.clone().unwrap_or_else(|| UNAVAILABLE.to_string()))),
            );
            cells.push(Cell::Text(UNAVAILABLE.to_string()));
            rows.push(cells);
        }
        rows
    }
}

impl Tabular for FineGrainedTable {
    fn header(&self) -> Vec<String> {
        let mut h = vec!["Category".to_string(), "Subcategory".to_string(), "#".to_string()];
        h.extend(self.systems.iter().cloned());
        h
    }

    fn label_columns(&self) -> usize {
        2
    }

    fn body(&self) -> Vec<Vec<Cell>> {
        self.rows
            .iter()
            .map(|r| {
                let mut cells = vec![
                    Cell::Text(r.category.title().to_string()),
                    Cell::Text(r.subcategory.clone()),
                    Cell::Text(r.items.to_string()),
                ];
                cells.extend(r.cells.iter().map(|c| Cell::Percent(*c)));
                cells
            })
            .collect()
    }
}

pub fn to_markdown<T: Tabular>(table: &T) -> String {
    let header = table.header();
    let mut out = format!("| {} |\n", header.join(" | "));
    out.push('|');
    for (i, _) in header.iter().enumerate() {
        out.push_str(if i < table.label_columns() { " --- |" } else { " ---: |" });
    }
    out.push('\n');
    for row in table.body() {
        let cells: Vec<String> = row.iter().map(Cell::markdown).collect();
        out.push_str(&format!("| {} |\n", cells.join(" | ")));
    }
    out
}

pub fn to_csv<T: Tabular>(table: &T) -> Result<String, ReportError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
    w.write_record(table.header()).map_err(|e| ReportError::Csv(e.to_string()))?;
    for row in table.body() {
        w.write_record(row.iter().map(Cell::csv)).map_err(|e| ReportError::Csv(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}

pub fn export<T: Tabular>(table: &T, format: ExportFormat) -> Result<Vec<u8>, ReportError> {
    Ok(match format {
        ExportFormat::Markdown => to_markdown(table).into_bytes(),
        ExportFormat::Csv => to_csv(table)?.into_bytes(),
        ExportFormat::Json => {
            let mut s = serde_json::to_string_pretty(table).expect("tables serialize");
            s.push('\n');
            s.into_bytes()
        }
    })
}

/// Cells of a markdown pipe table, header included, separator row dropped.
pub fn parse_markdown_table(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(str::trim)
        .filter(|l| l.starts_with('|'))
        .map(|l| {
            l.trim_matches('|')
                .split('|')
                .map(|c| c.trim().to_string())
                .collect::<Vec<_>>()
        })
        .filter(|cells| !cells.iter().all(|c| !c.is_empty() && c.chars().all(|ch| ch == '-' || ch == ':')))
        .collect()
}

/// One CSV row per `(subcategory, system)`.
pub fn score_rows_csv(report: &ScoreReport) -> Result<String, ReportError> {
    if report.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
    let err = |e: csv::Error| ReportError::Csv(e.to_string());
    w.write_record(["category", "subcategory", "system", "items", "bridged", "percent"]).map_err(err)?;
    for sub in &report.subcategories {
        for sys in &report.systems {
            let rate = sub.rates.get(sys).copied().unwrap_or_default();
            w.write_record([
                sub.category.as_str().to_string(),
                sub.subcategory.clone(),
                sys.clone(),
                sub.items.to_string(),
                rate.numerator.to_string(),
                rate.percent().map(|p| p.to_string()).unwrap_or_default(),
            ])
            .map_err(err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_names() {
        assert_eq!("CSV".parse::<ExportFormat>(), Ok(ExportFormat::Csv));
        assert_eq!("md".parse::<ExportFormat>(), Ok(ExportFormat::Markdown));
        assert_eq!("xlsx".parse::<ExportFormat>(), Err(ReportError::UnknownFormat("xlsx".into())));
    }

    #[test]
    fn markdown_parse_skips_separator() {
        let rows = parse_markdown_table("| a | b |\n| --- | ---: |\n| 1 | — |\n");
        assert_eq!(rows, vec![vec!["a", "b"], vec!["1", "—"]]);
    }
}
