//! `challenge`: validate, lint, plan, serve, score and report challenge-set
//! evaluations.
//!
//! Exit codes: 0 success, 1 findings treated as errors or a failed
//! operation, 2 usage errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "challenge", version, about = "Challenge-set evaluation of translation systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Input set; the bundled English–French set when omitted.
#[derive(Args, Clone)]
struct SetArg {
    /// Challenge-set JSON document.
    #[arg(long, value_name = "FILE")]
    set: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a challenge set and print a summary with every issue.
    Validate {
        #[command(flatten)]
        set: SetArg,
        /// Flag sources longer than this many tokens.
        #[arg(long, default_value_t = 15)]
        max_tokens: usize,
    },
    /// Check source vocabulary against corpus frequencies and sentence length.
    Lint(LintArgs),
    /// Build blinded per-annotator sessions and the blinding key.
    Sessions(SessionsArgs),
    /// Run the annotation service.
    Serve(ServeArgs),
    /// Load externally collected judgments into a project.
    Ingest(IngestArgs),
    /// Aggregate judgments or verdicts into a score report.
    Score(ScoreArgs),
    /// Render a score report as a table.
    Report(ReportArgs),
    /// Score the bundled verdicts and compare with the published table.
    Reproduce,
}

#[derive(Args)]
struct LintArgs {
    #[command(flatten)]
    set: SetArg,
    /// Frequency table: `token<TAB>count` per line.
    #[arg(long, value_name = "FILE", conflicts_with = "corpus")]
    freq: Option<PathBuf>,
    /// Raw corpus text to count tokens from.
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    min_count: u64,
    #[arg(long, default_value_t = 15)]
    max_tokens: usize,
    /// Token exempt from the frequency check (repeatable).
    #[arg(long = "except", value_name = "TOKEN")]
    exceptions: Vec<String>,
    #[arg(long, value_enum, default_value_t = LintFormat::Text)]
    format: LintFormat,
    /// Exit 1 when any finding is reported.
    #[arg(long)]
    strict: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum LintFormat {
    Text,
    Json,
}

#[derive(Args)]
struct ServiceArgs {
    /// Service data directory.
    #[arg(long, env = challenge_service::DATA_DIR_ENV, value_name = "DIR")]
    data_dir: Option<PathBuf>,
    /// JSON config with `admin_token` (and optionally `data_dir`).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SessionsArgs {
    #[command(flatten)]
    set: SetArg,
    /// System outputs JSON; the bundled outputs when omitted.
    #[arg(long, value_name = "FILE")]
    outputs: Option<PathBuf>,
    /// Annotator id (repeatable).
    #[arg(long = "annotator", value_name = "ID")]
    annotators: Vec<String>,
    /// Roster JSON with annotator ids and tokens.
    #[arg(long, value_name = "FILE")]
    roster: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for `sessions/<annotator>.json` and `blinding_key.json`.
    #[arg(long, value_name = "DIR", required_unless_present = "project")]
    out: Option<PathBuf>,
    /// Create a service project with this id instead of loose files.
    #[arg(long, value_name = "ID", requires = "roster")]
    project: Option<String>,
    #[command(flatten)]
    service: ServiceArgs,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: String,
    #[command(flatten)]
    service: ServiceArgs,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long, value_name = "ID")]
    project: String,
    /// Judgment list (JSON array or `{"judgments": [...]}`) keyed by system id.
    #[arg(long, value_name = "FILE")]
    judgments: PathBuf,
    #[command(flatten)]
    service: ServiceArgs,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    set: SetArg,
    /// Unblinded judgments (e.g. an admin export).
    #[arg(long, value_name = "FILE", group = "input")]
    judgments: Option<PathBuf>,
    /// Item-level verdicts `{system_id, item_id, bridged}`.
    #[arg(long, value_name = "FILE", group = "input")]
    verdicts: Option<PathBuf>,
    /// Score a service project directly.
    #[arg(long, value_name = "ID", group = "input")]
    project: Option<String>,
    #[command(flatten)]
    service: ServiceArgs,
    #[arg(long, default_value_t = 3)]
    panel: usize,
    /// How N/A counts in the item-level majority.
    #[arg(long, value_enum, default_value_t = ItemNa::NonPositive)]
    item_na: ItemNa,
    /// How N/A counts in judgment-level rates.
    #[arg(long, value_enum, default_value_t = JudgmentNa::Exclude)]
    judgment_na: JudgmentNa,
    /// Column order for systems (repeatable).
    #[arg(long = "system", value_name = "ID")]
    systems: Vec<String>,
    #[arg(long, value_enum, default_value_t = ScoreFormat::Json)]
    format: ScoreFormat,
    /// Write to a file instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ItemNa {
    NonPositive,
    Abstain,
}

#[derive(Clone, Copy, ValueEnum)]
enum JudgmentNa {
    Exclude,
    Negative,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct ReportArgs {
    /// Score report JSON from `score`; the bundled verdicts when omitted.
    #[arg(long, value_name = "FILE")]
    scores: Option<PathBuf>,
    #[command(flatten)]
    set: SetArg,
    #[arg(long, value_enum, default_value_t = Table::Summary)]
    table: Table,
    #[arg(long, default_value = "markdown", value_parser = ["markdown", "md", "csv", "json"])]
    format: String,
    /// Extra per-system value shown under the summary, `SYSTEM=VALUE` (repeatable).
    #[arg(long = "metric", value_name = "SYSTEM=VALUE")]
    metrics: Vec<String>,
    #[arg(long, default_value = "BLEU")]
    metric_label: String,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Table {
    Summary,
    FineGrained,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
