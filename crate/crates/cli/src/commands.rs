use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use challenge_core::fixture::{self, compare_fine_grained};
use challenge_core::format::{parse_challenge_set, parse_outputs, parse_records, read_challenge_set};
use challenge_core::lint::{lint_length, lint_vocabulary, load_frequency_table, FrequencyInput};
use challenge_core::model::{ChallengeSet, SystemOutputSet};
use challenge_core::report::{export, fine_grained_table, summary_table, ExportFormat, MetricRow};
use challenge_core::scoring::{
    effective_judgments, missing_judgments, score_judgments, score_verdicts, ItemNaPolicy, ItemVerdict, Judgment,
    JudgmentNaPolicy, ScoreReport, ScoringPolicy, VerdictMatrix,
};
use challenge_core::session::build_sessions;
use challenge_core::validate::validate_with_length_limit;
use challenge_service::{parse_roster, CreateProject, Service, ServiceConfig};

use crate::{
    Command, IngestArgs, ItemNa, JudgmentNa, LintArgs, LintFormat, ReportArgs, ScoreArgs, ScoreFormat, ServeArgs,
    ServiceArgs, SessionsArgs, SetArg, Table,
};

const USAGE: u8 = 2;

pub fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Validate { set, max_tokens } => validate(&set, max_tokens),
        Command::Lint(args) => lint(args),
        Command::Sessions(args) => sessions(args),
        Command::Serve(args) => serve(args),
        Command::Ingest(args) => ingest(args),
        Command::Score(args) => score(args),
        Command::Report(args) => report(args),
        Command::Reproduce => reproduce(),
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn load_set(arg: &SetArg) -> Result<ChallengeSet> {
    match &arg.set {
        Some(path) => parse_challenge_set(&read(path)?).with_context(|| format!("loading {}", path.display())),
        None => Ok(fixture::challenge_set()),
    }
}

fn load_outputs(path: Option<&Path>, set: &ChallengeSet) -> Result<SystemOutputSet> {
    let Some(path) = path else {
        return Ok(fixture::outputs(set));
    };
    let parsed = parse_outputs(&read(path)?, set).with_context(|| format!("loading {}", path.display()))?;
    for w in parsed.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(parsed.outputs)
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => std::io::stdout().write_all(bytes).context("writing stdout"),
    }
}

fn usage(message: impl std::fmt::Display) -> Result<ExitCode> {
    eprintln!("error: {message}");
    Ok(ExitCode::from(USAGE))
}

fn validate(arg: &SetArg, max_tokens: usize) -> Result<ExitCode> {
    let set = match &arg.set {
        Some(path) => read_challenge_set(&read(path)?).with_context(|| format!("loading {}", path.display()))?,
        None => fixture::challenge_set(),
    };
    let report = validate_with_length_limit(&set, max_tokens);
    println!("{}", report.summary());
    for e in &report.errors {
        println!("error: {e}");
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    Ok(if report.errors.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn lint(args: LintArgs) -> Result<ExitCode> {
    let set = load_set(&args.set)?;
    let mut report = lint_length(&set, args.max_tokens);
    let source = match (&args.freq, &args.corpus) {
        (Some(p), _) => Some((p, FrequencyInput::Table)),
        (None, Some(p)) => Some((p, FrequencyInput::Corpus)),
        (None, None) => None,
    };
    if let Some((path, mode)) = source {
        let freq = load_frequency_table(&read(path)?, mode).with_context(|| format!("loading {}", path.display()))?;
        let vocab = lint_vocabulary(&set, &freq, args.min_count, &args.exceptions);
        report = vocab.merge(report, &set);
    } else if !args.exceptions.is_empty() {
        return usage("--except needs --freq or --corpus");
    }
    match args.format {
        LintFormat::Text => print!("{}", report.to_text()),
        LintFormat::Json => print!("{}", report.to_json()),
    }
    eprintln!("{} findings", report.len());
    Ok(if args.strict && !report.is_empty() { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

#[derive(Deserialize)]
struct ConfigFile {
    admin_token: Option<String>,
    data_dir: Option<PathBuf>,
}

fn service_config(args: &ServiceArgs) -> Result<ServiceConfig> {
    let file: Option<ConfigFile> = match &args.config {
        Some(path) => Some(serde_json::from_slice(&read(path)?).with_context(|| format!("parsing {}", path.display()))?),
        None => None,
    };
    let data_dir = args
        .data_dir
        .clone()
        .or_else(|| file.as_ref().and_then(|f| f.data_dir.clone()))
        .with_context(|| format!("no data directory: pass --data-dir or set {}", challenge_service::DATA_DIR_ENV))?;
    let admin_token = file
        .and_then(|f| f.admin_token)
        .or_else(|| std::env::var(challenge_service::ADMIN_TOKEN_ENV).ok())
        .filter(|t| !t.is_empty())
        .with_context(|| {
            format!("no admin token: give `admin_token` in --config or set {}", challenge_service::ADMIN_TOKEN_ENV)
        })?;
    Ok(ServiceConfig { data_dir, admin_token })
}

fn open_service(args: &ServiceArgs) -> Result<Service> {
    let config = service_config(args)?;
    let dir = config.data_dir.display().to_string();
    Service::open(config).with_context(|| format!("opening data directory {dir}"))
}

fn sessions(args: SessionsArgs) -> Result<ExitCode> {
    let set = load_set(&args.set)?;
    let outputs = load_outputs(args.outputs.as_deref(), &set)?;
    let roster = match &args.roster {
        Some(path) => Some(parse_roster(&read(path)?).with_context(|| format!("loading {}", path.display()))?),
        None => None,
    };
    let mut annotators = args.annotators.clone();
    if let Some(r) = &roster {
        annotators.extend(r.iter().map(|e| e.annotator_id.clone()));
    }
    if annotators.is_empty() {
        return usage("give at least one --annotator or a --roster");
    }

    if let Some(project_id) = args.project {
        let roster = roster.expect("clap requires --roster with --project");
        if !args.annotators.is_empty() {
            return usage("with --project, annotators come from --roster only");
        }
        let service = open_service(&args.service)?;
        let created = service
            .create_project(CreateProject {
                project_id: Some(project_id),
                challenge_set: set,
                outputs: outputs.iter().collect(),
                roster,
                master_seed: args.seed,
            })
            .context("creating project")?;
        println!("created project {} ({} annotators, {} slots)", created.project_id, created.annotators, created.slots);
        return Ok(ExitCode::SUCCESS);
    }

    let out = args.out.expect("clap requires --out without --project");
    let (sessions, key) = build_sessions(&set, &outputs, &annotators, args.seed)?;
    let dir = out.join("sessions");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for s in &sessions {
        write_output(Some(&dir.join(format!("{}.json", s.annotator_id))), s.to_json().as_bytes())?;
    }
    write_output(Some(&out.join("blinding_key.json")), key.to_json().as_bytes())?;
    println!("wrote {} sessions ({} slots each) and blinding_key.json to {}", sessions.len(), sessions[0].slot_count(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn serve(args: ServeArgs) -> Result<ExitCode> {
    let service = Arc::new(open_service(&args.service)?);
    let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
    runtime.block_on(async {
        let listener =
            tokio::net::TcpListener::bind(&args.bind).await.with_context(|| format!("binding {}", args.bind))?;
        eprintln!("listening on {} ({} projects)", listener.local_addr()?, service.project_ids().len());
        challenge_service::serve(service, listener).await.context("serving")
    })?;
    Ok(ExitCode::SUCCESS)
}

fn ingest(args: IngestArgs) -> Result<ExitCode> {
    let service = open_service(&args.service)?;
    let judgments: Vec<Judgment> = parse_records(&read(&args.judgments)?, "judgments")
        .with_context(|| format!("loading {}", args.judgments.display()))?;
    let acks = service.ingest(&args.project, &judgments).context("ingesting judgments")?;
    println!("ingested {} judgments into {}", acks.len(), args.project);
    Ok(ExitCode::SUCCESS)
}

fn policy(args: &ScoreArgs) -> ScoringPolicy {
    ScoringPolicy {
        panel_size: args.panel,
        item_na: match args.item_na {
            ItemNa::NonPositive => ItemNaPolicy::NonPositive,
            ItemNa::Abstain => ItemNaPolicy::Abstain,
        },
        judgment_na: match args.judgment_na {
            JudgmentNa::Exclude => JudgmentNaPolicy::Exclude,
            JudgmentNa::Negative => JudgmentNaPolicy::CountAsNegative,
        },
    }
}

fn distinct<'a>(values: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    values.filter(|v| seen.insert(*v)).map(str::to_string).collect()
}

fn score(args: ScoreArgs) -> Result<ExitCode> {
    let policy = policy(&args);
    let report = if let Some(path) = &args.verdicts {
        let set = load_set(&args.set)?;
        let verdicts: Vec<ItemVerdict> =
            parse_records(&read(path)?, "verdicts").with_context(|| format!("loading {}", path.display()))?;
        let matrix: VerdictMatrix = verdicts.iter().collect();
        matrix.check_against(&set)?;
        let order = if args.systems.is_empty() { matrix.systems().to_vec() } else { args.systems.clone() };
        score_verdicts(&set, &matrix, &order, &policy)?
    } else {
        let (set, judgments, annotators, systems) = if let Some(id) = &args.project {
            let service = open_service(&args.service)?;
            let project = service.project(id)?;
            let export = project.export()?;
            let annotators: Vec<String> = project.annotators().map(str::to_string).collect();
            (project.set.clone(), export.judgments, annotators, project.outputs.systems().to_vec())
        } else if let Some(path) = &args.judgments {
            let set = load_set(&args.set)?;
            let judgments: Vec<Judgment> =
                parse_records(&read(path)?, "judgments").with_context(|| format!("loading {}", path.display()))?;
            let annotators = distinct(judgments.iter().map(|j| j.annotator_id.as_str()));
            let systems = distinct(judgments.iter().map(|j| j.system_id.as_str()));
            (set, judgments, annotators, systems)
        } else {
            return usage("give one of --judgments, --verdicts or --project");
        };
        let effective = effective_judgments(&judgments)?;
        let missing = missing_judgments(&effective, &set, &systems, &annotators);
        if !missing.is_empty() {
            for (a, i, s) in &missing {
                eprintln!("missing judgment: annotator {a}, item {i}, system {s}");
            }
            eprintln!("error: {} judgments missing; no scores written", missing.len());
            return Ok(ExitCode::from(1));
        }
        let order = if args.systems.is_empty() { systems } else { args.systems.clone() };
        score_judgments(&set, &effective, &order, &policy)?
    };
    let bytes = match args.format {
        ScoreFormat::Json => report.to_json().into_bytes(),
        ScoreFormat::Csv => challenge_core::report::score_rows_csv(&report)?.into_bytes(),
    };
    write_output(args.out.as_deref(), &bytes)?;
    Ok(ExitCode::SUCCESS)
}

fn parse_metrics(label: &str, raw: &[String]) -> Option<Result<MetricRow, String>> {
    if raw.is_empty() {
        return None;
    }
    let values = raw
        .iter()
        .map(|m| match m.split_once('=') {
            Some((sys, val)) if !sys.is_empty() && !val.is_empty() => Ok((sys.to_string(), val.to_string())),
            _ => Err(format!("--metric expects SYSTEM=VALUE, got `{m}`")),
        })
        .collect::<Result<_, _>>();
    Some(values.map(|values| MetricRow { label: label.to_string(), values }))
}

fn report(args: ReportArgs) -> Result<ExitCode> {
    let format: ExportFormat = args.format.parse()?;
    let scores: ScoreReport = match &args.scores {
        Some(path) => serde_json::from_slice(&read(path)?).with_context(|| format!("parsing {}", path.display()))?,
        None => fixture::bundled_report(),
    };
    let bytes = match args.table {
        Table::Summary => {
            let metrics = match parse_metrics(&args.metric_label, &args.metrics) {
                Some(Err(e)) => return usage(e),
                Some(Ok(m)) => Some(m),
                None => None,
            };
            export(&summary_table(&scores, metrics.as_ref())?, format)?
        }
        Table::FineGrained => {
            if !args.metrics.is_empty() {
                return usage("--metric applies to the summary table only");
            }
            let set = load_set(&args.set)?;
            export(&fine_grained_table(&scores, &set)?, format)?
        }
    };
    write_output(args.out.as_deref(), &bytes)?;
    Ok(ExitCode::SUCCESS)
}

fn reproduce() -> Result<ExitCode> {
    let set = fixture::challenge_set();
    let report = fixture::bundled_report();
    let rows = compare_fine_grained(&report);
    let pct = |p: Option<u32>| p.map_or("—".to_string(), |v| format!("{v}%"));
    for row in &rows {
        let p = &row.published;
        let got = row.percent.map(pct).join(" ");
        if row.matches() {
            println!("ok        {:<34} {:>2} {got}", p.subcategory, row.items);
        } else {
            let want = p.percent.map(|v| format!("{v}%")).join(" ");
            println!("MISMATCH  {:<34} {:>2} {got} (published {} {want})", p.subcategory, row.items, p.items);
        }
    }
    let matched = rows.iter().filter(|r| r.matches()).count();
    println!("{matched}/{} subcategory rows match", rows.len());

    let counts = set.category_counts();
    println!(
        "{} items ({}), {} subcategories",
        set.len(),
        counts.iter().map(|(c, n)| format!("{c} {n}")).collect::<Vec<_>>().join(", "),
        set.subcategories().len()
    );
    let overall: Vec<String> = report
        .systems
        .iter()
        .map(|s| {
            let r = report.overall.item_level[s];
            format!("{s} {}/{} ({})", r.numerator, r.denominator, pct(r.percent()))
        })
        .collect();
    println!("overall item-level: {}", overall.join(", "));
    if matched != rows.len() {
        bail!("{} of {} rows differ from the published table", rows.len() - matched, rows.len());
    }
    Ok(ExitCode::SUCCESS)
}
