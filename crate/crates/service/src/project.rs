//! Projects on disk and the operations annotators and admins run on them.
//!
//! Layout under `<data_dir>/projects/<id>/`:
//!
//! ```text
//! project.json        id, seed, roster (with tokens)
//! challenge_set.json  outputs.json
//! sessions/<annotator>.json
//! blinding_key.json   never served to annotators
//! judgments.log       append-only, one record per line
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::json;

use challenge_core::format::{challenge_set_to_json, outputs_to_json, parse_challenge_set, parse_outputs, parse_records};
use challenge_core::model::{ChallengeSet, HighlightSpan, SystemOutput, SystemOutputSet};
use challenge_core::scoring::{Judgment, Verdict};
use challenge_core::session::{build_sessions, unblind, AnnotationSession, BlindJudgment, BlindingKey};
use challenge_core::validate::validate_challenge_set;

use crate::error::ServiceError;
use crate::log::{JudgmentLog, JudgmentRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub annotator_id: String,
    pub token: String,
}

/// Body of `POST /projects`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateProject {
    #[serde(default)]
    pub project_id: Option<String>,
    pub challenge_set: ChallengeSet,
    pub outputs: Vec<SystemOutput>,
    pub roster: Vec<RosterEntry>,
    #[serde(default)]
    pub master_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProjectMeta {
    project_id: String,
    master_seed: u64,
    roster: Vec<RosterEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Created {
    pub project_id: String,
    pub annotators: usize,
    pub slots: usize,
}

/// One blinded output as shown to an annotator, with their current verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingOutput {
    pub blind_label: String,
    pub translation: String,
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingItem {
    pub item_id: String,
    pub question: String,
    pub source: String,
    pub source_highlights: Vec<HighlightSpan>,
    pub reference: String,
    pub reference_highlights: Vec<HighlightSpan>,
    pub outputs: Vec<PendingOutput>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Count {
    pub judged: usize,
    pub total: usize,
}

/// Response of `GET /projects/{id}/next`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Next {
    pub done: bool,
    pub item: Option<PendingItem>,
    pub progress: Count,
}

/// Body of `POST /projects/{id}/judgments`. The verdict stays a string
/// here so that bad values get the service's own error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Submission {
    pub item_id: String,
    pub blind_label: String,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub item_id: String,
    pub blind_label: String,
    pub verdict: Verdict,
    pub revision: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub yes: usize,
    pub no: usize,
    #[serde(rename = "not-applicable")]
    pub not_applicable: usize,
}

impl Tally {
    fn add(&mut self, v: Verdict) {
        match v {
            Verdict::Yes => self.yes += 1,
            Verdict::No => self.no += 1,
            Verdict::NotApplicable => self.not_applicable += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub project_id: String,
    pub annotators: BTreeMap<String, Count>,
    pub verdicts: Tally,
    pub complete: bool,
}

/// Whether every annotator has judged one `(item, system)` pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCompleteness {
    pub item_id: String,
    pub system_id: String,
    pub judgments: usize,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Export {
    pub project_id: String,
    pub complete: bool,
    pub judgments: Vec<Judgment>,
    pub pairs: Vec<PairCompleteness>,
}

pub struct Project {
    pub id: String,
    pub dir: PathBuf,
    pub set: ChallengeSet,
    pub outputs: SystemOutputSet,
    pub master_seed: u64,
    roster: Vec<RosterEntry>,
    tokens: HashMap<String, String>,
    sessions: HashMap<String, AnnotationSession>,
    key: BlindingKey,
    log: RwLock<JudgmentLog>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// Writes through a temporary file so readers never see a partial document.
fn write_atomic(path: &Path, contents: &str) -> Result<(), ServiceError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| ServiceError::storage(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| ServiceError::storage(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>, ServiceError> {
    fs::read(path).map_err(|e| ServiceError::storage(path, e))
}

fn invalid(message: impl Into<String>) -> ServiceError {
    ServiceError::Invalid { message: message.into(), detail: serde_json::Value::Null }
}

fn is_safe_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Project {
    pub fn annotators(&self) -> impl Iterator<Item = &str> {
        self.roster.iter().map(|r| r.annotator_id.as_str())
    }

    pub fn annotator_for(&self, token: &str) -> Option<&str> {
        self.tokens.get(token).map(String::as_str)
    }

    pub fn session(&self, annotator_id: &str) -> Option<&AnnotationSession> {
        self.sessions.get(annotator_id)
    }

    pub fn key(&self) -> &BlindingKey {
        &self.key
    }

    fn slots_per_annotator(&self) -> usize {
        self.set.len() * self.outputs.systems().len()
    }

    fn build(dir: &Path, meta: ProjectMeta, set: ChallengeSet, outputs: SystemOutputSet) -> Result<Self, ServiceError> {
        let annotators: Vec<String> = meta.roster.iter().map(|r| r.annotator_id.clone()).collect();
        let (sessions, key) = build_sessions(&set, &outputs, &annotators, meta.master_seed)
            .map_err(|e| invalid(e.to_string()))?;
        let log = JudgmentLog::open(&dir.join("judgments.log"))?;
        Ok(Project {
            id: meta.project_id,
            dir: dir.to_path_buf(),
            tokens: meta.roster.iter().map(|r| (r.token.clone(), r.annotator_id.clone())).collect(),
            roster: meta.roster,
            sessions: sessions.into_iter().map(|s| (s.annotator_id.clone(), s)).collect(),
            key,
            set,
            outputs,
            master_seed: meta.master_seed,
            log: RwLock::new(log),
        })
    }

    /// Loads a project directory, replaying its judgment log.
    pub fn load(dir: &Path) -> Result<Self, ServiceError> {
        let meta: ProjectMeta = serde_json::from_slice(&read(&dir.join("project.json"))?)
            .map_err(|e| invalid(format!("project.json: {e}")))?;
        let set = parse_challenge_set(&read(&dir.join("challenge_set.json"))?).map_err(|e| invalid(e.to_string()))?;
        let outputs = parse_outputs(&read(&dir.join("outputs.json"))?, &set)
            .map_err(|e| invalid(e.to_string()))?
            .outputs;
        let project = Project::build(dir, meta, set, outputs)?;
        // Sessions are rebuilt from the inputs; the stored copies must agree.
        let stored: BlindingKey = serde_json::from_slice(&read(&dir.join("blinding_key.json"))?)
            .map_err(|e| invalid(format!("blinding_key.json: {e}")))?;
        if stored != project.key {
            return Err(invalid(format!("{}: blinding key does not match inputs", dir.display())));
        }
        Ok(project)
    }

    pub fn next_pending(&self, annotator_id: &str) -> Next {
        let session = &self.sessions[annotator_id];
        let log = self.log.read().expect("log lock");
        let progress = self.count(&log, annotator_id);
        for item in &session.items {
            let pending = item
                .blinded_outputs
                .iter()
                .any(|o| log.effective_for(annotator_id, &item.item_id, &o.blind_label).is_none());
            if !pending {
                continue;
            }
            let source = self.set.item(&item.item_id).expect("session items come from the set");
            let outputs = item
                .blinded_outputs
                .iter()
                .map(|o| PendingOutput {
                    blind_label: o.blind_label.clone(),
                    translation: o.translation.clone(),
                    verdict: log.effective_for(annotator_id, &item.item_id, &o.blind_label).map(|r| r.verdict),
                })
                .collect();
            return Next {
                done: false,
                item: Some(PendingItem {
                    item_id: item.item_id.clone(),
                    question: source.question.clone(),
                    source: source.source.clone(),
                    source_highlights: source.source_highlights.clone(),
                    reference: source.reference.clone(),
                    reference_highlights: source.reference_highlights.clone(),
                    outputs,
                }),
                progress,
            };
        }
        Next { done: true, item: None, progress }
    }

    fn count(&self, log: &JudgmentLog, annotator_id: &str) -> Count {
        Count {
            judged: log.effective().filter(|r| r.annotator_id == annotator_id).count(),
            total: self.slots_per_annotator(),
        }
    }

    pub fn submit(&self, annotator_id: &str, submission: &Submission) -> Result<Ack, ServiceError> {
        let verdict: Verdict = submission.verdict.parse().map_err(|e: challenge_core::scoring::InvalidVerdict| {
            ServiceError::InvalidVerdict(e.to_string())
        })?;
        if !self.sessions[annotator_id].has_slot(&submission.item_id, &submission.blind_label) {
            return Err(ServiceError::UnknownSlot {
                item_id: submission.item_id.clone(),
                blind_label: submission.blind_label.clone(),
            });
        }
        let mut log = self.log.write().expect("log lock");
        let revision = log.next_revision(annotator_id, &submission.item_id, &submission.blind_label);
        log.append(JudgmentRecord {
            annotator_id: annotator_id.to_string(),
            item_id: submission.item_id.clone(),
            blind_label: submission.blind_label.clone(),
            verdict,
            revision,
            timestamp: now_ms(),
        })?;
        Ok(Ack { item_id: submission.item_id.clone(), blind_label: submission.blind_label.clone(), verdict, revision })
    }

    pub fn progress(&self) -> Progress {
        let log = self.log.read().expect("log lock");
        let annotators: BTreeMap<String, Count> =
            self.annotators().map(|a| (a.to_string(), self.count(&log, a))).collect();
        let mut verdicts = Tally::default();
        for r in log.effective() {
            verdicts.add(r.verdict);
        }
        let complete = annotators.values().all(|c| c.judged == c.total);
        Progress { project_id: self.id.clone(), annotators, verdicts, complete }
    }

    /// Effective records in log-independent slot order.
    pub fn effective_records(&self) -> Vec<JudgmentRecord> {
        self.log.read().expect("log lock").effective().cloned().collect()
    }

    /// Every acknowledged record, revisions included, in log order.
    pub fn all_records(&self) -> Vec<JudgmentRecord> {
        self.log.read().expect("log lock").records().to_vec()
    }

    pub fn export(&self) -> Result<Export, ServiceError> {
        let blind: Vec<BlindJudgment> = self.effective_records().iter().map(BlindJudgment::from).collect();
        let judgments = unblind(&blind, &self.key).map_err(|e| invalid(e.to_string()))?;
        let mut per_pair: BTreeMap<(&str, &str), usize> = BTreeMap::new();
        for j in &judgments {
            *per_pair.entry((j.item_id.as_str(), j.system_id.as_str())).or_default() += 1;
        }
        let panel = self.roster.len();
        let pairs: Vec<PairCompleteness> = self
            .set
            .item_ids()
            .flat_map(|item| self.outputs.systems().iter().map(move |sys| (item, sys.as_str())))
            .map(|(item, sys)| {
                let n = per_pair.get(&(item, sys)).copied().unwrap_or(0);
                PairCompleteness { item_id: item.into(), system_id: sys.into(), judgments: n, complete: n == panel }
            })
            .collect();
        Ok(Export {
            project_id: self.id.clone(),
            complete: pairs.iter().all(|p| p.complete),
            judgments,
            pairs,
        })
    }
}

/// Static service settings; usually read from a JSON config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub admin_token: String,
}

/// All projects under one data directory.
pub struct Service {
    config: ServiceConfig,
    projects: RwLock<BTreeMap<String, Arc<Project>>>,
}

impl Service {
    /// Opens the data directory and loads every project in it.
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        if config.admin_token.is_empty() {
            return Err(invalid("admin token must not be empty"));
        }
        let root = config.data_dir.join("projects");
        fs::create_dir_all(&root).map_err(|e| ServiceError::storage(&root, e))?;
        let mut projects = BTreeMap::new();
        let entries = fs::read_dir(&root).map_err(|e| ServiceError::storage(&root, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| ServiceError::storage(&root, e))?;
            if entry.path().join("project.json").is_file() {
                let project = Project::load(&entry.path())?;
                projects.insert(project.id.clone(), Arc::new(project));
            }
        }
        Ok(Service { config, projects: RwLock::new(projects) })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn is_admin(&self, token: &str) -> bool {
        token == self.config.admin_token
    }

    pub fn project(&self, id: &str) -> Result<Arc<Project>, ServiceError> {
        self.projects
            .read()
            .expect("project table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownProject(id.to_string()))
    }

    pub fn project_ids(&self) -> Vec<String> {
        self.projects.read().expect("project table lock").keys().cloned().collect()
    }

    fn check_roster(&self, roster: &[RosterEntry]) -> Result<(), ServiceError> {
        if roster.is_empty() {
            return Err(invalid("roster is empty"));
        }
        let mut ids = HashSet::new();
        let mut tokens = HashSet::new();
        for r in roster {
            if !is_safe_id(&r.annotator_id) {
                return Err(invalid(format!("annotator id `{}` must be 1-64 of [A-Za-z0-9_-]", r.annotator_id)));
            }
            if !ids.insert(&r.annotator_id) {
                return Err(invalid(format!("duplicate annotator id `{}`", r.annotator_id)));
            }
            if r.token.is_empty() || self.is_admin(&r.token) || !tokens.insert(&r.token) {
                return Err(invalid(format!("annotator `{}` needs a unique, non-admin token", r.annotator_id)));
            }
        }
        Ok(())
    }

    pub fn create_project(&self, request: CreateProject) -> Result<Created, ServiceError> {
        let report = validate_challenge_set(&request.challenge_set);
        if !report.errors.is_empty() {
            return Err(ServiceError::Invalid {
                message: format!("challenge set has {} validation errors", report.errors.len()),
                detail: json!({"errors": report.errors.iter().map(|e| e.to_string()).collect::<Vec<_>>()}),
            });
        }
        self.check_roster(&request.roster)?;
        let mut outputs = SystemOutputSet::new();
        for o in &request.outputs {
            if request.challenge_set.item(&o.item_id).is_none() {
                return Err(invalid(format!("output for unknown item `{}`", o.item_id)));
            }
            if !outputs.insert(o.clone()) {
                return Err(invalid(format!("duplicate output for ({}, {})", o.system_id, o.item_id)));
            }
        }
        let missing = outputs.missing_pairs(&request.challenge_set);
        if !missing.is_empty() || outputs.is_empty() {
            return Err(ServiceError::IncompleteMatrix(missing));
        }

        let mut projects = self.projects.write().expect("project table lock");
        let id = match request.project_id {
            Some(id) if !is_safe_id(&id) => return Err(invalid(format!("project id `{id}` must be 1-64 of [A-Za-z0-9_-]"))),
            Some(id) => id,
            None => (1..).map(|n| format!("project-{n}")).find(|id| !projects.contains_key(id)).expect("unbounded"),
        };
        let dir = self.config.data_dir.join("projects").join(&id);
        if projects.contains_key(&id) || dir.exists() {
            return Err(ServiceError::DuplicateProject(id));
        }

        let meta = ProjectMeta { project_id: id.clone(), master_seed: request.master_seed, roster: request.roster };
        // Build everything in a staging directory and rename it into place.
        let staging = self.config.data_dir.join("projects").join(format!(".{id}.staging"));
        let _ = fs::remove_dir_all(&staging);
        fs::create_dir_all(staging.join("sessions")).map_err(|e| ServiceError::storage(&staging, e))?;
        let project = Project::build(&staging, meta.clone(), request.challenge_set, outputs)?;
        write_atomic(&staging.join("project.json"), &serde_json::to_string_pretty(&meta).expect("meta"))?;
        write_atomic(&staging.join("challenge_set.json"), &challenge_set_to_json(&project.set))?;
        write_atomic(&staging.join("outputs.json"), &outputs_to_json(&project.outputs))?;
        write_atomic(&staging.join("blinding_key.json"), &project.key.to_json())?;
        for ann in project.annotators() {
            let session = &project.sessions[ann];
            write_atomic(&staging.join("sessions").join(format!("{ann}.json")), &session.to_json())?;
        }
        drop(project);
        fs::rename(&staging, &dir).map_err(|e| ServiceError::storage(&dir, e))?;
        let project = Project::load(&dir)?;
        let created = Created {
            project_id: id.clone(),
            annotators: project.roster.len(),
            slots: project.roster.len() * project.slots_per_annotator(),
        };
        projects.insert(id, Arc::new(project));
        Ok(created)
    }

    /// Resolves an annotator token within a project.
    pub fn annotator(&self, project_id: &str, token: &str) -> Result<(Arc<Project>, String), ServiceError> {
        let project = self.project(project_id)?;
        let annotator = project.annotator_for(token).ok_or(ServiceError::Unauthorized)?.to_string();
        Ok((project, annotator))
    }

    pub fn session(&self, project_id: &str, token: &str) -> Result<AnnotationSession, ServiceError> {
        let (project, annotator) = self.annotator(project_id, token)?;
        Ok(project.sessions[&annotator].clone())
    }

    pub fn next_pending(&self, project_id: &str, token: &str) -> Result<Next, ServiceError> {
        let (project, annotator) = self.annotator(project_id, token)?;
        Ok(project.next_pending(&annotator))
    }

    pub fn submit_judgment(&self, project_id: &str, token: &str, submission: &Submission) -> Result<Ack, ServiceError> {
        let (project, annotator) = self.annotator(project_id, token)?;
        project.submit(&annotator, submission)
    }

    pub fn progress(&self, project_id: &str) -> Result<Progress, ServiceError> {
        Ok(self.project(project_id)?.progress())
    }

    pub fn export_judgments(&self, project_id: &str, token: &str) -> Result<Export, ServiceError> {
        let project = self.project(project_id)?;
        if !self.is_admin(token) {
            return Err(if project.annotator_for(token).is_some() { ServiceError::Forbidden } else { ServiceError::Unauthorized });
        }
        project.export()
    }

    /// Loads externally collected judgments (unblinded, keyed by system id)
    /// through the normal submission path. Returns the acknowledgments.
    pub fn ingest(&self, project_id: &str, judgments: &[Judgment]) -> Result<Vec<Ack>, ServiceError> {
        let project = self.project(project_id)?;
        judgments
            .iter()
            .map(|j| {
                if project.session(&j.annotator_id).is_none() {
                    return Err(invalid(format!("annotator `{}` is not on the roster", j.annotator_id)));
                }
                let label = project.key.label_for(&j.annotator_id, &j.item_id, &j.system_id).ok_or_else(|| {
                    invalid(format!("no slot for ({}, {}, {})", j.annotator_id, j.item_id, j.system_id))
                })?;
                let submission = Submission {
                    item_id: j.item_id.clone(),
                    blind_label: label.to_string(),
                    verdict: j.verdict.as_str().to_string(),
                };
                project.submit(&j.annotator_id, &submission)
            })
            .collect()
    }
}

/// Parses a roster document: a bare list or `{"roster": [...]}`.
pub fn parse_roster(bytes: &[u8]) -> Result<Vec<RosterEntry>, ServiceError> {
    parse_records(bytes, "roster").map_err(|e| invalid(format!("roster: {e}")))
}
