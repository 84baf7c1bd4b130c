//! Append-only judgment log: one JSON record per line.
//!
//! A record is acknowledged only after its line, newline included, has been
//! written and synced. On open, complete lines are replayed and a trailing
//! partial line (an append cut short by a crash) is cut off so later appends
//! start on a clean boundary.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use challenge_core::scoring::Verdict;
use challenge_core::session::BlindJudgment;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub annotator_id: String,
    pub item_id: String,
    pub blind_label: String,
    pub verdict: Verdict,
    pub revision: u64,
    pub timestamp: u64,
}

impl From<&JudgmentRecord> for BlindJudgment {
    fn from(r: &JudgmentRecord) -> Self {
        BlindJudgment {
            annotator_id: r.annotator_id.clone(),
            item_id: r.item_id.clone(),
            blind_label: r.blind_label.clone(),
            verdict: r.verdict,
            revision: r.revision,
            timestamp: r.timestamp,
        }
    }
}

/// `(annotator_id, item_id, blind_label)`
pub type Slot = (String, String, String);

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("judgment log {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("judgment log {path}, line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
}

#[derive(Debug)]
pub struct JudgmentLog {
    path: PathBuf,
    file: File,
    len: u64,
    records: Vec<JudgmentRecord>,
    effective: BTreeMap<Slot, usize>,
}

impl JudgmentLog {
    pub fn open(path: &Path) -> Result<Self, LogError> {
        let io = |source| LogError::Io { path: path.to_path_buf(), source };
        let mut file = OpenOptions::new().read(true).create(true).append(true).open(path).map_err(io)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(io)?;

        let complete = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |p| p + 1);
        if complete < bytes.len() {
            file.set_len(complete as u64).map_err(io)?;
            file.sync_all().map_err(io)?;
        }
        let mut log = JudgmentLog {
            path: path.to_path_buf(),
            file,
            len: complete as u64,
            records: Vec::new(),
            effective: BTreeMap::new(),
        };
        for (n, line) in bytes[..complete].split(|b| *b == b'\n').enumerate() {
            if line.is_empty() {
                continue;
            }
            let record: JudgmentRecord = serde_json::from_slice(line).map_err(|e| LogError::Corrupt {
                path: path.to_path_buf(),
                line: n + 1,
                message: e.to_string(),
            })?;
            log.remember(record);
        }
        Ok(log)
    }

    fn remember(&mut self, record: JudgmentRecord) {
        let slot = (record.annotator_id.clone(), record.item_id.clone(), record.blind_label.clone());
        let index = self.records.len();
        match self.effective.get(&slot) {
            Some(&prev) if self.records[prev].revision >= record.revision => {}
            _ => {
                self.effective.insert(slot, index);
            }
        }
        self.records.push(record);
    }

    /// Next revision number for a slot.
    pub fn next_revision(&self, annotator_id: &str, item_id: &str, blind_label: &str) -> u64 {
        let slot = (annotator_id.to_string(), item_id.to_string(), blind_label.to_string());
        self.effective.get(&slot).map_or(0, |&i| self.records[i].revision + 1)
    }

    /// Writes and syncs one record. On failure the file is rolled back to
    /// its previous length and the record is not retained.
    pub fn append(&mut self, record: JudgmentRecord) -> Result<(), LogError> {
        let mut line = serde_json::to_vec(&record).expect("record serializes");
        line.push(b'\n');
        let written = self.file.write_all(&line).and_then(|_| self.file.sync_data());
        if let Err(source) = written {
            let _ = self.file.set_len(self.len);
            let _ = self.file.seek(SeekFrom::End(0));
            return Err(LogError::Io { path: self.path.clone(), source });
        }
        self.len += line.len() as u64;
        self.remember(record);
        Ok(())
    }

    /// Every record in log order, revisions included.
    pub fn records(&self) -> &[JudgmentRecord] {
        &self.records
    }

    /// Highest-revision record per slot, in slot order.
    pub fn effective(&self) -> impl Iterator<Item = &JudgmentRecord> {
        self.effective.values().map(|&i| &self.records[i])
    }

    pub fn effective_for(&self, annotator_id: &str, item_id: &str, blind_label: &str) -> Option<&JudgmentRecord> {
        let slot = (annotator_id.to_string(), item_id.to_string(), blind_label.to_string());
        self.effective.get(&slot).map(|&i| &self.records[i])
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(label: &str, revision: u64, verdict: Verdict) -> JudgmentRecord {
        JudgmentRecord {
            annotator_id: "a".into(),
            item_id: "S1a".into(),
            blind_label: label.into(),
            verdict,
            revision,
            timestamp: 1,
        }
    }

    #[test]
    fn append_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("judgments.log");
        {
            let mut log = JudgmentLog::open(&path).unwrap();
            assert_eq!(log.next_revision("a", "S1a", "A"), 0);
            log.append(record("A", 0, Verdict::No)).unwrap();
            assert_eq!(log.next_revision("a", "S1a", "A"), 1);
            log.append(record("A", 1, Verdict::Yes)).unwrap();
            log.append(record("B", 0, Verdict::NotApplicable)).unwrap();
        }
        let log = JudgmentLog::open(&path).unwrap();
        assert_eq!(log.records().len(), 3);
        let eff: Vec<_> = log.effective().map(|r| (r.blind_label.as_str(), r.verdict)).collect();
        assert_eq!(eff, [("A", Verdict::Yes), ("B", Verdict::NotApplicable)]);
    }

    #[test]
    fn partial_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("judgments.log");
        {
            let mut log = JudgmentLog::open(&path).unwrap();
            log.append(record("A", 0, Verdict::Yes)).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"annotator_id\":\"a\",\"ite").unwrap();
        drop(f);
        let mut log = JudgmentLog::open(&path).unwrap();
        assert_eq!(log.records().len(), 1);
        log.append(record("B", 0, Verdict::No)).unwrap();
        drop(log);
        assert_eq!(JudgmentLog::open(&path).unwrap().records().len(), 2);
    }

    #[test]
    fn corrupt_complete_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("judgments.log");
        std::fs::write(&path, "not json\n").unwrap();
        assert!(matches!(JudgmentLog::open(&path), Err(LogError::Corrupt { line: 1, .. })));
    }
}
