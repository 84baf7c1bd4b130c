#![allow(dead_code)]

use std::path::Path;

use challenge_core::fixture;
use challenge_core::model::{ChallengeSet, SystemOutput};
use challenge_service::{CreateProject, RosterEntry, Service, ServiceConfig};

pub const ADMIN: &str = "admin-secret";

/// System ids chosen so that any leak is easy to spot in a response body.
pub const SYSTEMS: [&str; 2] = ["zz-system-one", "zz-system-two"];

pub fn open(dir: &Path) -> Service {
    Service::open(ServiceConfig { data_dir: dir.to_path_buf(), admin_token: ADMIN.into() }).unwrap()
}

pub fn roster(n: usize) -> Vec<RosterEntry> {
    (0..n).map(|k| RosterEntry { annotator_id: format!("rater{k}"), token: format!("token-{k}") }).collect()
}

/// The first `items` items of the bundled set, with one output per toy system.
pub fn toy_request(items: usize, annotators: usize, seed: u64) -> CreateProject {
    let mut set: ChallengeSet = fixture::challenge_set();
    set.items.truncate(items);
    let outputs = set
        .items
        .iter()
        .flat_map(|i| {
            SYSTEMS.iter().map(move |s| SystemOutput {
                system_id: s.to_string(),
                item_id: i.id.clone(),
                translation: format!("{} ({})", i.reference, &s[10..]),
            })
        })
        .collect();
    CreateProject { project_id: Some("toy".into()), challenge_set: set, outputs, roster: roster(annotators), master_seed: seed }
}

/// The full bundled set with the three systems' real outputs.
pub fn embedded_request(annotators: usize) -> CreateProject {
    let set = fixture::challenge_set();
    let outputs = fixture::outputs(&set).iter().collect();
    CreateProject {
        project_id: Some("appendix".into()),
        challenge_set: set,
        outputs,
        roster: roster(annotators),
        master_seed: 2017,
    }
}
