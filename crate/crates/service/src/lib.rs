//! File-backed annotation service: hosts projects, hands annotators their
//! blinded work, records judgments in an append-only log and exports them
//! unblinded for scoring.

pub mod error;
pub mod http;
pub mod log;
pub mod project;

pub use error::{ErrorBody, ServiceError};
pub use http::{router, serve};
pub use log::{JudgmentLog, JudgmentRecord};
pub use project::{
    parse_roster, Ack, CreateProject, Created, Export, Next, PairCompleteness, PendingItem, Progress, Project,
    RosterEntry, Service, ServiceConfig, Submission, Tally,
};

/// Environment variable naming the data directory.
pub const DATA_DIR_ENV: &str = "CHALLENGE_DATA_DIR";
/// Environment variable holding the admin token when no config file is given.
pub const ADMIN_TOKEN_ENV: &str = "CHALLENGE_ADMIN_TOKEN";
