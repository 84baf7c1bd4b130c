use serde::Serialize;
use serde_json::{json, Value};

use crate::log::LogError;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown project `{0}`")]
    UnknownProject(String),
    #[error("project `{0}` already exists")]
    DuplicateProject(String),
    #[error("missing or invalid bearer token")]
    Unauthorized,
    #[error("admin token required")]
    Forbidden,
    #[error("invalid project input: {message}")]
    Invalid { message: String, detail: Value },
    #[error("output matrix incomplete: {} missing pairs", .0.len())]
    IncompleteMatrix(Vec<(String, String)>),
    #[error("unknown slot ({item_id}, {blind_label}) for this annotator")]
    UnknownSlot { item_id: String, blind_label: String },
    #[error("{0}")]
    InvalidVerdict(String),
    #[error("malformed request body: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("storage failure at {path}: {source}")]
    Storage { path: String, source: std::io::Error },
}

/// Error body returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub detail: Value,
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownProject(_) => "unknown-project",
            ServiceError::DuplicateProject(_) => "duplicate-project",
            ServiceError::Unauthorized => "unauthorized",
            ServiceError::Forbidden => "forbidden",
            ServiceError::Invalid { .. } => "invalid-input",
            ServiceError::IncompleteMatrix(_) => "incomplete-matrix",
            ServiceError::UnknownSlot { .. } => "unknown-slot",
            ServiceError::InvalidVerdict(_) => "invalid-verdict",
            ServiceError::BadRequest(_) => "bad-request",
            ServiceError::Log(_) | ServiceError::Storage { .. } => "storage",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            ServiceError::UnknownProject(_) => 404,
            ServiceError::DuplicateProject(_) => 409,
            ServiceError::Unauthorized => 401,
            ServiceError::Forbidden => 403,
            ServiceError::Invalid { .. }
            | ServiceError::IncompleteMatrix(_)
            | ServiceError::UnknownSlot { .. }
            | ServiceError::InvalidVerdict(_)
            | ServiceError::BadRequest(_) => 400,
            ServiceError::Log(_) | ServiceError::Storage { .. } => 500,
        }
    }

    pub fn body(&self) -> ErrorBody {
        let detail = match self {
            ServiceError::Invalid { detail, .. } => detail.clone(),
            ServiceError::IncompleteMatrix(missing) => json!({
                "missing": missing.iter().map(|(s, i)| json!({"system_id": s, "item_id": i})).collect::<Vec<_>>()
            }),
            ServiceError::UnknownSlot { item_id, blind_label } => {
                json!({"item_id": item_id, "blind_label": blind_label})
            }
            ServiceError::InvalidVerdict(_) => json!({"allowed": ["yes", "no", "not-applicable"]}),
            _ => Value::Null,
        };
        ErrorBody { code: self.code().to_string(), message: self.to_string(), detail }
    }

    pub(crate) fn storage(path: &std::path::Path, source: std::io::Error) -> Self {
        ServiceError::Storage { path: path.display().to_string(), source }
    }
}
