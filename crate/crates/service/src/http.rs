//! HTTP routes. Every body is JSON; errors are `{code, message, detail}`.
//!
//! | method | path                         | auth      |
//! |--------|------------------------------|-----------|
//! | POST   | /projects                    | admin     |
//! | GET    | /projects/{id}/session       | annotator |
//! | GET    | /projects/{id}/next          | annotator |
//! | POST   | /projects/{id}/judgments     | annotator |
//! | GET    | /projects/{id}/progress      | any token |
//! | GET    | /projects/{id}/export        | admin     |

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;

use crate::error::ServiceError;
use crate::project::{CreateProject, Service, Submission};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

type ApiResult<T> = Result<(StatusCode, Json<T>), ServiceError>;

fn ok<T: Serialize>(status: StatusCode, body: T) -> ApiResult<T> {
    Ok((status, Json(body)))
}

fn bearer(headers: &HeaderMap) -> Result<String, ServiceError> {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
        .ok_or(ServiceError::Unauthorized)
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload.map(|Json(v)| v).map_err(|e| ServiceError::BadRequest(e.body_text()))
}

/// Runs blocking work (file writes, fsync) off the async workers.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f).await.expect("service task panicked")
}

async fn create_project(
    State(service): State<Arc<Service>>,
    headers: HeaderMap,
    payload: Result<Json<CreateProject>, JsonRejection>,
) -> ApiResult<crate::project::Created> {
    let token = bearer(&headers)?;
    if !service.is_admin(&token) {
        return Err(ServiceError::Forbidden);
    }
    let request = body(payload)?;
    let created = blocking(move || service.create_project(request)).await?;
    ok(StatusCode::CREATED, created)
}

async fn session(
    State(service): State<Arc<Service>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<challenge_core::session::AnnotationSession> {
    ok(StatusCode::OK, service.session(&id, &bearer(&headers)?)?)
}

async fn next(
    State(service): State<Arc<Service>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<crate::project::Next> {
    ok(StatusCode::OK, service.next_pending(&id, &bearer(&headers)?)?)
}

async fn submit(
    State(service): State<Arc<Service>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    payload: Result<Json<Submission>, JsonRejection>,
) -> ApiResult<crate::project::Ack> {
    let token = bearer(&headers)?;
    let submission = body(payload)?;
    let ack = blocking(move || service.submit_judgment(&id, &token, &submission)).await?;
    ok(StatusCode::OK, ack)
}

async fn progress(
    State(service): State<Arc<Service>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<crate::project::Progress> {
    let token = bearer(&headers)?;
    let project = service.project(&id)?;
    if !service.is_admin(&token) && project.annotator_for(&token).is_none() {
        return Err(ServiceError::Unauthorized);
    }
    ok(StatusCode::OK, project.progress())
}

async fn export(
    State(service): State<Arc<Service>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<crate::project::Export> {
    ok(StatusCode::OK, service.export_judgments(&id, &bearer(&headers)?)?)
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/projects", post(create_project))
        .route("/projects/{id}/session", get(session))
        .route("/projects/{id}/next", get(next))
        .route("/projects/{id}/judgments", post(submit))
        .route("/projects/{id}/progress", get(progress))
        .route("/projects/{id}/export", get(export))
        .with_state(service)
}

/// Serves until the listener fails or the process is stopped.
pub async fn serve(service: Arc<Service>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(service)).await
}
