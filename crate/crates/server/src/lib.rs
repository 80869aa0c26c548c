//! JSON-over-HTTP front end for the annotation store, plus static serving
//! of the annotator UI bundle.
//!
//! | method | path | body / query | result |
//! |---|---|---|---|
//! | POST | `/sessions` | `SessionSpec` | 201, session id and pending judgments |
//! | GET | `/sessions` | | session ids |
//! | GET | `/sessions/{id}/next` | `?evaluator=` | next item or `{"status":"done"}` |
//! | POST | `/sessions/{id}/ratings` | `RatingRecord` | 201, the record with its `seq` |
//! | GET | `/sessions/{id}/summary` | | aggregated report |
//!
//! Errors are `{"error": {"kind", "message"}}` with 400 (bad request or
//! rating), 404 (unknown session or evaluator), 409 (duplicate rating).

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use disco_core::annotation::{AnnotationError, AnnotationStore, SessionSpec};
use disco_core::eval::{AggregationParams, RatingRecord};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

#[derive(Clone)]
struct AppState {
    store: Arc<AnnotationStore>,
    params: AggregationParams,
}

struct ApiError(AnnotationError);

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self.0 {
            AnnotationError::Argument(_) => (StatusCode::BAD_REQUEST, "argument"),
            AnnotationError::Validation(_) => (StatusCode::BAD_REQUEST, "validation"),
            AnnotationError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            AnnotationError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            AnnotationError::Corrupt { .. } | AnnotationError::Io { .. } => {
                tracing::error!(error = %self.0, "store failure");
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        (status, Json(json!({ "error": { "kind": kind, "message": self.0.to_string() } }))).into_response()
    }
}

async fn create_session(State(app): State<AppState>, Json(spec): Json<SessionSpec>) -> Result<Response, ApiError> {
    let s = app.store.create_session(spec)?;
    let body = json!({
        "id": s.id,
        "mode": s.mode,
        "items": s.items.len(),
        "evaluators": s.evaluators,
        "pending_judgments": s.items.len() * s.evaluators.len(),
    });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn list_sessions(State(app): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({ "sessions": app.store.session_ids() }))
}

#[derive(Deserialize)]
struct NextQuery {
    evaluator: String,
}

async fn next_item(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<NextQuery>,
) -> Result<Response, ApiError> {
    Ok(Json(app.store.next_item(&id, &q.evaluator)?).into_response())
}

async fn submit_rating(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(record): Json<RatingRecord>,
) -> Result<Response, ApiError> {
    let store = app.store.clone();
    let accepted = tokio::task::spawn_blocking(move || store.submit_rating(&id, record))
        .await
        .map_err(|e| ApiError(AnnotationError::Argument(e.to_string())))??;
    Ok((StatusCode::CREATED, Json(accepted)).into_response())
}

async fn summary(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(app.store.summary(&id, &app.params)?).into_response())
}

async fn health() -> &'static str {
    "ok"
}

/// The API router. When `static_dir` is given, unmatched paths are served
/// from it.
pub fn router(store: Arc<AnnotationStore>, static_dir: Option<PathBuf>, params: AggregationParams) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}/next", get(next_item))
        .route("/sessions/{id}/ratings", post(submit_rating))
        .route("/sessions/{id}/summary", get(summary))
        .with_state(AppState { store, params });
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until Ctrl-C.
pub async fn serve(
    addr: SocketAddr,
    store: Arc<AnnotationStore>,
    static_dir: Option<PathBuf>,
    params: AggregationParams,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "annotation service listening");
    axum::serve(listener, router(store, static_dir, params))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
