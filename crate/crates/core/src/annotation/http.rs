//! JSON-over-HTTP front of the annotation store.

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;

use super::alpha::agreement_report;
use super::stats::dataset_statistics;
use super::store::AnnotationStore;
use super::types::{AnnotationRecord, GoldExport};
use crate::error::Error;

pub struct AppState {
    store: Mutex<AnnotationStore>,
    comment_author: HashMap<String, String>,
}

impl AppState {
    pub fn new(store: AnnotationStore, comment_author: HashMap<String, String>) -> Arc<Self> {
        Arc::new(Self {
            store: Mutex::new(store),
            comment_author,
        })
    }

    /// Every stored record, for export.
    pub fn records(&self) -> Vec<AnnotationRecord> {
        self.store().records().cloned().collect()
    }

    fn store(&self) -> MutexGuard<'_, AnnotationStore> {
        // a panic mid-request leaves the store usable: every mutation is
        // logged before it is applied
        self.store.lock().unwrap_or_else(|e| e.into_inner())
    }
}

struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Error::Unauthorized(_) => StatusCode::FORBIDDEN,
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::Precondition(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = Json(serde_json::json!({ "error": self.0.to_string() }));
        (status, body).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self(Error::Validation(e.body_text()))
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Deserialize)]
struct NextQuery {
    annotator: String,
}

#[derive(Deserialize)]
struct SkipRequest {
    annotator_id: String,
    article_id: String,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/tasks/next", get(next_task))
        .route("/annotations", post(submit))
        .route("/skip", post(skip))
        .route("/gold", get(gold))
        .route("/agreement", get(agreement))
        .route("/stats", get(stats))
        .route("/records", get(records))
        .with_state(state)
}

async fn next_task(State(state): State<Arc<AppState>>, Query(q): Query<NextQuery>) -> Response {
    match state.store().next_task(&q.annotator) {
        Some(task) => Json(task).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

async fn submit(
    State(state): State<Arc<AppState>>,
    body: Result<Json<AnnotationRecord>, JsonRejection>,
) -> ApiResult<Json<serde_json::Value>> {
    let Json(mut record) = body?;
    if record.submitted_at.is_empty() {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or_default();
        record.submitted_at = secs.to_string();
    }
    state.store().submit(record)?;
    Ok(Json(serde_json::json!({ "status": "stored" })))
}

async fn skip(
    State(state): State<Arc<AppState>>,
    body: Result<Json<SkipRequest>, JsonRejection>,
) -> ApiResult<Json<super::store::SkipOutcome>> {
    let Json(req) = body?;
    Ok(Json(state.store().skip_article(&req.annotator_id, &req.article_id)?))
}

async fn gold(State(state): State<Arc<AppState>>) -> ApiResult<Response> {
    let gold = state.store().gold()?;
    let rows: Vec<GoldExport<'_>> = gold.iter().map(GoldExport::from).collect();
    Ok(Json(rows).into_response())
}

async fn agreement(State(state): State<Arc<AppState>>) -> Response {
    let store = state.store();
    Json(agreement_report(store.records())).into_response()
}

async fn stats(State(state): State<Arc<AppState>>) -> ApiResult<Response> {
    let store = state.store();
    let gold = store.gold()?;
    let records: Vec<AnnotationRecord> = store.records().cloned().collect();
    let comment_article: HashMap<String, String> = store
        .tasks()
        .values()
        .flat_map(|t| t.comments.iter())
        .map(|c| (c.comment_id.clone(), c.article_id.clone()))
        .collect();
    let report = dataset_statistics(&gold, &records, &comment_article, &state.comment_author);
    Ok(Json(report).into_response())
}

async fn records(State(state): State<Arc<AppState>>) -> Response {
    let records: Vec<AnnotationRecord> = state.store().records().cloned().collect();
    Json(records).into_response()
}

/// Serves the API until `shutdown` resolves.
pub async fn serve(
    addr: SocketAddr,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("annotation API listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
