// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! HTTP routes.
//!
//! | Method | Path | |
//! |---|---|---|
//! | POST | `/api/jobs` | multipart: `edges`, optional `base_knowledge`, optional `config` (JSON) |
//! | GET | `/api/jobs/{id}` | status and diagnostics |
//! | GET | `/api/jobs/{id}/results` | `sort`, `order`, `page` (from 0), `page_size` |
//! | POST | `/api/jobs/{id}/annotations` | `{"publisher": "...", "score": 75}` |
//! | DELETE | `/api/jobs/{id}/annotations/{publisher}` | undo a user annotation |
//! | GET | `/api/jobs/{id}/suggestions` | `limit` |
//! | GET | `/api/jobs/{id}/summary` | histograms and counts |
//! | GET | `/api/jobs/{id}/export` | CSV, `only=annotated` to filter |
//! | GET | `/api/demo/{file}` | `edges.csv` or `base_knowledge.csv`, demo mode only |
//!
//! Errors are JSON objects `{"error": code, "message": text}`, with a
//! `rows` array of `{line, reason}` for upload parse failures.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tropic_core::export::write_csv;
use tropic_core::guidance::{GuidanceError, ImpactRank, Summary};
use tropic_core::ingestion::{
    parse_base_knowledge, parse_edge_list, BaseKnowledge, IngestError, ParseOptions, RowError,
};
use tropic_core::scoring::PublisherRecord;

use crate::demo::DemoFixtures;
use crate::settings::ConfigOverrides;
use crate::store::{Mutation, Store, StoreError};

/// Uploads are capped by record count, not bytes; this only guards memory.
const MAX_BODY_BYTES: usize = 512 * 1024 * 1024;
const DEFAULT_PAGE_SIZE: usize = 50;
const MAX_PAGE_SIZE: usize = 1000;
const DEFAULT_SUGGESTIONS: usize = 10;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub demo: Option<Arc<DemoFixtures>>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/jobs", post(create_job))
        .route("/api/jobs/{id}", get(get_status))
        .route("/api/jobs/{id}/results", get(get_results))
        .route("/api/jobs/{id}/annotations", post(annotate))
        .route("/api/jobs/{id}/annotations/{publisher}", delete(remove_annotation))
        .route("/api/jobs/{id}/suggestions", get(get_suggestions))
        .route("/api/jobs/{id}/summary", get(get_summary))
        .route("/api/jobs/{id}/export", get(export_csv))
        .route("/api/demo/{file}", get(demo_file))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    rows: Option<Vec<RowError>>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            rows: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code, "message": self.message });
        if let Some(rows) = self.rows {
            body["rows"] = json!(rows);
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::UnknownJob(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_job", message),
            StoreError::NotReady(_) => ApiError::new(StatusCode::CONFLICT, "not_ready", message),
            StoreError::Failed(_) => ApiError::new(StatusCode::CONFLICT, "job_failed", message),
            StoreError::Guidance(g) => match g {
                GuidanceError::UnknownPublisher(_) => {
                    ApiError::new(StatusCode::NOT_FOUND, "unknown_publisher", message)
                }
                GuidanceError::ScoreOutOfRange(_) => {
                    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "score_out_of_range", message)
                }
                GuidanceError::NotUserAnnotated(_) => {
                    ApiError::new(StatusCode::CONFLICT, "not_user_annotated", message)
                }
                GuidanceError::Scoring(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "scoring", message),
            },
            StoreError::Snapshot { .. } => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "snapshot", message),
        }
    }
}

fn ingest_error(file: &str, e: IngestError) -> ApiError {
    let message = format!("{file}: {e}");
    match e {
        IngestError::LimitExceeded { .. } => ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "limit_exceeded", message),
        other => ApiError {
            rows: Some(other.row_errors()),
            ..ApiError::new(StatusCode::BAD_REQUEST, "parse_error", message)
        },
    }
}

async fn create_job(State(app): State<AppState>, mut multipart: Multipart) -> Result<Response, ApiError> {
    let bad_upload = |m: String| ApiError::new(StatusCode::BAD_REQUEST, "bad_upload", m);
    let (mut edges, mut base, mut config) = (None, None, None);
    while let Some(field) = multipart.next_field().await.map_err(|e| bad_upload(e.to_string()))? {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field.bytes().await.map_err(|e| bad_upload(e.to_string()))?;
        match name.as_str() {
            "edges" => edges = Some(bytes),
            "base_knowledge" => base = Some(bytes),
            "config" => config = Some(bytes),
            other => return Err(bad_upload(format!("unexpected field {other:?}"))),
        }
    }
    let edges = edges.ok_or_else(|| bad_upload("missing `edges` file".into()))?;

    let overrides: ConfigOverrides = match config.as_deref() {
        None => ConfigOverrides::default(),
        Some(b) if b.iter().all(u8::is_ascii_whitespace) => ConfigOverrides::default(),
        Some(b) => serde_json::from_slice(b)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_config", e.to_string()))?,
    };
    let pipeline = overrides
        .apply(app.store.settings().pipeline)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_config", e.to_string()))?;

    let options = ParseOptions {
        limit: app.store.settings().max_edges,
        ..Default::default()
    };
    let edge_list = parse_edge_list(edges.as_ref(), &options).map_err(|e| ingest_error("edges", e))?;
    let baseline = match base {
        Some(b) if !b.iter().all(u8::is_ascii_whitespace) => {
            parse_base_knowledge(b.as_ref()).map_err(|e| ingest_error("base_knowledge", e))?
        }
        _ => BaseKnowledge::new(),
    };
    let n_records = edge_list.len();
    let id = app.store.create_job(edge_list, baseline, pipeline);
    tracing::info!(job = %id, n_records, "job created");
    Ok((StatusCode::ACCEPTED, Json(json!({ "id": id, "n_records": n_records }))).into_response())
}

async fn get_status(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(app.store.status(&id)?).into_response())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SortKey {
    Publisher,
    State,
    Score,
    Confidence,
    NVoters,
    NNecUrls,
    NShares,
}

impl SortKey {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "publisher" => SortKey::Publisher,
            "state" => SortKey::State,
            "score" => SortKey::Score,
            "confidence" => SortKey::Confidence,
            "n_voters" => SortKey::NVoters,
            "n_nec_urls" => SortKey::NNecUrls,
            "n_shares" => SortKey::NShares,
            _ => return None,
        })
    }

    /// Compares on this key only; absent scores sort below any score.
    fn compare(self, a: &PublisherRecord, b: &PublisherRecord) -> Ordering {
        match self {
            SortKey::Publisher => a.publisher.cmp(&b.publisher),
            SortKey::State => a.state.cmp(&b.state),
            SortKey::Score => match (a.score, b.score) {
                (Some(x), Some(y)) => x.total_cmp(&y),
                (x, y) => x.is_some().cmp(&y.is_some()),
            },
            SortKey::Confidence => a.confidence.total_cmp(&b.confidence),
            SortKey::NVoters => a.stats.n_voters.cmp(&b.stats.n_voters),
            SortKey::NNecUrls => a.stats.n_nec_urls.cmp(&b.stats.n_nec_urls),
            SortKey::NShares => a.stats.n_shares.cmp(&b.stats.n_shares),
        }
    }
}

fn unprocessable(code: &'static str, message: String) -> ApiError {
    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
}

fn query_usize(q: &HashMap<String, String>, key: &str, default: usize) -> Result<usize, ApiError> {
    match q.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| unprocessable("bad_query", format!("{key}={v:?} is not a non-negative integer"))),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResultsPage {
    pub total: usize,
    pub page: usize,
    pub page_size: usize,
    pub records: Vec<PublisherRecord>,
}

async fn get_results(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let key = match q.get("sort") {
        None => SortKey::Publisher,
        Some(s) => SortKey::parse(s).ok_or_else(|| unprocessable("bad_sort_key", format!("unknown sort key {s:?}")))?,
    };
    let descending = match q.get("order").map(String::as_str) {
        None | Some("asc") => false,
        Some("desc") => true,
        Some(o) => return Err(unprocessable("bad_query", format!("order must be asc or desc, not {o:?}"))),
    };
    let page = query_usize(&q, "page", 0)?;
    let page_size = query_usize(&q, "page_size", DEFAULT_PAGE_SIZE)?;
    if page_size == 0 || page_size > MAX_PAGE_SIZE {
        return Err(unprocessable("bad_query", format!("page_size must be in 1..={MAX_PAGE_SIZE}")));
    }
    let state = app.store.state(&id)?;
    let mut records: Vec<&PublisherRecord> = state.records().iter().collect();
    records.sort_by(|a, b| {
        let primary = key.compare(a, b);
        let primary = if descending { primary.reverse() } else { primary };
        primary.then_with(|| a.publisher.cmp(&b.publisher))
    });
    let total = records.len();
    let records = records
        .into_iter()
        .skip(page.saturating_mul(page_size))
        .take(page_size)
        .cloned()
        .collect();
    Ok(Json(ResultsPage {
        total,
        page,
        page_size,
        records,
    })
    .into_response())
}

#[derive(Debug, Deserialize)]
struct AnnotationRequest {
    publisher: String,
    score: i64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnnotationResponse {
    /// The record of the publisher that was (un)annotated.
    pub record: PublisherRecord,
    /// Every record whose state, score, confidence or label changed.
    pub changed: Vec<PublisherRecord>,
    pub summary: Summary,
    pub unprofilable_voters: usize,
}

fn mutation_response(m: &Mutation, publisher: &str) -> Result<Response, ApiError> {
    let id = tropic_core::ingestion::PublisherId::from_domain(publisher)
        .map_err(|e| ApiError::new(StatusCode::NOT_FOUND, "unknown_publisher", e.to_string()))?;
    let record = m
        .after
        .record(&id)
        .cloned()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_publisher", publisher.to_string()))?;
    let changed = m
        .after
        .records()
        .iter()
        .zip(m.before.records())
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.clone())
        .collect();
    Ok(Json(AnnotationResponse {
        record,
        changed,
        summary: m.after.summary(),
        unprofilable_voters: m.after.unprofilable_voters(),
    })
    .into_response())
}

async fn run_blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))
}

async fn annotate(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<AnnotationRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body.map_err(|e| unprocessable("bad_body", e.body_text()))?;
    let store = app.store.clone();
    let publisher = req.publisher.clone();
    let m = run_blocking(move || store.annotate(&id, &publisher, req.score)).await??;
    mutation_response(&m, &req.publisher)
}

async fn remove_annotation(
    State(app): State<AppState>,
    Path((id, publisher)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let store = app.store.clone();
    let p = publisher.clone();
    let m = run_blocking(move || store.remove_annotation(&id, &p)).await??;
    mutation_response(&m, &publisher)
}

async fn get_suggestions(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let limit = query_usize(&q, "limit", DEFAULT_SUGGESTIONS)?;
    let state = app.store.state(&id)?;
    let suggestions: Vec<ImpactRank> = state.rank_candidates().into_iter().take(limit).collect();
    Ok(Json(json!({
        "suggestions": suggestions,
        "unprofilable_voters": state.unprofilable_voters(),
    }))
    .into_response())
}

async fn get_summary(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(app.store.state(&id)?.summary()).into_response())
}

async fn export_csv(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let only_annotated = match q.get("only").map(String::as_str) {
        None => false,
        Some("annotated") => true,
        Some(o) => return Err(unprocessable("bad_query", format!("only={o:?} is not supported"))),
    };
    let state = app.store.state(&id)?;
    let csv = write_csv(state.records(), only_annotated);
    let disposition = format!("attachment; filename=\"tropic-{id}.csv\"");
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8".to_string()),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        csv,
    )
        .into_response())
}

async fn demo_file(State(app): State<AppState>, Path(file): Path<String>) -> Result<Response, ApiError> {
    let not_found = || ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no demo file {file:?}"));
    let demo = app.demo.as_ref().ok_or_else(not_found)?;
    let body = match file.as_str() {
        "edges.csv" => demo.edges_csv.clone(),
        "base_knowledge.csv" => demo.base_knowledge_csv.clone(),
        _ => return Err(not_found()),
    };
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], body).into_response())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Settings;
    use axum::body::Body;
    use axum::http::Request;
    use tower::ServiceExt;

    #[tokio::test]
    async fn unfinished_jobs_answer_409() {
        let store = Store::new(Settings::default());
        store.insert_queued("pending");
        let app = router(AppState { store, demo: None });
        for path in ["results?sort=n_voters", "suggestions", "summary", "export"] {
            let request = Request::get(format!("/api/jobs/pending/{path}")).body(Body::empty()).unwrap();
            let response = app.clone().oneshot(request).await.unwrap();
            assert_eq!(response.status(), StatusCode::CONFLICT, "{path}");
        }
        let request = Request::post("/api/jobs/pending/annotations")
            .header("content-type", "application/json")
            .body(Body::from(r#"{"publisher":"a.com","score":5}"#))
            .unwrap();
        assert_eq!(app.clone().oneshot(request).await.unwrap().status(), StatusCode::CONFLICT);
        let request = Request::get("/api/jobs/pending").body(Body::empty()).unwrap();
        assert_eq!(app.oneshot(request).await.unwrap().status(), StatusCode::OK);
    }

    #[test]
    fn sort_keys() {
        for key in ["publisher", "state", "score", "confidence", "n_voters", "n_nec_urls", "n_shares"] {
            assert!(SortKey::parse(key).is_some(), "{key}");
        }
        assert_eq!(SortKey::parse("label"), None);
    }
}
