use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use chrono::{DateTime, Utc};
use edl_core::nn::NnError;
use edl_core::wire::{self, Mode, WireError};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::trace::TraceLayer;

use crate::jobs::{JobQueue, JobStatus};
use crate::models::ModelRegistry;
use crate::store::Store;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub models: Arc<ModelRegistry>,
    pub queue: JobQueue,
    pub token: Arc<str>,
}

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

pub fn router(state: AppState, max_body_bytes: usize) -> Router {
    let protected = Router::new()
        .route("/datasets", post(submit_dataset).get(list_datasets))
        .route("/inferences", post(create_inference))
        .route("/inferences/{job_id}", get(job_status))
        .route("/models", get(list_models))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .merge(protected)
        .layer(DefaultBodyLimit::max(max_body_bytes))
        .layer(TraceLayer::new_for_http())
        .with_state(state)
}

async fn require_token(State(state): State<AppState>, request: Request, next: Next) -> Response {
    let presented = request
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if presented != Some(&*state.token) {
        return ApiError::new(StatusCode::UNAUTHORIZED, "missing or invalid bearer token").into_response();
    }
    next.run(request).await
}

#[derive(Serialize)]
struct Created {
    dataset_id: String,
}

async fn submit_dataset(State(state): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Created>), ApiError> {
    let store = state.store.clone();
    let entry = tokio::task::spawn_blocking(move || {
        let record = wire::deserialize_record(&body, Mode::Transmission).map_err(|e| match e {
            WireError::SecretKeyPresent => ApiError::new(StatusCode::BAD_REQUEST, e.to_string()),
            other => ApiError::new(StatusCode::BAD_REQUEST, format!("malformed record: {other}")),
        })?;
        if record.public_key.is_none() || record.relin_key.is_none() {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "record must carry public and relinearization keys",
            ));
        }
        store.put_dataset(&body, &record).map_err(internal)
    })
    .await
    .map_err(internal)??;
    tracing::info!(dataset_id = %entry.dataset_id, owner = %entry.metadata.owner, "dataset stored");
    Ok((
        StatusCode::CREATED,
        Json(Created {
            dataset_id: entry.dataset_id,
        }),
    ))
}

#[derive(Deserialize)]
struct OwnerQuery {
    owner: Option<String>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub dataset_id: String,
    pub dataset_name: String,
    pub owner: String,
    pub submitted_at: DateTime<Utc>,
    pub received_at: DateTime<Utc>,
    pub ciphertext_count: usize,
}

async fn list_datasets(State(state): State<AppState>, Query(q): Query<OwnerQuery>) -> Json<Vec<DatasetSummary>> {
    let list = state
        .store
        .list_datasets(q.owner.as_deref())
        .into_iter()
        .map(|d| DatasetSummary {
            dataset_id: d.dataset_id,
            dataset_name: d.metadata.dataset_name,
            owner: d.metadata.owner,
            submitted_at: d.metadata.submitted_at,
            received_at: d.received_at,
            ciphertext_count: d.metadata.ciphertext_count,
        })
        .collect();
    Json(list)
}

#[derive(Deserialize)]
struct InferenceRequest {
    dataset_id: String,
    model_id: String,
}

async fn create_inference(
    State(state): State<AppState>,
    Json(req): Json<InferenceRequest>,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let dataset = state
        .store
        .dataset(&req.dataset_id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown dataset `{}`", req.dataset_id)))?;
    let model = state
        .models
        .get(&req.model_id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown model `{}`", req.model_id)))?;
    let conflict = |m: String| ApiError::new(StatusCode::CONFLICT, m);
    if dataset.metadata.window_length != model.graph.window_length() {
        return Err(conflict(format!(
            "model `{}` expects windows of {}, dataset has {}",
            model.id,
            model.graph.window_length(),
            dataset.metadata.window_length
        )));
    }
    if dataset.metadata.feature_count != model.graph.feature_count() {
        return Err(conflict(format!(
            "model `{}` expects {} features, dataset has {}",
            model.id,
            model.graph.feature_count(),
            dataset.metadata.feature_count
        )));
    }
    if let Err(e @ NnError::DepthExceeded { .. }) = model.graph.precheck(dataset.available_levels) {
        return Err(conflict(e.to_string()));
    }
    let job = state.store.create_job(&dataset.dataset_id, &model.id).map_err(internal)?;
    if state.queue.try_enqueue(job.job_id.clone()).is_err() {
        let _ = state
            .store
            .advance_job(&job.job_id, JobStatus::Failed, Some("inference queue is full".into()), None);
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "inference queue is full"));
    }
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "job_id": job.job_id, "status": job.status })),
    ))
}

async fn job_status(
    State(state): State<AppState>,
    Path(job_id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let job = state
        .store
        .job(&job_id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown job `{job_id}`")))?;
    let mut body = serde_json::to_value(&job).map_err(internal)?;
    if let Some(bytes) = state.store.result(&job_id).map_err(internal)? {
        body["result"] = json!(base64::engine::general_purpose::STANDARD.encode(bytes));
    }
    Ok(Json(body))
}

async fn list_models(State(state): State<AppState>) -> Json<serde_json::Value> {
    let models: Vec<_> = state
        .models
        .iter()
        .map(|m| {
            json!({
                "model_id": m.id,
                "depth": m.depth,
                "window_length": m.graph.window_length(),
                "feature_count": m.graph.feature_count(),
            })
        })
        .collect();
    Json(json!(models))
}
