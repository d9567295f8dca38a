//! HTTP routes. Every mutating route runs one engine operation under the
//! session's lock, persists the session, and may carry an `x-request-id`
//! header so a retried request gets the original reply.

use std::collections::BTreeSet;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use ii20_core::engine::{Engine, EngineConfig, FeedbackBatch, SortOrder, SuggestRequest, ViewSort};
use ii20_core::session::{Bucket, TransferMode};
use ii20_core::{BucketId, ImageId, Target};

use crate::error::ApiError;
use crate::store::{now_secs, SessionStore, StoredReply};

pub const REQUEST_ID_HEADER: &str = "x-request-id";

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info))
        .route("/sessions/{id}/feedback", post(feedback))
        .route("/sessions/{id}/suggest", post(suggest))
        .route("/sessions/{id}/fast-forward", post(fast_forward))
        .route("/sessions/{id}/fast-forward/commit", post(commit_fast_forward))
        .route("/sessions/{id}/buckets", get(list_buckets).post(create_bucket))
        .route(
            "/sessions/{id}/buckets/{bucket}",
            get(get_bucket).patch(update_bucket).delete(delete_bucket),
        )
        .route("/sessions/{id}/buckets/{bucket}/view", get(bucket_view))
        .route("/sessions/{id}/transfer", post(transfer))
        .route("/images/{image}", get(image))
        .with_state(store)
}

// ----- plumbing -------------------------------------------------------------

fn request_id(headers: &HeaderMap) -> Result<Option<String>, ApiError> {
    match headers.get(REQUEST_ID_HEADER) {
        None => Ok(None),
        Some(v) => v
            .to_str()
            .ok()
            .filter(|s| !s.is_empty())
            .map(|s| Some(s.to_owned()))
            .ok_or_else(|| ApiError::BadRequest(format!("malformed {REQUEST_ID_HEADER} header"))),
    }
}

fn replay(reply: &StoredReply, route: &str) -> Result<Response, ApiError> {
    if reply.route != route {
        return Err(ApiError::Unprocessable(format!(
            "request id {} was already used for {}",
            reply.request_id, reply.route
        )));
    }
    let status = StatusCode::from_u16(reply.status).map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok((status, Json(reply.body.clone())).into_response())
}

/// Run `op` on the session's engine, then persist. Fails with 409 instead of
/// waiting when another request holds the session.
async fn mutate<T, F>(
    store: Arc<SessionStore>,
    id: String,
    headers: &HeaderMap,
    route: String,
    status: StatusCode,
    op: F,
) -> Result<Response, ApiError>
where
    T: Serialize,
    F: FnOnce(&mut Engine) -> Result<T, ApiError> + Send + 'static,
{
    let session = store.get(&id)?;
    let mut guard = session.inner.clone().try_lock_owned().map_err(|_| ApiError::Busy(id.clone()))?;
    let rid = request_id(headers)?;
    if let Some(reply) = rid.as_deref().and_then(|r| guard.reply_for(r)) {
        return replay(reply, &route);
    }
    tokio::task::spawn_blocking(move || {
        let body = serde_json::to_value(op(&mut guard.engine)?)?;
        guard.updated = now_secs();
        if let Some(request_id) = rid {
            guard.remember(StoredReply {
                request_id,
                route,
                status: status.as_u16(),
                body: body.clone(),
            });
        }
        store.persist(&session.id, &guard)?;
        Ok((status, Json(body)).into_response())
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
}

/// A bucket in a path: its number, or `discard`.
fn parse_target(s: &str) -> Result<Target, ApiError> {
    if s == "discard" {
        return Ok(Target::Discard);
    }
    s.parse::<u32>()
        .map(|b| Target::Bucket(BucketId(b)))
        .map_err(|_| ApiError::BadRequest(format!("{s:?} is neither a bucket number nor \"discard\"")))
}

fn user_bucket(s: &str, action: &'static str) -> Result<BucketId, ApiError> {
    match parse_target(s)? {
        Target::Bucket(b) => Ok(b),
        Target::Discard => Err(ii20_core::Error::DiscardImmutable(action).into()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketSummary {
    pub id: BucketId,
    pub name: String,
    pub color: String,
    pub active: bool,
    pub members: usize,
    pub fast_forwarded: usize,
    pub suggested: usize,
    pub correct: usize,
    pub wrong: usize,
}

impl From<&Bucket> for BucketSummary {
    fn from(b: &Bucket) -> Self {
        BucketSummary {
            id: b.id,
            name: b.name.clone(),
            color: b.color.clone(),
            active: b.active,
            members: b.members.len(),
            fast_forwarded: b.members.iter().filter(|m| m.fast_forwarded).count(),
            suggested: b.suggested.len(),
            correct: b.correct.len(),
            wrong: b.wrong.len(),
        }
    }
}

fn summary(engine: &Engine, id: BucketId) -> Result<BucketSummary, ApiError> {
    Ok(engine.session().bucket(id)?.into())
}

// ----- sessions -------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateSession {
    /// Must name the served dataset when present.
    pub dataset: Option<String>,
    pub config: Option<EngineConfig>,
}

async fn create_session(
    State(store): State<Arc<SessionStore>>,
    headers: HeaderMap,
    Json(req): Json<CreateSession>,
) -> Result<Response, ApiError> {
    let route = "POST /sessions".to_owned();
    let rid = request_id(&headers)?;
    if let Some(reply) = rid.as_deref().and_then(|r| store.creation_reply(r)) {
        return replay(&reply, &route);
    }
    if let Some(name) = &req.dataset {
        if name != store.dataset_name() {
            return Err(ApiError::Unprocessable(format!(
                "this server holds dataset {:?}, not {name:?}",
                store.dataset_name()
            )));
        }
    }
    let config = req.config.unwrap_or_default();
    config.validate()?;
    let session = {
        let store = store.clone();
        tokio::task::spawn_blocking(move || store.create(config))
            .await
            .map_err(|e| ApiError::Internal(e.to_string()))??
    };
    let body = json!({ "session_id": session.id, "dataset": store.dataset_name() });
    if let Some(request_id) = rid {
        store.remember_creation(StoredReply {
            request_id,
            route,
            status: StatusCode::CREATED.as_u16(),
            body: body.clone(),
        });
    }
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn session_info(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = store.get(&id)?;
    let inner = session.inner.lock().await;
    let e = &inner.engine;
    let buckets: Vec<BucketSummary> = e.session().buckets().map(BucketSummary::from).collect();
    Ok(Json(json!({
        "session_id": session.id,
        "dataset": store.dataset_name(),
        "created": inner.created,
        "updated": inner.updated,
        "round": e.session().round(),
        "processed": e.session().processed_count(),
        "discarded": e.session().discard().len(),
        "config": e.config(),
        "buckets": buckets,
    }))
    .into_response())
}

// ----- the interaction loop -------------------------------------------------

async fn feedback(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(batch): Json<FeedbackBatch>,
) -> Result<Response, ApiError> {
    let route = format!("POST /sessions/{id}/feedback");
    mutate(store, id, &headers, route, StatusCode::OK, move |e| {
        let retrained = e.process_feedback(&batch)?;
        Ok(json!({ "retrained": retrained }))
    })
    .await
}

async fn suggest(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(req): Json<SuggestRequest>,
) -> Result<Response, ApiError> {
    let route = format!("POST /sessions/{id}/suggest");
    mutate(store, id, &headers, route, StatusCode::OK, move |e| Ok(e.suggest(&req)?)).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FastForward {
    pub bucket: Target,
    pub n_ff: usize,
}

async fn fast_forward(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(req): Json<FastForward>,
) -> Result<Response, ApiError> {
    let route = format!("POST /sessions/{id}/fast-forward");
    mutate(store, id, &headers, route, StatusCode::OK, move |e| {
        let added = e.fast_forward(req.bucket, req.n_ff)?;
        Ok(json!({ "added": added }))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommitFastForward {
    pub bucket: Target,
}

async fn commit_fast_forward(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(req): Json<CommitFastForward>,
) -> Result<Response, ApiError> {
    let route = format!("POST /sessions/{id}/fast-forward/commit");
    mutate(store, id, &headers, route, StatusCode::OK, move |e| {
        let committed = e.commit_fast_forward(req.bucket)?;
        Ok(json!({ "committed": committed }))
    })
    .await
}

// ----- buckets --------------------------------------------------------------

async fn list_buckets(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = store.get(&id)?;
    let inner = session.inner.lock().await;
    let buckets: Vec<BucketSummary> = inner.engine.session().buckets().map(BucketSummary::from).collect();
    Ok(Json(buckets).into_response())
}

async fn get_bucket(
    State(store): State<Arc<SessionStore>>,
    Path((id, bucket)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let session = store.get(&id)?;
    let inner = session.inner.lock().await;
    match parse_target(&bucket)? {
        Target::Bucket(b) => Ok(Json(summary(&inner.engine, b)?).into_response()),
        Target::Discard => Ok(Json(json!({
            "id": "discard",
            "members": inner.engine.session().discard().len(),
        }))
        .into_response()),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateBucket {
    pub name: String,
    #[serde(default = "yes")]
    pub active: bool,
    pub color: Option<String>,
}

fn yes() -> bool {
    true
}

async fn create_bucket(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(req): Json<CreateBucket>,
) -> Result<Response, ApiError> {
    let route = format!("POST /sessions/{id}/buckets");
    mutate(store, id, &headers, route, StatusCode::CREATED, move |e| {
        let b = e.create_bucket_with(req.name, req.active)?;
        if let Some(c) = req.color {
            e.set_color(b, c)?;
        }
        summary(e, b)
    })
    .await
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UpdateBucket {
    pub name: Option<String>,
    pub color: Option<String>,
    pub active: Option<bool>,
}

async fn update_bucket(
    State(store): State<Arc<SessionStore>>,
    Path((id, bucket)): Path<(String, String)>,
    headers: HeaderMap,
    Json(req): Json<UpdateBucket>,
) -> Result<Response, ApiError> {
    let b = user_bucket(&bucket, "modified")?;
    let route = format!("PATCH /sessions/{id}/buckets/{bucket}");
    mutate(store, id, &headers, route, StatusCode::OK, move |e| {
        // the only fallible change goes first so a refusal leaves the bucket untouched
        if let Some(active) = req.active {
            e.set_active(b, active)?;
        }
        if let Some(name) = req.name {
            e.rename_bucket(b, name)?;
        }
        if let Some(color) = req.color {
            e.set_color(b, color)?;
        }
        summary(e, b)
    })
    .await
}

async fn delete_bucket(
    State(store): State<Arc<SessionStore>>,
    Path((id, bucket)): Path<(String, String)>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let b = user_bucket(&bucket, "deleted")?;
    let route = format!("DELETE /sessions/{id}/buckets/{bucket}");
    mutate(store, id, &headers, route, StatusCode::OK, move |e| {
        e.delete_bucket(b)?;
        Ok(json!({ "deleted": b }))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transfer {
    pub images: Vec<ImageId>,
    pub from: Target,
    pub to: Target,
    #[serde(default = "move_mode")]
    pub mode: TransferMode,
}

fn move_mode() -> TransferMode {
    TransferMode::Move
}

async fn transfer(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(req): Json<Transfer>,
) -> Result<Response, ApiError> {
    let route = format!("POST /sessions/{id}/transfer");
    mutate(store, id, &headers, route, StatusCode::OK, move |e| {
        let outcome = e.transfer(&req.images, req.from, req.to, req.mode)?;
        let retrained: BTreeSet<Target> = outcome.retrain;
        Ok(json!({ "retrained": retrained }))
    })
    .await
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct ViewQuery {
    pub sort: ViewSort,
    pub order: SortOrder,
}

async fn bucket_view(
    State(store): State<Arc<SessionStore>>,
    Path((id, bucket)): Path<(String, String)>,
    Query(q): Query<ViewQuery>,
) -> Result<Response, ApiError> {
    let target = parse_target(&bucket)?;
    let session = store.get(&id)?;
    let inner = session.inner.lock().await;
    let view = inner.engine.bucket_view(target, q.sort, q.order)?;
    Ok(Json(view).into_response())
}

// ----- images ---------------------------------------------------------------

async fn image(State(store): State<Arc<SessionStore>>, Path(image): Path<u32>) -> Result<Response, ApiError> {
    let c = &store.data().collection;
    let id = ImageId(image);
    if !c.contains(id) {
        return Err(ii20_core::Error::UnknownImage(id).into());
    }
    Ok(Json(json!({
        "image_id": id,
        "display_uri": c.display_uri(id),
        "metadata": c.metadata(id),
    }))
    .into_response())
}
