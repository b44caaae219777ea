//! HTTP routes.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequestParts, Path, Query, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bonsai_core::planner::PlanError;
use bonsai_core::{validate_config, FeedConfig, PreferencePrompt, RankingStyle, Source, Violation};
use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::auth::{AuthError, Session};
use crate::generation::{GenerateError, GenerationRun, RunStatus, Trigger};
use crate::skeleton::{self, Cursor};
use crate::store::{check_feed_id, StoreError};
use crate::AppState;

/// Error body: `{"error": CODE, "message": text, ...}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
    violations: Vec<Violation>,
    run: Option<Box<GenerationRun>>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: impl Into<String>, message: impl Into<String>) -> Self {
        Self { status, code: code.into(), message: message.into(), violations: Vec::new(), run: None }
    }

    fn not_found(feed_id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "FEED_NOT_FOUND", format!("feed {feed_id} not found"))
    }

    fn forbidden() -> Self {
        Self::new(StatusCode::FORBIDDEN, "FORBIDDEN", "this feed belongs to another account")
    }

    fn violations(violations: Vec<Violation>) -> Self {
        let mut e = Self::new(
            StatusCode::CONFLICT,
            "VALIDATION_FAILED",
            format!("config has {} violation(s)", violations.len()),
        );
        e.violations = violations;
        e
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::InvalidId(id) => ApiError::not_found(&id),
            other => {
                tracing::error!(error = %other, "storage failure");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "STORAGE_FAILED", other.to_string())
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": self.code, "message": self.message});
        if !self.violations.is_empty() {
            body["violations"] = json!(self.violations);
        }
        if let Some(run) = self.run {
            body["run"] = json!(run);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "INVALID_REQUEST", format!("request body: {e}")))
}

impl FromRequestParts<AppState> for Session {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let unauthenticated =
            || ApiError::new(StatusCode::UNAUTHORIZED, "UNAUTHENTICATED", "missing or unknown session token");
        let header =
            parts.headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()).ok_or_else(unauthenticated)?;
        let token = header.strip_prefix("Bearer ").map(str::trim).ok_or_else(unauthenticated)?;
        state.sessions.lookup(token).ok_or_else(unauthenticated)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/api/session", post(login).delete(logout))
        .route("/api/presets", get(presets))
        .route("/api/feeds/plan", post(plan))
        .route("/api/feeds/suggest-sources", post(suggest_sources))
        .route("/api/feeds", get(list_feeds).post(create_feed))
        .route("/api/feeds/{id}", get(get_feed).put(update_feed).delete(delete_feed))
        .route("/api/feeds/{id}/generate", post(generate))
        .route("/api/feeds/{id}/activate", post(activate))
        .route("/api/feeds/{id}/deactivate", post(deactivate))
        .route("/api/feeds/{id}/runs", get(runs))
        .route("/api/feeds/{id}/preview", get(preview))
        .route("/xrpc/app.bsky.feed.getFeedSkeleton", get(feed_skeleton))
        .route("/xrpc/app.bsky.feed.describeFeedGenerator", get(describe_feed_generator))
        .with_state(state)
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

#[derive(Debug, Deserialize)]
struct LoginRequest {
    handle: String,
    app_password: String,
}

async fn login(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Session>> {
    let req: LoginRequest = parse_body(&body)?;
    match state.sessions.login(req.handle.trim(), &req.app_password, state.clock.now()).await {
        Ok(session) => Ok(Json(session)),
        Err(AuthError::Rejected) => {
            Err(ApiError::new(StatusCode::UNAUTHORIZED, "INVALID_CREDENTIALS", "invalid handle or app password"))
        }
        Err(e @ AuthError::Unavailable(_)) => {
            Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "AUTH_UNAVAILABLE", e.to_string()))
        }
    }
}

async fn logout(State(state): State<AppState>, session: Session) -> StatusCode {
    state.sessions.logout(&session.token);
    StatusCode::NO_CONTENT
}

async fn presets(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!(state.config.presets))
}

#[derive(Debug, Deserialize)]
struct PlanRequest {
    #[serde(default)]
    description: String,
}

async fn plan(State(state): State<AppState>, session: Session, body: Bytes) -> ApiResult<Json<FeedConfig>> {
    let req: PlanRequest =
        if body.is_empty() { PlanRequest { description: String::new() } } else { parse_body(&body)? };
    match state.planner.plan(&req.description, &session.did, state.clock.now()).await {
        Ok(draft) => Ok(Json(draft)),
        Err(PlanError::EmptyDescription) => {
            Err(ApiError::new(StatusCode::BAD_REQUEST, "EMPTY_DESCRIPTION", "description is empty"))
        }
        Err(PlanError::Failed(e)) => {
            Err(ApiError::new(StatusCode::BAD_GATEWAY, "PLAN_FAILED", format!("{}: {e}", e.code())))
        }
        Err(e @ PlanError::InvalidDraft(_)) => {
            Err(ApiError::new(StatusCode::BAD_GATEWAY, "PLAN_FAILED", e.to_string()))
        }
    }
}

/// Writable part of a feed config. Server-owned fields in the body
/// (owner, timestamps) are ignored.
#[derive(Debug, Deserialize)]
pub struct FeedInput {
    #[serde(default)]
    pub feed_id: Option<String>,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub sources: Vec<Source>,
    #[serde(default)]
    pub include_prompts: Vec<PreferencePrompt>,
    #[serde(default)]
    pub limit_prompts: Vec<PreferencePrompt>,
    #[serde(default)]
    pub ranking: RankingStyle,
    #[serde(default)]
    pub active: Option<bool>,
}

impl FeedInput {
    fn into_config(
        self,
        feed_id: String,
        owner: String,
        created_at: DateTime<Utc>,
        now: DateTime<Utc>,
        active: bool,
    ) -> FeedConfig {
        FeedConfig {
            feed_id,
            owner,
            description: self.description,
            sources: self.sources,
            include_prompts: self.include_prompts,
            limit_prompts: self.limit_prompts,
            ranking: self.ranking,
            active: self.active.unwrap_or(active),
            created_at,
            updated_at: now,
        }
    }
}

async fn suggest_sources(
    State(state): State<AppState>,
    session: Session,
    body: Bytes,
) -> ApiResult<Json<serde_json::Value>> {
    let input: FeedInput = parse_body(&body)?;
    let now = state.clock.now();
    let config = input.into_config("draft".into(), session.did, now, now, false);
    let sources = state.planner.suggest_additional_sources(&config).await;
    Ok(Json(json!({ "sources": sources })))
}

#[derive(Debug, Serialize)]
struct FeedSummary {
    feed_id: String,
    feed_uri: String,
    description: String,
    active: bool,
    generation_id: Option<u64>,
    entries: usize,
    last_run: Option<LastRun>,
}

#[derive(Debug, Serialize)]
struct LastRun {
    status: RunStatus,
    finished_at: DateTime<Utc>,
}

async fn list_feeds(State(state): State<AppState>, session: Session) -> ApiResult<Json<Vec<FeedSummary>>> {
    let mut out = Vec::new();
    for id in state.store.list_feed_ids()? {
        let Some(cfg) = state.store.load_config(&id)? else { continue };
        if cfg.owner != session.did {
            continue;
        }
        let published = state.generator.publications().get(&id);
        let last_run =
            state.store.load_runs(&id)?.last().map(|r| LastRun { status: r.status, finished_at: r.finished_at });
        out.push(FeedSummary {
            feed_uri: skeleton::feed_uri(&state.config.feeds.publisher_did, &id),
            feed_id: id,
            description: cfg.description,
            active: cfg.active,
            generation_id: published.as_ref().map(|g| g.feed.generation_id),
            entries: published.as_ref().map_or(0, |g| g.feed.len()),
            last_run,
        });
    }
    Ok(Json(out))
}

fn new_feed_id() -> String {
    let hex = uuid::Uuid::new_v4().simple().to_string();
    format!("f{}", &hex[..12])
}

async fn create_feed(State(state): State<AppState>, session: Session, body: Bytes) -> ApiResult<Response> {
    let input: FeedInput = parse_body(&body)?;
    let feed_id = match input.feed_id.as_deref().map(str::trim) {
        None | Some("") | Some("draft") => new_feed_id(),
        Some(requested) => {
            check_feed_id(requested)
                .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "INVALID_FEED_ID", e.to_string()))?;
            if state.store.load_config(requested)?.is_some() {
                return Err(ApiError::new(
                    StatusCode::CONFLICT,
                    "FEED_EXISTS",
                    format!("feed {requested} already exists"),
                ));
            }
            requested.to_string()
        }
    };
    let now = state.clock.now();
    let config = input.into_config(feed_id, session.did, now, now, true);
    let violations = validate_config(&config);
    if !violations.is_empty() {
        return Err(ApiError::violations(violations));
    }
    state.store.save_config(&config)?;
    tracing::info!(feed_id = %config.feed_id, owner = %config.owner, "feed created");
    Ok((StatusCode::CREATED, Json(config)).into_response())
}

fn load_owned(state: &AppState, id: &str, session: &Session) -> ApiResult<FeedConfig> {
    let cfg = state.store.load_config(id)?.ok_or_else(|| ApiError::not_found(id))?;
    if cfg.owner != session.did {
        return Err(ApiError::forbidden());
    }
    Ok(cfg)
}

async fn get_feed(
    State(state): State<AppState>,
    _session: Session,
    Path(id): Path<String>,
) -> ApiResult<Json<FeedConfig>> {
    state.store.load_config(&id)?.map(Json).ok_or_else(|| ApiError::not_found(&id))
}

async fn update_feed(
    State(state): State<AppState>,
    session: Session,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<FeedConfig>> {
    let existing = load_owned(&state, &id, &session)?;
    let input: FeedInput = parse_body(&body)?;
    let config = input.into_config(id, existing.owner, existing.created_at, state.clock.now(), existing.active);
    let violations = validate_config(&config);
    if !violations.is_empty() {
        return Err(ApiError::violations(violations));
    }
    state.store.save_config(&config)?;
    Ok(Json(config))
}

async fn delete_feed(State(state): State<AppState>, session: Session, Path(id): Path<String>) -> ApiResult<StatusCode> {
    load_owned(&state, &id, &session)?;
    state.store.delete_feed(&id)?;
    state.generator.publications().remove(&id);
    tracing::info!(feed_id = %id, "feed deleted");
    Ok(StatusCode::NO_CONTENT)
}

async fn set_active(state: &AppState, id: &str, session: &Session, active: bool) -> ApiResult<FeedConfig> {
    let mut cfg = load_owned(state, id, session)?;
    if cfg.active != active {
        cfg.active = active;
        cfg.updated_at = state.clock.now();
        state.store.save_config(&cfg)?;
    }
    Ok(cfg)
}

async fn activate(
    State(state): State<AppState>,
    session: Session,
    Path(id): Path<String>,
) -> ApiResult<Json<FeedConfig>> {
    set_active(&state, &id, &session, true).await.map(Json)
}

async fn deactivate(
    State(state): State<AppState>,
    session: Session,
    Path(id): Path<String>,
) -> ApiResult<Json<FeedConfig>> {
    set_active(&state, &id, &session, false).await.map(Json)
}

/// Manual generation. Generating a feed also activates it.
async fn generate(
    State(state): State<AppState>,
    session: Session,
    Path(id): Path<String>,
) -> ApiResult<Json<GenerationRun>> {
    load_owned(&state, &id, &session)?;
    if state.generator.flights().is_running(&id) {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "RUN_IN_FLIGHT",
            format!("a generation run is already in flight for feed {id}"),
        ));
    }
    set_active(&state, &id, &session, true).await?;
    // Detached so a dropped connection does not abandon a run halfway.
    let generator = Arc::clone(&state.generator);
    let task_id = id.clone();
    let joined = tokio::spawn(async move { generator.run(&task_id, Trigger::Manual).await }).await;
    let result = joined.map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "RUN_FAILED", e.to_string()))?;
    match result {
        Ok(run) => Ok(Json(run)),
        Err(GenerateError::NotFound(id)) => Err(ApiError::not_found(&id)),
        Err(e @ GenerateError::InFlight(_)) => Err(ApiError::new(StatusCode::CONFLICT, e.code(), e.to_string())),
        Err(GenerateError::Store(e)) => Err(e.into()),
        Err(e @ GenerateError::Failed(_)) => {
            let mut err = ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.code(), e.to_string());
            if let GenerateError::Failed(run) = e {
                err.run = Some(run);
            }
            Err(err)
        }
    }
}

async fn runs(
    State(state): State<AppState>,
    session: Session,
    Path(id): Path<String>,
) -> ApiResult<Json<Vec<GenerationRun>>> {
    load_owned(&state, &id, &session)?;
    let mut runs = state.store.load_runs(&id)?;
    runs.reverse();
    runs.truncate(state.config.feeds.history_limit);
    Ok(Json(runs))
}

async fn preview(
    State(state): State<AppState>,
    _session: Session,
    Path(id): Path<String>,
) -> ApiResult<Json<serde_json::Value>> {
    if state.store.load_config(&id)?.is_none() {
        return Err(ApiError::not_found(&id));
    }
    let generation = state.generator.publications().get(&id).ok_or_else(|| {
        ApiError::new(StatusCode::NOT_FOUND, "NO_GENERATION", format!("feed {id} has not been generated yet"))
    })?;
    Ok(Json(json!({
        "feed_id": id,
        "run_id": generation.run_id,
        "generation_id": generation.feed.generation_id,
        "generated_at": generation.feed.generated_at,
        "weights_used": generation.feed.weights_used,
        "entries": generation.details,
    })))
}

async fn feed_skeleton(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> ApiResult<Json<skeleton::Skeleton>> {
    let bad = |code: &str, msg: String| ApiError::new(StatusCode::BAD_REQUEST, code, msg);
    let feed = params.get("feed").ok_or_else(|| bad("InvalidRequest", "feed parameter is required".into()))?;
    let limit = match params.get("limit") {
        Some(raw) => {
            Some(raw.parse::<i64>().map_err(|_| bad("InvalidRequest", format!("limit {raw:?} is not an integer")))?)
        }
        None => None,
    };
    let cursor = match params.get("cursor").map(String::as_str) {
        Some("") | None => None,
        Some(raw) => {
            Some(Cursor::parse(raw).ok_or_else(|| bad("InvalidRequest", format!("malformed cursor {raw:?}")))?)
        }
    };
    let unknown = || bad("UnknownFeed", format!("unknown feed {feed}"));
    let feed_id = skeleton::parse_feed_uri(&state.config.feeds.publisher_did, feed).ok_or_else(unknown)?;
    if check_feed_id(feed_id).is_err() {
        return Err(unknown());
    }
    match state.store.load_config(feed_id)? {
        Some(cfg) if cfg.active => {}
        _ => return Err(unknown()),
    }
    let generation = state.generator.publications().get(feed_id).ok_or_else(|| {
        ApiError::new(StatusCode::NOT_FOUND, "NotFound", format!("feed {feed_id} has no generation yet"))
    })?;
    Ok(Json(skeleton::page(&generation.feed, skeleton::effective_limit(limit), cursor)))
}

async fn describe_feed_generator(State(state): State<AppState>) -> ApiResult<Json<serde_json::Value>> {
    let did = &state.config.feeds.publisher_did;
    let mut feeds = Vec::new();
    for id in state.store.list_feed_ids()? {
        if matches!(state.store.load_config(&id)?, Some(cfg) if cfg.active) {
            feeds.push(json!({"uri": skeleton::feed_uri(did, &id)}));
        }
    }
    Ok(Json(json!({"did": did, "feeds": feeds})))
}
