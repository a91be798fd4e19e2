//! HTTP JSON API over a workspace.
//!
//! Every route delegates to one engine or indicator operation. Errors are
//! returned as `{"status", "code", "message"}` where `code` is the engine
//! error name.

pub mod cli;

use std::path::PathBuf;
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, Path, Request, State};
use axum::http::request::Parts;
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

use plmflow::engine::{Attributes, EngineError};
use plmflow::model::{ModelRef, ProcessModel, ProcessTypology, Violation};
use plmflow::store::{StoreError, Workspace};
use plmflow::trace::{EventFilter, EventKind};
use plmflow::{Engine, InstanceId, Timestamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status: status.as_u16(), code: code.to_string(), message: message.into(), violations: Vec::new() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }
}

/// HTTP status for each engine error.
pub fn status_for(e: &EngineError) -> StatusCode {
    use EngineError::*;
    match e {
        ValidationFailed(_) | KindMismatch(_) | CyclicRatio(_) | InvalidIndicator { .. } => StatusCode::BAD_REQUEST,
        Forbidden { .. } => StatusCode::FORBIDDEN,
        UnknownModel { .. } | UnknownInstance(_) | UnknownActivity(_) | UnknownObjective(_) | UnknownIndicator(_) => {
            StatusCode::NOT_FOUND
        }
        WrongState { .. }
        | SingleInstanceViolation(_)
        | FrozenModel(_)
        | NotRunning(_)
        | ClockSkew { .. }
        | VersionExists { .. }
        | StabilityForbids(_)
        | StateNotInTarget { .. } => StatusCode::CONFLICT,
        MissingInput(_) | InvalidParameter { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        StorageFailure(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let mut err = ApiError::new(status_for(&e), e.code(), e.to_string());
        if let EngineError::ValidationFailed(v) = e {
            err.violations = v;
        }
        err
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Engine(e) => e.into(),
            StoreError::ValidationFailed { violations, .. } => EngineError::ValidationFailed(violations).into(),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "StorageFailure", other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

/// `Json` extractor whose rejection is an [`ApiError`].
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(json_rejection(e)),
        }
    }
}

fn json_rejection(e: JsonRejection) -> ApiError {
    ApiError::bad_request(e.body_text())
}

/// `Query` extractor whose rejection is an [`ApiError`].
pub struct Params<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for Params<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        match axum::extract::Query::<T>::from_request_parts(parts, state).await {
            Ok(axum::extract::Query(v)) => Ok(Params(v)),
            Err(e) => Err(query_rejection(e)),
        }
    }
}

fn query_rejection(e: QueryRejection) -> ApiError {
    ApiError::bad_request(e.body_text())
}

/// Shared workspace. Writes are serialized; reads run concurrently.
#[derive(Clone)]
pub struct AppState {
    workspace: Arc<RwLock<Workspace>>,
}

impl AppState {
    pub fn new(workspace: Workspace) -> Self {
        AppState { workspace: Arc::new(RwLock::new(workspace)) }
    }

    pub fn read(&self) -> RwLockReadGuard<'_, Workspace> {
        self.workspace.read().unwrap_or_else(|p| p.into_inner())
    }

    fn write(&self) -> RwLockWriteGuard<'_, Workspace> {
        self.workspace.write().unwrap_or_else(|p| p.into_inner())
    }

    fn mutate<T>(&self, f: impl FnOnce(&mut Engine) -> Result<T, EngineError>) -> Result<T, ApiError> {
        let mut ws = self.write();
        let engine = ws.engine_mut()?;
        Ok(f(engine)?)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ServerOptions {
    pub ui_origin: Option<String>,
    pub ui_dir: Option<PathBuf>,
}

pub fn router(state: AppState) -> Router {
    router_with(state, &ServerOptions::default())
}

pub fn router_with(state: AppState, options: &ServerOptions) -> Router {
    let mut app = Router::new()
        .route("/models", post(publish_model).get(list_models))
        .route("/models/{name}/{version}", get(get_model))
        .route("/instances", post(instantiate).get(list_instances))
        .route("/instances/{id}", get(get_instance))
        .route("/instances/{id}/activities/{name}", post(perform_activity))
        .route("/instances/{id}/migrate", post(migrate))
        .route("/worklist", get(worklist))
        .route("/objectives/{name}/attest", post(attest))
        .route("/objectives/{name}/evaluate", post(evaluate_objective))
        .route("/indicators", get(list_indicators))
        .route("/indicators/{name}", get(indicator))
        .route("/scorecard", get(scorecard))
        .route("/drift", get(drift))
        .route("/events", get(events))
        .route("/actors", get(actors))
        .with_state(state);
    app = match &options.ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.fallback(not_found),
    };
    if let Some(origin) = &options.ui_origin {
        let cors = CorsLayer::new()
            .allow_methods([Method::GET, Method::POST])
            .allow_headers(Any)
            .allow_origin(origin.parse::<HeaderValue>().unwrap_or(HeaderValue::from_static("null")));
        app = app.layer(cors);
    }
    app
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such route")
}

#[derive(Serialize)]
struct ModelSummary {
    name: String,
    version: u32,
    typology: ProcessTypology,
    latest: bool,
}

async fn publish_model(
    State(state): State<AppState>,
    Body(model): Body<ProcessModel>,
) -> Result<(StatusCode, Json<ModelRef>), ApiError> {
    let reference = state.write().publish_model(model)?;
    Ok((StatusCode::CREATED, Json(reference)))
}

async fn list_models(State(state): State<AppState>) -> Json<Vec<ModelSummary>> {
    let ws = state.read();
    let registry = ws.engine().registry();
    Json(
        registry
            .iter()
            .map(|m| ModelSummary {
                name: m.name.clone(),
                version: m.version,
                typology: m.typology,
                latest: registry.latest(&m.name).is_some_and(|l| l.version == m.version),
            })
            .collect(),
    )
}

async fn get_model(
    State(state): State<AppState>,
    Path((name, version)): Path<(String, u32)>,
) -> Result<Json<ProcessModel>, ApiError> {
    let ws = state.read();
    let model =
        ws.engine().registry().get(&name, version).ok_or(EngineError::UnknownModel { name, version: Some(version) })?;
    Ok(Json(ProcessModel::clone(model)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstantiateBody {
    model: String,
    #[serde(default)]
    version: Option<u32>,
    #[serde(default)]
    attributes: Attributes,
    #[serde(default)]
    actor: Option<String>,
    at: Timestamp,
}

async fn instantiate(
    State(state): State<AppState>,
    Body(b): Body<InstantiateBody>,
) -> Result<impl IntoResponse, ApiError> {
    let view = state.mutate(|e| e.instantiate(&b.model, b.version, b.attributes, b.actor.as_deref(), b.at))?;
    Ok((StatusCode::CREATED, Json(view)))
}

#[derive(Deserialize)]
struct InstanceQuery {
    #[serde(default)]
    model: Option<String>,
    #[serde(default)]
    running: Option<bool>,
}

async fn list_instances(State(state): State<AppState>, Params(q): Params<InstanceQuery>) -> impl IntoResponse {
    let ws = state.read();
    let engine = ws.engine();
    let views: Vec<_> = engine
        .state()
        .instances
        .values()
        .filter(|i| q.model.as_ref().is_none_or(|m| &i.model.name == m))
        .filter(|i| q.running.is_none_or(|r| i.is_running() == r))
        .filter_map(|i| engine.instance_view(&i.id).ok())
        .collect();
    Json(views)
}

async fn get_instance(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.read().engine().instance_view(&InstanceId::new(id))?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PerformBody {
    actor: String,
    #[serde(default)]
    parameters: Attributes,
    at: Timestamp,
}

async fn perform_activity(
    State(state): State<AppState>,
    Path((id, name)): Path<(String, String)>,
    Body(b): Body<PerformBody>,
) -> Result<impl IntoResponse, ApiError> {
    let id = InstanceId::new(id);
    let view = state.mutate(|e| {
        let actor = e.actor(&b.actor);
        e.perform_activity(&id, &name, &actor, b.parameters, b.at)
    })?;
    Ok(Json(view))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MigrateBody {
    to_version: u32,
    actor: String,
    at: Timestamp,
}

async fn migrate(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Body(b): Body<MigrateBody>,
) -> Result<impl IntoResponse, ApiError> {
    let id = InstanceId::new(id);
    Ok(Json(state.mutate(|e| e.migrate_instance(&id, b.to_version, &b.actor, b.at))?))
}

#[derive(Deserialize)]
struct WorklistQuery {
    actor: String,
    #[serde(default)]
    as_of: Option<Timestamp>,
}

async fn worklist(State(state): State<AppState>, Params(q): Params<WorklistQuery>) -> impl IntoResponse {
    let ws = state.read();
    let actor = ws.engine().actor(&q.actor);
    Json(ws.engine().worklist(&actor, q.as_of.unwrap_or(Timestamp::MAX)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AttestBody {
    instance: InstanceId,
    actor: String,
    at: Timestamp,
}

async fn attest(
    State(state): State<AppState>,
    Path(name): Path<String>,
    Body(b): Body<AttestBody>,
) -> Result<impl IntoResponse, ApiError> {
    let status = state.mutate(|e| {
        let actor = e.actor(&b.actor);
        e.attest_objective(&name, &b.instance, &actor, b.at)
    })?;
    Ok(Json(status))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateBody {
    instance: InstanceId,
    at: Timestamp,
}

async fn evaluate_objective(
    State(state): State<AppState>,
    Path(name): Path<String>,
    Body(b): Body<EvaluateBody>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.mutate(|e| e.evaluate_objective(&name, &b.instance, b.at))?))
}

#[derive(Deserialize)]
struct AsOf {
    #[serde(default)]
    as_of: Option<Timestamp>,
}

impl AsOf {
    fn get(&self) -> Timestamp {
        self.as_of.unwrap_or_else(Timestamp::now)
    }
}

async fn list_indicators(State(state): State<AppState>) -> impl IntoResponse {
    Json(state.read().engine().indicators().defs().to_vec())
}

async fn indicator(
    State(state): State<AppState>,
    Path(name): Path<String>,
    Params(q): Params<AsOf>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.read().engine().evaluate_indicator(&name, q.get())?))
}

async fn scorecard(State(state): State<AppState>, Params(q): Params<AsOf>) -> impl IntoResponse {
    Json(state.read().engine().scorecard(q.get()))
}

async fn drift(State(state): State<AppState>, Params(q): Params<AsOf>) -> impl IntoResponse {
    Json(state.read().engine().drift(q.get()))
}

#[derive(Deserialize)]
struct EventsQuery {
    #[serde(default)]
    instance: Option<InstanceId>,
    #[serde(default)]
    entity: Option<plmflow::EntityId>,
    #[serde(default)]
    kind: Option<EventKind>,
    #[serde(default)]
    actor: Option<String>,
    #[serde(default)]
    from: Option<Timestamp>,
    #[serde(default)]
    to: Option<Timestamp>,
    #[serde(default)]
    limit: Option<usize>,
}

async fn events(State(state): State<AppState>, Params(q): Params<EventsQuery>) -> impl IntoResponse {
    let filter =
        EventFilter { instance: q.instance, entity: q.entity, kind: q.kind, from: q.from, to: q.to, actor: q.actor };
    let ws = state.read();
    let events: Vec<_> = ws.engine().query(&filter).into_iter().take(q.limit.unwrap_or(usize::MAX)).cloned().collect();
    Json(events)
}

async fn actors(State(state): State<AppState>) -> impl IntoResponse {
    Json(state.read().engine().registry().actors().into_values().collect::<Vec<_>>())
}
