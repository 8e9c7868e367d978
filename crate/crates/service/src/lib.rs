//! JSON-over-HTTP API for specs, elicitation sessions and models.
//!
//! **No authentication.** The service is a single-operator tool: anyone who
//! can reach the port can read and change every spec, model and session.
//! Bind it to localhost or put it behind something that authenticates.
//!
//! Errors use one envelope, `{"category", "message", "details"}`, with the
//! same categories as the CLI exit codes: `usage` (400), `not_found` (404),
//! `validation` (422), `conflict` (409), `io` (500), `oracle` (502).
//!
//! Answers carry an optional `seq`, the session version the client last saw.
//! A mismatch is rejected as stale, so two clients racing on one session
//! cannot both apply an answer.

mod error;
mod store;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{Any, CorsLayer};

use emm_core::aggregation::{disagreement_points, AggregationBinding};
use emm_core::elicitation::{
    CompletionPolicy, Counts, Question, ResolveStrategy, Session, SessionStatus, SessionTarget,
};
use emm_core::hierarchy::{evaluate, explain, validate_spec, EvalPolicy, ExpertModel, LeafAnswers, ModelSpecTree};
use emm_core::lattice::Point;
use emm_core::monotone::Conflict;
use emm_core::persistence::{export_chain_layout, load_document, load_model, save_extended, save_model, DocumentKind};
use emm_core::scheduler::Strategy;
use emm_core::ErrorCategory;

pub use error::{status_of, ApiError, ApiResult};
pub use store::Store;

use store::{new_id, SessionSlot};

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Mirror specs, models and session logs here; in-memory when unset.
    pub data_dir: Option<PathBuf>,
    /// Allowed browser origin; any origin when unset.
    pub cors_origin: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Store(#[from] emm_core::Error),
    #[error("invalid CORS origin {0:?}")]
    Origin(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone)]
pub struct AppState {
    store: Arc<Store>,
}

impl AppState {
    pub fn new(store: Store) -> Self {
        Self { store: Arc::new(store) }
    }

    pub fn open(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let store = match &config.data_dir {
            Some(dir) => Store::open(dir)?,
            None => Store::in_memory(),
        };
        Ok(Self::new(store))
    }

    pub fn store(&self) -> &Store {
        &self.store
    }
}

pub fn router(state: AppState, config: &ServiceConfig) -> Result<Router, ServiceError> {
    let cors = match &config.cors_origin {
        Some(o) => CorsLayer::new()
            .allow_origin(o.parse::<HeaderValue>().map_err(|_| ServiceError::Origin(o.clone()))?)
            .allow_methods(Any)
            .allow_headers(Any),
        None => CorsLayer::permissive(),
    };
    Ok(Router::new()
        .route("/api/health", get(|| async { Json(json!({"status": "ok"})) }))
        .route("/api/specs", post(create_spec).get(list_specs))
        .route("/api/specs/{id}", get(get_spec))
        .route("/api/models", post(create_model).get(list_models))
        .route("/api/models/{id}", get(get_model))
        .route("/api/models/{id}/chains/{node}", get(chains))
        .route("/api/models/{a}/diff/{b}/{node}", get(diff))
        .route("/api/sessions", post(create_session).get(list_sessions))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/next", get(next_question))
        .route("/api/sessions/{id}/answer", post(answer))
        .route("/api/sessions/{id}/resolve", post(resolve))
        .route("/api/sessions/{id}/finalize", post(finalize))
        .route("/api/evaluate", post(evaluate_model))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .layer(cors)
        .with_state(state))
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> Result<(), ServiceError> {
    let app = router(AppState::open(&config)?, &config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// [`serve`] on a fresh multi-threaded runtime.
pub fn serve_blocking(addr: SocketAddr, config: ServiceConfig) -> Result<(), ServiceError> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build()?.block_on(serve(addr, config))
}

// ---- request parsing ----

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| {
        let category = if e.is_data() { ErrorCategory::Validation } else { ErrorCategory::Usage };
        ApiError::new(category, format!("request body: {e}"))
    })
}

/// An answer as a scale index or a label.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum AnswerValue {
    Index(usize),
    Label(String),
}

impl AnswerValue {
    fn resolve(&self, scale: &emm_core::lattice::ValueScale, what: &str) -> ApiResult<usize> {
        let v = match self {
            AnswerValue::Index(i) => Some(*i).filter(|&i| i < scale.size()),
            AnswerValue::Label(l) => scale.parse_value(l),
        };
        v.ok_or_else(|| {
            ApiError::validation(format!("{what}: expected one of {:?} or an index below {}", scale.labels(), scale.size()))
        })
    }
}

// ---- specs ----

#[derive(Serialize)]
struct SpecSummary {
    id: String,
    title: Option<String>,
    root: String,
    nodes: usize,
    leaves: usize,
    unresolved: usize,
}

fn summary(id: &str, tree: &ModelSpecTree) -> SpecSummary {
    SpecSummary {
        id: id.to_string(),
        title: tree.metadata().title.clone(),
        root: tree.root().prompt.clone(),
        nodes: tree.nodes().len(),
        leaves: tree.leaves().len(),
        unresolved: tree.nodes().iter().filter(|n| !n.is_leaf() && n.aggregation.is_none()).count(),
    }
}

fn spec_body(id: &str, tree: &ModelSpecTree) -> Value {
    let document: Value = serde_json::from_slice(&save_extended(tree)).expect("saved documents are JSON");
    json!({ "id": id, "summary": summary(id, tree), "document": document, "validation": validate_spec(tree) })
}

/// Body: a spec document in plain or extended form.
async fn create_spec(State(st): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let doc = load_document(&body)?;
    let id = new_id("spec");
    st.store.put_spec(&id, doc.tree.clone())?;
    Ok((StatusCode::CREATED, Json(spec_body(&id, &doc.tree))))
}

async fn list_specs(State(st): State<AppState>) -> Json<Vec<SpecSummary>> {
    Json(st.store.specs().iter().map(|(id, t)| summary(id, t)).collect())
}

async fn get_spec(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(spec_body(&id, &st.store.spec(&id)?)))
}

// ---- models ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PromoteRequest {
    spec_id: String,
    expert: String,
}

fn model_body(id: &str, model: &ExpertModel) -> Value {
    let document: Value = serde_json::from_slice(&save_model(model)).expect("saved documents are JSON");
    json!({ "id": id, "expert": model.expert(), "summary": summary(id, model.tree()), "document": document })
}

/// Body: a model document, or `{spec_id, expert}` to freeze a fully bound
/// spec into a model.
async fn create_model(State(st): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let value: Value = parse_body(&body)?;
    let model = if value.get("spec_id").is_some() {
        let req: PromoteRequest = parse_body(&body)?;
        ExpertModel::new(st.store.spec(&req.spec_id)?, req.expert)?
    } else {
        let doc = load_document(&body)?;
        if doc.kind != DocumentKind::Model {
            return Err(ApiError::validation("expected a model document (kind \"model\")"));
        }
        load_model(&body)?
    };
    let id = new_id("model");
    st.store.put_model(&id, model.clone())?;
    Ok((StatusCode::CREATED, Json(model_body(&id, &model))))
}

async fn list_models(State(st): State<AppState>) -> Json<Vec<Value>> {
    Json(
        st.store
            .models()
            .iter()
            .map(|(id, m)| json!({ "id": id, "expert": m.expert(), "summary": summary(id, m.tree()) }))
            .collect(),
    )
}

async fn get_model(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(model_body(&id, &st.store.model(&id)?)))
}

async fn chains(State(st): State<AppState>, Path((id, node)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    let layout = export_chain_layout(&st.store.model(&id)?, &node)?;
    Ok(Json(serde_json::to_value(layout).expect("layouts serialize")))
}

async fn diff(State(st): State<AppState>, Path((a, b, node)): Path<(String, String, String)>) -> ApiResult<Json<Value>> {
    let points = disagreement_points(&st.store.model(&a)?, &st.store.model(&b)?, &node)?;
    Ok(Json(json!({ "node_id": node, "count": points.len(), "points": points })))
}

// ---- sessions ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    spec_id: String,
    node_id: String,
    expert: String,
    #[serde(default)]
    strategy: Option<Strategy>,
}

/// What a client needs to render a session.
#[derive(Serialize)]
struct SessionView {
    session_id: String,
    spec_id: String,
    node_id: String,
    expert: String,
    strategy: Strategy,
    status: SessionStatus,
    seq: u64,
    counts: Counts,
    done: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    question: Option<Question>,
    #[serde(skip_serializing_if = "Option::is_none")]
    conflict: Option<Conflict>,
}

fn view(slot: &SessionSlot) -> SessionView {
    let s = &slot.session;
    SessionView {
        session_id: s.id().to_string(),
        spec_id: slot.spec_id.clone(),
        node_id: s.target().node_id.clone(),
        expert: s.expert().to_string(),
        strategy: s.strategy(),
        status: s.status(),
        seq: s.version(),
        counts: s.counts(),
        done: s.status() != SessionStatus::Active && s.status() != SessionStatus::Conflicted,
        question: s.question(),
        conflict: s.conflict().cloned(),
    }
}

async fn create_session(State(st): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: CreateSession = parse_body(&body)?;
    let tree = st.store.spec(&req.spec_id)?;
    let node = tree.find(&req.node_id).ok_or_else(|| ApiError::not_found(format!("no node {:?}", req.node_id)))?;
    let target = SessionTarget::from_node(node)?;
    let strategy = match req.strategy {
        Some(s) => s,
        None if target.scale.is_binary() && target.children.iter().all(|c| c.scale.is_binary()) => Strategy::Hansel,
        None => Strategy::Greedy,
    };
    let session = Session::start(new_id("session"), target, strategy, req.expert)?;
    let slot = st.store.insert_session(session, &req.spec_id)?;
    let slot = slot.lock().expect("session lock");
    Ok((StatusCode::CREATED, Json(view(&slot))))
}

async fn list_sessions(State(st): State<AppState>) -> ApiResult<Json<Vec<SessionView>>> {
    let mut out = Vec::new();
    for id in st.store.session_ids() {
        let slot = st.store.session(&id)?;
        let slot = slot.lock().expect("session lock");
        out.push(view(&slot));
    }
    Ok(Json(out))
}

async fn get_session(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let slot = st.store.session(&id)?;
    let slot = slot.lock().expect("session lock");
    Ok(Json(view(&slot)))
}

async fn next_question(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    get_session(State(st), Path(id)).await
}

/// Runs `op` on a locked session, persisting whatever it logged even when
/// it fails.
fn mutate<T>(
    st: &AppState,
    id: &str,
    seq: Option<u64>,
    op: impl FnOnce(&mut Session) -> ApiResult<T>,
) -> ApiResult<(T, SessionView)> {
    let shared = st.store.session(id)?;
    let mut slot = shared.lock().expect("session lock");
    if let Some(seen) = seq {
        let current = slot.session.version();
        if seen != current {
            return Err(ApiError::new(
                ErrorCategory::Conflict,
                format!("stale sequence {seen}: session is at {current}"),
            )
            .with_details(json!({ "reason": "stale", "expected": current, "got": seen })));
        }
    }
    let result = op(&mut slot.session);
    st.store.flush(&mut slot)?;
    match result {
        Ok(v) => Ok((v, view(&slot))),
        Err(mut e) => {
            let details = std::mem::take(&mut e.details);
            let current = serde_json::to_value(view(&slot)).expect("views serialize");
            Err(e.with_details(json!({ "session": current, "error": details })))
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerRequest {
    value: AnswerValue,
    #[serde(default)]
    seq: Option<u64>,
    /// Answer this scenario instead of the pending question.
    #[serde(default)]
    point: Option<Point>,
}

async fn answer(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<SessionView>> {
    let req: AnswerRequest = parse_body(&body)?;
    let (_, v) = mutate(&st, &id, req.seq, |s| {
        let value = req.value.resolve(&s.target().scale, "value")?;
        let result = match req.point.clone() {
            Some(p) => s.submit(p, value),
            None => s.step(value),
        };
        result.map_err(|e| {
            let conflict = s.conflict().cloned();
            let err = ApiError::from(e);
            match conflict {
                Some(c) if err.category == ErrorCategory::Conflict => {
                    err.with_details(json!({ "reason": "inconsistent", "conflict": c }))
                }
                _ => err,
            }
        })
    })?;
    Ok(Json(v))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ResolveRequest {
    strategy: ResolveStrategy,
    #[serde(default)]
    seq: Option<u64>,
}

async fn resolve(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<SessionView>> {
    let req: ResolveRequest = parse_body(&body)?;
    let (_, v) = mutate(&st, &id, req.seq, |s| Ok(s.resolve_conflict(req.strategy)?))?;
    Ok(Json(v))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FinalizeRequest {
    #[serde(default)]
    policy: CompletionPolicy,
    #[serde(default)]
    seq: Option<u64>,
}

/// Produces the node's table and binds it into the session's spec.
async fn finalize(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: FinalizeRequest = parse_body(&body)?;
    let spec_id = st.store.session(&id)?.lock().expect("session lock").spec_id.clone();
    let (table, v) = mutate(&st, &id, req.seq, |s| Ok(s.finalize(req.policy)?))?;
    let node_id = table.provenance.node_id.clone();
    let values = table.function.values().to_vec();
    let provenance = serde_json::to_value(&table.provenance).expect("provenance serializes");
    st.store.update_spec(&spec_id, |tree| {
        tree.bind(&node_id, Some(AggregationBinding::Table(table)))?;
        Ok(())
    })?;
    Ok(Json(json!({
        "session": v,
        "table": { "node_id": node_id, "values": values, "provenance": provenance },
    })))
}

// ---- evaluation ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateRequest {
    model_id: String,
    answers: BTreeMap<String, AnswerValue>,
    #[serde(default)]
    policy: EvalPolicy,
    #[serde(default)]
    depth: Option<usize>,
}

async fn evaluate_model(State(st): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: EvaluateRequest = parse_body(&body)?;
    let model = st.store.model(&req.model_id)?;
    let mut answers = LeafAnswers::new();
    for (leaf, v) in &req.answers {
        let node = model
            .tree()
            .find(leaf)
            .ok_or_else(|| ApiError::validation(format!("answers: unknown node {leaf:?}")))?;
        answers.insert(leaf.clone(), v.resolve(&node.scale, &format!("answers.{leaf}"))?);
    }
    let full = evaluate(&model, &answers, req.policy)?;
    let trace = match req.depth {
        Some(d) => explain(&model, &answers, req.policy, d)?,
        None => full.trace,
    };
    Ok(Json(json!({ "value": full.value, "label": full.label, "trace": trace })))
}
