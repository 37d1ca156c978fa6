use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::session::{Decision, LabelEvent, Quotas, SeedProgress, Session};
use super::store::SessionStore;
use crate::contrast;
use crate::corpus::FeatureSpec;
use crate::edit::{CandidateEdit, SeedExample};
use crate::error::Error;

/// Seeds and generated candidates that new sessions draw from.
#[derive(Debug, Clone, Default)]
pub struct CandidatePool {
    pub seeds: Vec<SeedExample>,
    pub candidates: Vec<CandidateEdit>,
}

impl CandidatePool {
    fn for_feature(&self, feature_id: &str) -> (Vec<SeedExample>, Vec<CandidateEdit>) {
        let seeds: Vec<SeedExample> = self.seeds.iter().filter(|s| s.feature_id == feature_id).cloned().collect();
        let candidates = self
            .candidates
            .iter()
            .filter(|c| seeds.iter().any(|s| s.seed_id == c.seed_id))
            .cloned()
            .collect();
        (seeds, candidates)
    }
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
    pub pool: Arc<CandidatePool>,
    pub features: Arc<BTreeMap<String, FeatureSpec>>,
    pub quotas: Quotas,
}

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let message = self.0.to_string();
        let (status, body) = match &self.0 {
            Error::UnknownSession(_) => (StatusCode::NOT_FOUND, json!({"error": "unknown_session"})),
            Error::UnknownSeed(_) => (StatusCode::NOT_FOUND, json!({"error": "unknown_seed"})),
            Error::NotServed { expected, .. } => (StatusCode::CONFLICT, json!({"error": "not_served", "expected": expected})),
            Error::QuotaMet { seed_id, .. } => (StatusCode::CONFLICT, json!({"error": "quota_met", "seed_id": seed_id})),
            Error::NothingToUndo => (StatusCode::CONFLICT, json!({"error": "nothing_to_undo"})),
            Error::UnfinishedSeeds(s) => (StatusCode::CONFLICT, json!({"error": "unfinished_seeds", "seeds": s})),
            Error::Io { .. } => (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": "io"})),
            _ => (StatusCode::BAD_REQUEST, json!({"error": "invalid_input"})),
        };
        let mut body = body;
        body["message"] = Value::String(message);
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub feature_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature: Option<FeatureSpec>,
    pub quotas: Quotas,
    pub done: bool,
    pub progress: Vec<SeedProgress>,
    pub history: Vec<LabelEvent>,
    pub created_at: String,
    pub updated_at: String,
}

fn view(s: &Session, features: &BTreeMap<String, FeatureSpec>) -> SessionView {
    SessionView {
        session_id: s.session_id().to_string(),
        feature_id: s.feature_id().to_string(),
        feature: features.get(s.feature_id()).cloned(),
        quotas: s.quotas(),
        done: s.is_done(),
        progress: s.progress(),
        history: s.history().to_vec(),
        created_at: s.created_at().to_rfc3339(),
        updated_at: s.updated_at().to_rfc3339(),
    }
}

#[derive(Debug, Deserialize)]
pub struct CreateRequest {
    pub feature_id: String,
    #[serde(default)]
    pub seeds: Option<Vec<SeedExample>>,
    #[serde(default)]
    pub candidates: Option<Vec<CandidateEdit>>,
    #[serde(default)]
    pub quotas: Option<Quotas>,
}

#[derive(Debug, Deserialize)]
pub struct LabelRequest {
    pub candidate_id: String,
    pub decision: Decision,
}

#[derive(Debug, Deserialize)]
pub struct NextQuery {
    pub seed: Option<String>,
}

async fn list_features(State(st): State<AppState>) -> Json<Value> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &st.pool.seeds {
        *counts.entry(s.feature_id.as_str()).or_default() += 1;
    }
    let items: Vec<Value> = counts
        .into_iter()
        .map(|(f, n)| json!({"feature_id": f, "seeds": n, "feature": st.features.get(f)}))
        .collect();
    Json(json!({ "features": items }))
}

async fn list_sessions(State(st): State<AppState>) -> ApiResult<Json<Value>> {
    let mut out = Vec::new();
    for id in st.store.ids() {
        out.push(st.store.read(&id, |s| json!({"session_id": id, "feature_id": s.feature_id(), "done": s.is_done()}))?);
    }
    Ok(Json(json!({ "sessions": out })))
}

async fn create_session(State(st): State<AppState>, Json(req): Json<CreateRequest>) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let (seeds, candidates) = match (req.seeds, req.candidates) {
        (Some(s), Some(c)) => (s, c),
        (None, None) => st.pool.for_feature(&req.feature_id),
        _ => return Err(Error::InvalidInput("give both seeds and candidates, or neither".into()).into()),
    };
    if seeds.is_empty() {
        return Err(Error::UnknownFeature(req.feature_id).into());
    }
    let id = st.store.create(&req.feature_id, seeds, candidates, req.quotas.unwrap_or(st.quotas))?;
    let v = st.store.read(&id, |s| view(s, &st.features))?;
    Ok((StatusCode::CREATED, Json(v)))
}

async fn get_session(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    Ok(Json(st.store.read(&id, |s| view(s, &st.features))?))
}

async fn next_candidate(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<NextQuery>,
) -> ApiResult<Json<Value>> {
    let (next, progress) = st
        .store
        .update(&id, |s| Ok((s.next(q.seed.as_deref(), Utc::now())?, s.progress())))?;
    let mut body = serde_json::to_value(&next).expect("serializable");
    body["progress"] = serde_json::to_value(progress).expect("serializable");
    Ok(Json(body))
}

async fn label(State(st): State<AppState>, Path(id): Path<String>, Json(req): Json<LabelRequest>) -> ApiResult<Json<Value>> {
    let (event, progress) = st.store.update(&id, |s| {
        let ev = s.label(&req.candidate_id, req.decision, Utc::now())?;
        Ok((ev, s.progress()))
    })?;
    Ok(Json(json!({ "event": event, "progress": progress })))
}

async fn undo(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let (event, progress) = st.store.update(&id, |s| Ok((s.undo(Utc::now())?, s.progress())))?;
    Ok(Json(json!({ "undone": event, "progress": progress })))
}

async fn finalize(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let (fin, progress) = st.store.read(&id, |s| (s.finalize(), s.progress()))?;
    let fin = fin?;
    Ok(Json(json!({
        "feature_id": fin.contrast_set.feature_id,
        "entries": fin.contrast_set.records(),
        "incomplete": fin.incomplete,
        "progress": progress,
    })))
}

async fn download(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let fin = st.store.read(&id, |s| s.finalize())??;
    let body = contrast::to_jsonl(std::slice::from_ref(&fin.contrast_set));
    let disposition = format!("attachment; filename=\"{}.contrast.jsonl\"", fin.contrast_set.feature_id);
    Ok((
        [
            (header::CONTENT_TYPE, "application/x-ndjson".to_string()),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        body,
    )
        .into_response())
}

/// API routes under `/api`, plus static UI assets from `ui_dir` when given.
pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/features", get(list_features))
        .route("/api/sessions", get(list_sessions).post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/next", get(next_candidate))
        .route("/api/sessions/{id}/label", post(label))
        .route("/api/sessions/{id}/undo", post(undo))
        .route("/api/sessions/{id}/finalize", post(finalize))
        .route("/api/sessions/{id}/contrast-set", get(download))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// A server running on its own thread and runtime.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Binds `addr` (port 0 picks a free port) and serves in the background.
pub fn spawn(state: AppState, ui_dir: Option<PathBuf>, addr: SocketAddr) -> crate::Result<ServerHandle> {
    let listener = std::net::TcpListener::bind(addr).map_err(|e| Error::io(addr.to_string(), e))?;
    listener.set_nonblocking(true).map_err(|e| Error::io(addr.to_string(), e))?;
    let bound = listener.local_addr().map_err(|e| Error::io(addr.to_string(), e))?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let app = router(state, ui_dir);
    let thread = std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .expect("tokio runtime");
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).expect("listener");
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await
                .expect("server");
        });
    });
    Ok(ServerHandle {
        addr: bound,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

/// Serves in the foreground until Ctrl-C.
pub fn serve_forever(state: AppState, ui_dir: Option<PathBuf>, addr: SocketAddr) -> crate::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("tokio runtime", e))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Error::io(addr.to_string(), e))?;
        log::info!("annotation service listening on http://{}", listener.local_addr().map_err(|e| Error::io(addr.to_string(), e))?);
        axum::serve(listener, router(state, ui_dir))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Error::io(addr.to_string(), e))
    })
}
