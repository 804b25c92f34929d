//! HTTP API over a loaded index.
//!
//! | route | response |
//! |---|---|
//! | `GET /relate?input=&types=&k=&candidates=` | context network JSON |
//! | `GET /entity/{kind}/{key}` | entity detail with 10 nearest neighbors |
//! | `GET /meta` | index metadata |
//! | `GET /healthz` | `ok` |
//!
//! Anything else falls through to the static directory when one is set.
//! Errors are JSON `{code, message}`; `EMPTY_QUERY` also carries the
//! unresolved query parts. Response schemas live in `schema/`.

use std::collections::HashMap;
use std::future::Future;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::UNIX_EPOCH;

use axum::extract::rejection::QueryRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Serialize;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

use ctxscope_core::query::{self, top_candidates, DEFAULT_CANDIDATES, DEFAULT_DISPLAY};
use ctxscope_core::storage::{self, FORMAT_VERSION};
use ctxscope_core::{relate, EntityId, EntityKind, Error, KindCounts, KindSet, RelateOptions, SemanticIndex, Stopwords};

pub const MAX_K: usize = 200;
pub const MAX_CANDIDATES: usize = 10_000;
pub const ENTITY_NEIGHBORS: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("invalid CORS origin {0:?}")]
    InvalidOrigin(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// An index plus where it came from.
#[derive(Debug)]
pub struct LoadedIndex {
    pub index: SemanticIndex,
    pub path: Option<PathBuf>,
    /// Modification time of the index file, seconds since the Unix epoch.
    pub build_timestamp: Option<u64>,
}

impl LoadedIndex {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, Error> {
        let path = path.as_ref();
        let index = storage::load(path)?;
        let build_timestamp = std::fs::metadata(path)
            .and_then(|m| m.modified())
            .ok()
            .and_then(|t| t.duration_since(UNIX_EPOCH).ok())
            .map(|d| d.as_secs());
        Ok(LoadedIndex { index, path: Some(path.to_path_buf()), build_timestamp })
    }

    pub fn in_memory(index: SemanticIndex) -> Self {
        LoadedIndex { index, path: None, build_timestamp: None }
    }
}

/// Shared server state. Requests take a snapshot of the current index, so a
/// reload swaps indexes between requests without blocking running queries.
#[derive(Debug)]
pub struct AppState {
    current: RwLock<Option<Arc<LoadedIndex>>>,
    stopwords: Stopwords,
}

impl Default for AppState {
    fn default() -> Self {
        AppState { current: RwLock::new(None), stopwords: Stopwords::english() }
    }
}

impl AppState {
    pub fn new(loaded: Option<LoadedIndex>) -> Self {
        AppState { current: RwLock::new(loaded.map(Arc::new)), ..Default::default() }
    }

    pub fn current(&self) -> Option<Arc<LoadedIndex>> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn replace(&self, loaded: LoadedIndex) {
        *self.current.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(loaded));
    }

    /// Loads `path` and swaps it in; the old index stays on failure.
    pub fn reload(&self, path: impl AsRef<Path>) -> Result<(), Error> {
        let loaded = LoadedIndex::from_file(path)?;
        self.replace(loaded);
        Ok(())
    }

    pub fn stopwords(&self) -> &Stopwords {
        &self.stopwords
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unresolved: Option<Vec<String>>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), unresolved: None }
    }

    pub fn bad_params(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BAD_PARAMS", message)
    }

    pub fn not_loaded() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "INDEX_NOT_LOADED", "no index is loaded")
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::EmptyQuery { unresolved } => ApiError {
                unresolved: Some(unresolved),
                ..Self::new(StatusCode::BAD_REQUEST, "EMPTY_QUERY", "no query part matches an indexed entity")
            },
            Error::NoSignal => Self::new(StatusCode::BAD_REQUEST, "NO_SIGNAL", e.to_string()),
            Error::UnknownEntity(_) => Self::new(StatusCode::NOT_FOUND, "UNKNOWN_ENTITY", e.to_string()),
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

/// Validated `/relate` parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RelateRequest {
    pub input: String,
    pub types: Option<KindSet>,
    pub k: usize,
    pub candidates: usize,
}

impl RelateRequest {
    pub fn new(input: String, types: Option<KindSet>, k: usize, candidates: Option<usize>) -> Result<Self, ApiError> {
        if !(1..=MAX_K).contains(&k) {
            return Err(ApiError::bad_params(format!("k must be in [1, {MAX_K}], got {k}")));
        }
        let candidates = candidates.unwrap_or(DEFAULT_CANDIDATES.max(k));
        if !(k..=MAX_CANDIDATES).contains(&candidates) {
            return Err(ApiError::bad_params(format!("candidates must be in [{k}, {MAX_CANDIDATES}], got {candidates}")));
        }
        Ok(RelateRequest { input, types, k, candidates })
    }

    pub fn from_params(params: &HashMap<String, String>) -> Result<Self, ApiError> {
        let number = |name: &str| -> Result<Option<usize>, ApiError> {
            match params.get(name).map(|v| v.trim()).filter(|v| !v.is_empty()) {
                None => Ok(None),
                Some(v) => v.parse().map(Some).map_err(|_| ApiError::bad_params(format!("{name}: not a count: {v:?}"))),
            }
        };
        let types = match params.get("types").map(|v| v.trim()).filter(|v| !v.is_empty()) {
            None => None,
            Some(list) => Some(KindSet::parse_list(list).map_err(|e| ApiError::bad_params(format!("types: {e}")))?),
        };
        let input = params.get("input").cloned().unwrap_or_default();
        Self::new(input, types, number("k")?.unwrap_or(DEFAULT_DISPLAY), number("candidates")?)
    }

    pub fn options(&self) -> RelateOptions {
        RelateOptions { k_display: self.k, k_candidates: self.candidates, type_filter: self.types, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighbor {
    pub id: String,
    pub kind: EntityKind,
    pub key: String,
    pub similarity: f64,
    pub specificity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntityDetail {
    pub kind: EntityKind,
    pub key: String,
    pub norm_active: bool,
    pub norm: f32,
    pub mu: f32,
    pub sigma: f32,
    pub top_neighbors: Vec<Neighbor>,
}

/// Detail for one entity: its background statistics and its nearest active
/// neighbors by cosine, excluding itself. Inactive entities have none.
pub fn entity_detail(index: &SemanticIndex, entity: &EntityId) -> Result<EntityDetail, Error> {
    let pos = index.position(entity).ok_or_else(|| Error::UnknownEntity(entity.clone()))?;
    let bg = index.background(pos);
    let mut detail = EntityDetail {
        kind: entity.kind,
        key: entity.key.clone(),
        norm_active: index.is_active(pos),
        norm: index.norm(pos),
        mu: bg.mu,
        sigma: bg.sigma,
        top_neighbors: Vec::new(),
    };
    if detail.norm_active {
        let q = index.unit_row(pos);
        detail.top_neighbors = top_candidates(index, &q, None, ENTITY_NEIGHBORS + 1)?
            .into_iter()
            .filter(|c| c.position != pos)
            .take(ENTITY_NEIGHBORS)
            .map(|c| {
                let nb = index.background(c.position);
                Neighbor {
                    id: c.entity.to_string(),
                    kind: c.entity.kind,
                    key: c.entity.key,
                    similarity: c.similarity,
                    specificity: query::specificity(c.similarity, nb.mu, nb.sigma),
                }
            })
            .collect();
    }
    Ok(detail)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Defaults {
    pub k: usize,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexMeta {
    pub format_version: u16,
    pub dims: usize,
    pub seed: u64,
    pub vocab_size: u64,
    pub entities: KindCounts,
    pub active_entities: usize,
    pub background_sample: u32,
    pub build_timestamp: Option<u64>,
    pub defaults: Defaults,
}

pub fn index_meta(loaded: &LoadedIndex) -> IndexMeta {
    let index = &loaded.index;
    IndexMeta {
        format_version: FORMAT_VERSION,
        dims: index.dims(),
        seed: index.config().seed,
        vocab_size: index.config().vocab_size,
        entities: KindCounts::from_array(index.counts_by_kind()),
        active_entities: index.active_count(),
        background_sample: index.background_stats().sample_size,
        build_timestamp: loaded.build_timestamp,
        defaults: Defaults { k: DEFAULT_DISPLAY, candidates: DEFAULT_CANDIDATES },
    }
}

#[derive(Debug, Clone, Default)]
pub struct RouterOptions {
    pub static_dir: Option<PathBuf>,
    /// Allowed CORS origins; empty allows any origin.
    pub cors_origins: Vec<String>,
}

pub fn cors_layer(origins: &[String]) -> Result<CorsLayer, ServerError> {
    let allow = if origins.is_empty() {
        AllowOrigin::any()
    } else {
        let values = origins
            .iter()
            .map(|o| HeaderValue::from_str(o).map_err(|_| ServerError::InvalidOrigin(o.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        AllowOrigin::list(values)
    };
    Ok(CorsLayer::new().allow_methods([Method::GET]).allow_origin(allow))
}

pub fn router(state: Arc<AppState>, opts: &RouterOptions) -> Result<Router, ServerError> {
    let mut app = Router::new()
        .route("/relate", get(relate_handler))
        .route("/entity/{kind}/{key}", get(entity_handler))
        .route("/meta", get(meta_handler))
        .route("/healthz", get(|| async { "ok" }));
    if let Some(dir) = &opts.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    Ok(app.layer(cors_layer(&opts.cors_origins)?).with_state(state))
}

pub async fn serve<F>(listener: tokio::net::TcpListener, app: Router, shutdown: F) -> io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}

fn json_body(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn relate_handler(
    State(state): State<Arc<AppState>>,
    params: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(params) = params.map_err(|e| ApiError::bad_params(e.body_text()))?;
    let req = RelateRequest::from_params(&params)?;
    let loaded = state.current().ok_or_else(ApiError::not_loaded)?;
    let network = tokio::task::spawn_blocking(move || {
        relate(&loaded.index, &req.input, state.stopwords(), &req.options())
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))??;
    Ok(json_body(network.to_json()))
}

async fn entity_handler(
    State(state): State<Arc<AppState>>,
    UrlPath((kind, key)): UrlPath<(String, String)>,
) -> Result<Json<EntityDetail>, ApiError> {
    let kind: EntityKind = kind.parse().map_err(|e| ApiError::bad_params(format!("{e}")))?;
    let loaded = state.current().ok_or_else(ApiError::not_loaded)?;
    let entity = EntityId::new(kind, kind.normalize_key(&key));
    Ok(Json(entity_detail(&loaded.index, &entity)?))
}

async fn meta_handler(State(state): State<Arc<AppState>>) -> Result<Json<IndexMeta>, ApiError> {
    let loaded = state.current().ok_or_else(ApiError::not_loaded)?;
    Ok(Json(index_meta(&loaded)))
}
