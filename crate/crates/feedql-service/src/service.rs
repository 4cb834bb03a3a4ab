//! Router, handlers, and the service runner.

use std::collections::{BTreeSet, HashMap};
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, RawQuery, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use sha2::{Digest, Sha256};
use thiserror::Error;

use feedql::aggregate::{execute_plan, plan_query, AggregateError};
use feedql::atom::serialize_feed;
use feedql::capabilities::{serialize_capabilities, Capabilities, Tier};
use feedql::collection::{Collection, CollectionError, Member};
use feedql::eval::EvalContext;
use feedql::query::{parse_uri_params, validate_against_capabilities};

use crate::client::HttpClient;
use crate::config::{FeedsetSpec, ServiceConfig};
use crate::KEY_HEADER;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown collection {0:?}")]
    UnknownCollection(String),
    #[error(transparent)]
    Collection(#[from] CollectionError),
    #[error("cannot start service: {0}")]
    Init(String),
}

struct CollectionState {
    collection: RwLock<Arc<Collection>>,
    tier: Tier,
}

/// Shared service state: collections behind snapshot semantics (readers
/// clone an Arc and work on a consistent state; a writer swaps in a new
/// one), feedset registries, and the API key list.
pub struct ServiceState {
    collections: HashMap<String, CollectionState>,
    feedsets: HashMap<String, FeedsetSpec>,
    keys: Vec<String>,
}

impl ServiceState {
    pub fn new() -> Self {
        ServiceState { collections: HashMap::new(), feedsets: HashMap::new(), keys: Vec::new() }
    }

    pub fn with_keys(mut self, keys: Vec<String>) -> Self {
        self.keys = keys;
        self
    }

    pub fn add_collection(&mut self, collection: Collection, tier: Tier) {
        self.collections.insert(
            collection.name().to_string(),
            CollectionState { collection: RwLock::new(Arc::new(collection)), tier },
        );
    }

    pub fn add_feedset(&mut self, name: &str, sources: Vec<String>, tier: Tier) {
        self.feedsets
            .insert(name.to_string(), FeedsetSpec { name: name.to_string(), sources, tier });
    }

    /// Loads every collection file referenced by the config.
    pub fn from_config(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let mut state = ServiceState::new().with_keys(config.keys.clone());
        for spec in &config.collections {
            let collection = Collection::load(
                &spec.name,
                &spec.atom,
                spec.hidden.as_deref(),
                spec.page_size,
                spec.archive_size,
            )
            .map_err(|e| {
                ServiceError::Init(format!(
                    "collection {:?} ({}): {e}",
                    spec.name,
                    spec.atom.display()
                ))
            })?;
            state.add_collection(collection, spec.tier);
        }
        for spec in &config.feedsets {
            state.add_feedset(&spec.name, spec.sources.clone(), spec.tier);
        }
        Ok(state)
    }

    pub fn snapshot(&self, name: &str) -> Option<(Arc<Collection>, Tier)> {
        self.collections.get(name).map(|c| {
            (c.collection.read().expect("collection lock poisoned").clone(), c.tier)
        })
    }

    /// Replaces a collection's state through an upsert; readers holding the
    /// previous snapshot are unaffected.
    pub fn upsert(&self, name: &str, member: Member) -> Result<(), ServiceError> {
        let cell = self
            .collections
            .get(name)
            .ok_or_else(|| ServiceError::UnknownCollection(name.to_string()))?;
        let mut slot = cell.collection.write().expect("collection lock poisoned");
        let next = slot.upsert_member(member)?;
        *slot = Arc::new(next);
        Ok(())
    }
}

impl Default for ServiceState {
    fn default() -> Self {
        ServiceState::new()
    }
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/feeds/{name}", get(feed_handler))
        .route("/feeds/{name}/archive/{index}", get(archive_handler))
        .route("/feeds/{name}/query", get(query_handler))
        .route("/feeds/{name}/capabilities", get(capabilities_handler))
        .route("/feedsets/{name}/query", get(feedset_handler))
        .with_state(state)
}

const ATOM_TYPE: &str = "application/atom+xml";
const XML_TYPE: &str = "application/xml";

fn compute_etag(body: &str) -> String {
    let digest = Sha256::digest(body.as_bytes());
    let hex: String = digest.iter().take(16).map(|b| format!("{b:02x}")).collect();
    format!("\"{hex}\"")
}

fn etag_matches(headers: &HeaderMap, etag: &str) -> bool {
    headers
        .get("if-none-match")
        .and_then(|v| v.to_str().ok())
        .map(|header| header.split(',').map(str::trim).any(|t| t == etag || t == "*"))
        .unwrap_or(false)
}

/// A cacheable Atom response with a strong ETag; conditional GETs with a
/// matching If-None-Match collapse to 304.
fn cacheable(body: String, cache_control: &str, headers: &HeaderMap) -> Response {
    let etag = compute_etag(&body);
    let meta = [
        ("content-type", ATOM_TYPE.to_string()),
        ("etag", etag.clone()),
        ("cache-control", cache_control.to_string()),
    ];
    if etag_matches(headers, &etag) {
        (StatusCode::NOT_MODIFIED, meta, String::new()).into_response()
    } else {
        (StatusCode::OK, meta, body).into_response()
    }
}

fn private_atom(body: String) -> Response {
    (
        StatusCode::OK,
        [("content-type", ATOM_TYPE), ("cache-control", "private, no-store")],
        body,
    )
        .into_response()
}

fn not_found(message: String) -> Response {
    (StatusCode::NOT_FOUND, message + "\n").into_response()
}

fn bad_request(message: String) -> Response {
    (StatusCode::BAD_REQUEST, message + "\n").into_response()
}

fn unauthorized() -> Response {
    (StatusCode::UNAUTHORIZED, "missing or invalid API key\n").into_response()
}

fn constant_time_eq(a: &str, b: &str) -> bool {
    let (a, b) = (a.as_bytes(), b.as_bytes());
    if a.len() != b.len() {
        return false;
    }
    a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

fn authorized(state: &ServiceState, tier: Tier, headers: &HeaderMap) -> bool {
    match tier {
        Tier::Open => true,
        Tier::Keyed => headers
            .get(KEY_HEADER)
            .and_then(|v| v.to_str().ok())
            .map(|presented| state.keys.iter().any(|valid| constant_time_eq(valid, presented)))
            .unwrap_or(false),
    }
}

fn query_pairs(raw: &Option<String>) -> Vec<(String, String)> {
    match raw {
        Some(text) => url::form_urlencoded::parse(text.as_bytes())
            .map(|(k, v)| (k.into_owned(), v.into_owned()))
            .collect(),
        None => Vec::new(),
    }
}

/// Plain feed endpoint. `page` selects an RFC 5005 page; every other
/// parameter is deliberately ignored so the response stays identical to the
/// parameterless GET and shared caches stay useful.
async fn feed_handler(
    State(state): State<Arc<ServiceState>>,
    Path(name): Path<String>,
    RawQuery(raw): RawQuery,
    headers: HeaderMap,
) -> Response {
    let Some((collection, _)) = state.snapshot(&name) else {
        return not_found(format!("unknown collection {name:?}"));
    };
    let page = query_pairs(&raw).into_iter().find(|(k, _)| k == "page").map(|(_, v)| v);
    let feed = match page {
        None => collection.current_feed(),
        Some(value) => match value.parse::<usize>() {
            Ok(number) => match collection.paged_feed(number) {
                Ok(feed) => feed,
                Err(e) => return not_found(e.to_string()),
            },
            Err(_) => return not_found(format!("bad page {value:?}")),
        },
    };
    match serialize_feed(&feed) {
        Ok(body) => cacheable(body, "public", &headers),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

async fn archive_handler(
    State(state): State<Arc<ServiceState>>,
    Path((name, index)): Path<(String, usize)>,
    headers: HeaderMap,
) -> Response {
    let Some((collection, _)) = state.snapshot(&name) else {
        return not_found(format!("unknown collection {name:?}"));
    };
    let feed = match collection.archived_feed(index) {
        Ok(feed) => feed,
        Err(e) => return not_found(e.to_string()),
    };
    let cache_control = if collection.is_archive_full(index) {
        "public, max-age=31536000, immutable"
    } else {
        "public"
    };
    match serialize_feed(&feed) {
        Ok(body) => cacheable(body, cache_control, &headers),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

async fn capabilities_handler(
    State(state): State<Arc<ServiceState>>,
    Path(name): Path<String>,
) -> Response {
    let Some((collection, tier)) = state.snapshot(&name) else {
        return not_found(format!("unknown collection {name:?}"));
    };
    let body = serialize_capabilities(&collection.capabilities(tier));
    (StatusCode::OK, [("content-type", XML_TYPE), ("cache-control", "public")], body).into_response()
}

/// Collection query endpoint: keyed when the collection's tier says so,
/// validated against the collection's capabilities, never shared-cacheable.
async fn query_handler(
    State(state): State<Arc<ServiceState>>,
    Path(name): Path<String>,
    RawQuery(raw): RawQuery,
    headers: HeaderMap,
) -> Response {
    let Some((collection, tier)) = state.snapshot(&name) else {
        return not_found(format!("unknown collection {name:?}"));
    };
    if !authorized(&state, tier, &headers) {
        return unauthorized();
    }
    let query = match parse_uri_params(&query_pairs(&raw)) {
        Ok(query) => query,
        Err(e) => return bad_request(e.to_string()),
    };
    let caps = collection.capabilities(tier);
    let violations = validate_against_capabilities(&query, &caps);
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return bad_request(lines.join("\n"));
    }
    let declared: BTreeSet<String> = caps
        .selectors
        .iter()
        .filter_map(|(name, _)| name.strip_prefix("x:").map(str::to_string))
        .collect();
    match collection.collection_query(&query, &EvalContext::new(), &declared) {
        Ok(feed) => match serialize_feed(&feed) {
            Ok(body) => private_atom(body),
            Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
        },
        Err(e) => bad_request(e.to_string()),
    }
}

/// Feedset query endpoint: discovers each source's capabilities from its
/// feed, plans the pushdown, executes with an HTTP fetcher, and evaluates
/// the residual here.
async fn feedset_handler(
    State(state): State<Arc<ServiceState>>,
    Path(name): Path<String>,
    RawQuery(raw): RawQuery,
    headers: HeaderMap,
) -> Response {
    let Some(spec) = state.feedsets.get(&name).cloned() else {
        return not_found(format!("unknown feedset {name:?}"));
    };
    if !authorized(&state, spec.tier, &headers) {
        return unauthorized();
    }
    let query = match parse_uri_params(&query_pairs(&raw)) {
        Ok(query) => query,
        Err(e) => return bad_request(e.to_string()),
    };
    // The intermediary evaluates the full feed-level language including
    // cooccur, but no collection-scoped selectors: it has no access to any
    // source's hidden fields, and the residual re-application would drop
    // every entry a source correctly returned for them.
    let violations = validate_against_capabilities(&query, &Capabilities::full_language());
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return bad_request(lines.join("\n"));
    }

    let result = tokio::task::spawn_blocking(move || {
        let client = HttpClient::new(None);
        let mut sources = Vec::new();
        for origin in &spec.sources {
            let feed = client.fetch_feed(origin).map_err(|e| AggregateError::SourceUnavailable {
                origin: origin.clone(),
                reason: e.to_string(),
            })?;
            // a source without (or with an unreadable) capability document
            // simply gets nothing pushed
            let caps = client
                .fetch_capabilities(origin, &feed)
                .ok()
                .flatten()
                .map(|(_, caps)| caps);
            sources.push((origin.clone(), caps));
        }
        let plan = plan_query(&query, &sources);
        execute_plan(&plan, &client, &EvalContext::new())
    })
    .await
    .expect("feedset task panicked");

    match result {
        Ok(feed) => match serialize_feed(&feed) {
            Ok(body) => private_atom(body),
            Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
        },
        Err(AggregateError::SourceUnavailable { origin, reason }) => (
            StatusCode::BAD_GATEWAY,
            format!("source {origin} unavailable: {reason}\n"),
        )
            .into_response(),
        Err(e) => bad_request(e.to_string()),
    }
}

/// A service bound to a local address, running on its own thread and
/// runtime so synchronous callers (tests, the CLI) can drive it.
pub struct RunningService {
    pub addr: SocketAddr,
    state: Arc<ServiceState>,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl RunningService {
    pub fn start(state: ServiceState, bind: &str) -> Result<RunningService, ServiceError> {
        let state = Arc::new(state);
        let router_state = state.clone();
        let bind = bind.to_string();
        let (addr_tx, addr_rx) = std::sync::mpsc::channel::<Result<SocketAddr, String>>();
        let (shutdown_tx, shutdown_rx) = tokio::sync::oneshot::channel::<()>();

        let thread = std::thread::spawn(move || {
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("tokio runtime");
            runtime.block_on(async move {
                let listener = match tokio::net::TcpListener::bind(&bind).await {
                    Ok(listener) => listener,
                    Err(e) => {
                        let _ = addr_tx.send(Err(format!("cannot bind {bind}: {e}")));
                        return;
                    }
                };
                let addr = listener.local_addr().expect("bound listener has an address");
                let _ = addr_tx.send(Ok(addr));
                let app = router(router_state);
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = shutdown_rx.await;
                    })
                    .await
                    .ok();
            });
        });

        let addr = addr_rx
            .recv()
            .map_err(|_| ServiceError::Init("service thread died before binding".into()))?
            .map_err(ServiceError::Init)?;
        Ok(RunningService { addr, state, shutdown: Some(shutdown_tx), thread: Some(thread) })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn feed_url(&self, collection: &str) -> String {
        format!("{}/feeds/{collection}", self.base_url())
    }

    pub fn state(&self) -> &ServiceState {
        &self.state
    }

    pub fn stop(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

impl Drop for RunningService {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}
