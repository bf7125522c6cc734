//! Axum servers for the three node kinds.
//!
//! Each `serve_*` call binds the listen address on a dedicated thread with
//! its own runtime and returns once the socket is live, so callers stay
//! synchronous. Handlers parse query strings by hand: the error codes on the
//! wire (`empty_query`, `invalid_limit`, `invalid_cursor`, `no_sources`) are
//! part of the protocol and must not depend on extractor internals.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use thiserror::Error;

use hiersearch_core::aggregator::AggregatorNode;
use hiersearch_core::indexer::QueryError;
use hiersearch_core::leafnode::LeafNode;
use hiersearch_core::rootnode::{FederationError, RootNode};
use hiersearch_core::wire::{ErrorBody, SourcesResponse};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("bind {listen}: {source}")]
    Bind {
        listen: String,
        source: std::io::Error,
    },
    #[error("server io: {0}")]
    Io(#[from] std::io::Error),
    #[error("server thread died before binding")]
    StartupFailed,
}

/// A running server. Dropping the handle shuts it down; [`ServeHandle::wait`]
/// instead parks until the server exits (i.e. forever, for a CLI process).
pub struct ServeHandle {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<()>>,
}

impl ServeHandle {
    pub fn endpoint(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    pub fn wait(mut self) {
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

impl Drop for ServeHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

pub(crate) fn spawn_server_for(
    listen: &str,
    port_file: Option<&Path>,
    router: Router,
) -> Result<ServeHandle, NetError> {
    let listen = listen.to_string();
    let listen_label = listen.clone();
    let port_file: Option<PathBuf> = port_file.map(Path::to_path_buf);
    let (addr_tx, addr_rx) = std::sync::mpsc::channel::<Result<SocketAddr, std::io::Error>>();
    let (shutdown_tx, shutdown_rx) = tokio::sync::oneshot::channel::<()>();

    let thread = thread::spawn(move || {
        let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
            Ok(rt) => rt,
            Err(e) => {
                let _ = addr_tx.send(Err(e));
                return;
            }
        };
        runtime.block_on(async move {
            let listener = match tokio::net::TcpListener::bind(&listen).await {
                Ok(l) => l,
                Err(e) => {
                    let _ = addr_tx.send(Err(e));
                    return;
                }
            };
            let addr = listener.local_addr().expect("bound listener has an addr");
            if let Some(path) = port_file {
                // Written only after the bind succeeds: a parent process can
                // poll for this file to learn the ephemeral port.
                if let Err(e) = std::fs::write(&path, addr.to_string()) {
                    tracing::error!(?path, %e, "failed to write port file");
                }
            }
            let _ = addr_tx.send(Ok(addr));
            let serve = axum::serve(listener, router).with_graceful_shutdown(async {
                let _ = shutdown_rx.await;
            });
            if let Err(e) = serve.await {
                tracing::error!(%e, "server exited with error");
            }
        });
    });

    match addr_rx.recv() {
        Ok(Ok(addr)) => Ok(ServeHandle {
            addr,
            shutdown: Some(shutdown_tx),
            thread: Some(thread),
        }),
        Ok(Err(source)) => Err(NetError::Bind {
            listen: listen_label,
            source,
        }),
        Err(_) => Err(NetError::StartupFailed),
    }
}

fn error_response(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    (status, Json(ErrorBody::new(code, message))).into_response()
}

fn query_error_response(err: QueryError) -> Response {
    match err {
        QueryError::EmptyQuery => error_response(StatusCode::BAD_REQUEST, "empty_query", "query has no terms"),
        QueryError::InvalidLimit => error_response(
            StatusCode::BAD_REQUEST,
            "invalid_limit",
            "limit must be in [1, 1000]",
        ),
    }
}

struct Params(HashMap<String, String>);

impl Params {
    fn str(&self, key: &str) -> &str {
        self.0.get(key).map(String::as_str).unwrap_or("")
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ()> {
        match self.0.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| ()),
        }
    }

    fn flag(&self, key: &str) -> bool {
        matches!(self.0.get(key).map(String::as_str), Some("true") | Some("1"))
    }
}

// ---- leaf ----------------------------------------------------------------

pub fn serve_leaf(
    leaf: Arc<LeafNode>,
    listen: &str,
    port_file: Option<&Path>,
) -> Result<ServeHandle, NetError> {
    spawn_server_for(listen, port_file, leaf_router(leaf))
}

pub fn leaf_router(leaf: Arc<LeafNode>) -> Router {
    Router::new()
        .route("/v1/search", get(leaf_search))
        .route("/v1/export", get(leaf_export))
        .route("/v1/refresh", post(leaf_refresh))
        .route("/v1/ping", get(ping))
        .with_state(leaf)
}

async fn leaf_search(
    State(leaf): State<Arc<LeafNode>>,
    Query(params): Query<HashMap<String, String>>,
) -> Response {
    let params = Params(params);
    let Ok(limit) = params.parse::<usize>("limit", 10) else {
        return query_error_response(QueryError::InvalidLimit);
    };
    match leaf.handle_search(params.str("q"), limit) {
        Ok(response) => Json(response).into_response(),
        Err(err) => query_error_response(err),
    }
}

async fn leaf_export(
    State(leaf): State<Arc<LeafNode>>,
    Query(params): Query<HashMap<String, String>>,
) -> Response {
    let params = Params(params);
    let Ok(cursor) = params.parse::<u64>("cursor", 0) else {
        return error_response(
            StatusCode::BAD_REQUEST,
            "invalid_cursor",
            "cursor must be an unsigned integer",
        );
    };
    let Ok(max) = params.parse::<u32>("max", 0) else {
        return query_error_response(QueryError::InvalidLimit);
    };
    Json(leaf.handle_export(cursor, max)).into_response()
}

async fn leaf_refresh(State(leaf): State<Arc<LeafNode>>) -> Response {
    match tokio::task::spawn_blocking(move || leaf.refresh()).await {
        Ok(Ok(report)) => Json(report).into_response(),
        Ok(Err(err)) => error_response(StatusCode::INTERNAL_SERVER_ERROR, "refresh_failed", err.to_string()),
        Err(join) => error_response(StatusCode::INTERNAL_SERVER_ERROR, "refresh_failed", join.to_string()),
    }
}

async fn ping() -> Response {
    Json(serde_json::json!({"ok": true})).into_response()
}

// ---- aggregator ----------------------------------------------------------

pub fn serve_agg(
    agg: Arc<AggregatorNode>,
    listen: &str,
    port_file: Option<&Path>,
) -> Result<ServeHandle, NetError> {
    spawn_server_for(listen, port_file, agg_router(agg))
}

pub fn agg_router(agg: Arc<AggregatorNode>) -> Router {
    Router::new()
        .route("/v1/search", get(agg_search))
        .route("/v1/harvest", post(agg_harvest))
        .route("/v1/overlap", get(agg_overlap))
        .route("/v1/ping", get(ping))
        .with_state(agg)
}

async fn agg_search(
    State(agg): State<Arc<AggregatorNode>>,
    Query(params): Query<HashMap<String, String>>,
) -> Response {
    let params = Params(params);
    let Ok(limit) = params.parse::<usize>("limit", 10) else {
        return query_error_response(QueryError::InvalidLimit);
    };
    match agg.search(params.str("q"), limit, params.flag("exhaustive")) {
        Ok(response) => Json(response).into_response(),
        Err(err) => query_error_response(err),
    }
}

async fn agg_harvest(State(agg): State<Arc<AggregatorNode>>) -> Response {
    match tokio::task::spawn_blocking(move || agg.harvest()).await {
        Ok(report) => Json(report).into_response(),
        Err(join) => error_response(StatusCode::INTERNAL_SERVER_ERROR, "harvest_failed", join.to_string()),
    }
}

/// Read-only view of url → overlap count, for harness oracles.
async fn agg_overlap(State(agg): State<Arc<AggregatorNode>>) -> Response {
    Json(serde_json::json!({ "counts": agg.overlap_counts() })).into_response()
}

// ---- root ----------------------------------------------------------------

pub fn serve_root(
    root: Arc<RootNode>,
    listen: &str,
    port_file: Option<&Path>,
) -> Result<ServeHandle, NetError> {
    spawn_server_for(listen, port_file, root_router(root))
}

pub fn root_router(root: Arc<RootNode>) -> Router {
    Router::new()
        .route("/v1/search", get(root_search))
        .route("/v1/sources", get(root_sources))
        .route("/v1/ping", get(ping))
        .with_state(root)
}

async fn root_search(
    State(root): State<Arc<RootNode>>,
    Query(params): Query<HashMap<String, String>>,
) -> Response {
    let params = Params(params);
    let Ok(limit) = params.parse::<usize>("limit", 10) else {
        return error_response(StatusCode::BAD_REQUEST, "invalid_limit", "limit must be in [1, 1000]");
    };
    let query = params.str("q").to_string();
    let exhaustive = params.flag("exhaustive");
    let outcome =
        tokio::task::spawn_blocking(move || root.federated_search(&query, limit, exhaustive)).await;
    match outcome {
        Ok(Ok(response)) => Json(response).into_response(),
        Ok(Err(FederationError::EmptyQuery)) => {
            error_response(StatusCode::BAD_REQUEST, "empty_query", "query has no terms")
        }
        Ok(Err(FederationError::InvalidLimit)) => {
            error_response(StatusCode::BAD_REQUEST, "invalid_limit", "limit must be in [1, 1000]")
        }
        Ok(Err(FederationError::NoSources)) => error_response(
            StatusCode::SERVICE_UNAVAILABLE,
            "no_sources",
            "every aggregator failed or timed out",
        ),
        Ok(Err(other)) => {
            error_response(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string())
        }
        Err(join) => error_response(StatusCode::INTERNAL_SERVER_ERROR, "internal", join.to_string()),
    }
}

async fn root_sources(State(root): State<Arc<RootNode>>) -> Response {
    match tokio::task::spawn_blocking(move || root.sources()).await {
        Ok(sources) => Json(SourcesResponse { sources }).into_response(),
        Err(join) => error_response(StatusCode::INTERNAL_SERVER_ERROR, "internal", join.to_string()),
    }
}
