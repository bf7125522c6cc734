//! Static file server for a persisted corpus directory, so a crawl can run
//! over real HTTP end to end.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::State;
use axum::http::{StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::any;
use axum::Router;

use crate::server::{NetError, ServeHandle};

pub fn serve_corpus_dir(dir: &Path, listen: &str) -> Result<ServeHandle, NetError> {
    let state = Arc::new(dir.to_path_buf());
    let router = Router::new().fallback(any(serve_file)).with_state(state);
    crate::server::spawn_server_for(listen, None, router)
}

async fn serve_file(State(dir): State<Arc<PathBuf>>, uri: Uri) -> Response {
    let mut path = dir.as_ref().clone();
    for seg in uri.path().split('/') {
        if seg.is_empty() || seg == ".." {
            continue;
        }
        path.push(seg);
    }
    match tokio::fs::read(&path).await {
        Ok(bytes) => (StatusCode::OK, bytes).into_response(),
        Err(_) => (StatusCode::NOT_FOUND, "not found").into_response(),
    }
}
