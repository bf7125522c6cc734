//! HTTP bindings for the search stack: one axum server per node kind, the
//! matching reqwest client transports, and a fetcher that crawls a corpus
//! served over HTTP. Node logic lives in `hiersearch-core`; nothing here
//! changes semantics, only transport.

pub mod client;
pub mod corpus_server;
pub mod fetch;
pub mod server;

pub use client::{HttpAggClient, HttpLeafClient, HttpRootClient};
pub use fetch::HttpFetcher;
pub use server::{serve_agg, serve_leaf, serve_root, ServeHandle};
