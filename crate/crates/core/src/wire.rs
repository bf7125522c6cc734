//! JSON shapes shared by the three node layers. Field names here are the
//! protocol; handle with care.

use serde::{Deserialize, Serialize};

use crate::indexer::MetadataRecord;

/// One ranked result as it appears on the wire. `score` is the keyword score
/// at a leaf, the overlap count at an aggregator, and the summed overlap at
/// the root; `keyword_total` appears from the aggregator layer up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireResult {
    pub url: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub score: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyword_total: Option<u64>,
    pub sources: Vec<String>,
}

/// Search envelope. Leaves and aggregators always answer `partial: false`;
/// the root sets it when any source failed and names the failures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query: String,
    pub results: Vec<WireResult>,
    pub partial: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_sources: Option<Vec<String>>,
}

/// One `/v1/export` page. Records are version-ascending and include
/// tombstones so harvesters can propagate deletions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportResponse {
    pub records: Vec<MetadataRecord>,
    pub next_cursor: u64,
    pub done: bool,
}

/// `/v1/refresh` outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefreshReport {
    pub generation: u64,
    pub changed: u64,
    pub tombstones: u64,
}

/// `/v1/harvest` outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestReport {
    pub leaves: u64,
    pub applied: u64,
    pub failed: Vec<String>,
}

/// Error body carried on non-2xx responses; `code` is the stable part.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl ErrorBody {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            message: message.into(),
        }
    }
}

/// `/v1/sources` entry on the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceHealth {
    pub name: String,
    pub endpoint: String,
    pub healthy: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourcesResponse {
    pub sources: Vec<SourceHealth>,
}
