//! Top-layer broker: no spider, no page database.
//!
//! A query fans out to every registered aggregator in parallel; per-URL
//! scores coming back (overlap counts) are simply added up, and one ranked
//! list is returned. Sources that fail or miss the deadline are reported in
//! the response rather than failing the query — only a total blackout is an
//! error.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregator::{AggregatorNode, TransportError};
use crate::indexer::terms_of;
use crate::leafnode::MAX_SEARCH_LIMIT;
use crate::wire::{SearchResponse, SourceHealth, WireResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregatorRef {
    pub name: String,
    pub endpoint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    pub aggregators: Vec<AggregatorRef>,
    #[serde(default = "default_limit_factor")]
    pub per_source_limit_factor: u32,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_listen_address")]
    pub listen_address: String,
}

fn default_limit_factor() -> u32 {
    3
}

fn default_timeout_ms() -> u64 {
    2000
}

fn default_listen_address() -> String {
    "127.0.0.1:0".to_string()
}

impl FederationConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn validate(&self) -> Result<(), FederationError> {
        if self.aggregators.is_empty() {
            return Err(FederationError::InvalidConfig(
                "at least one aggregator required".into(),
            ));
        }
        if self.per_source_limit_factor < 1 {
            return Err(FederationError::InvalidConfig(
                "per_source_limit_factor must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// How the root reaches one aggregator.
pub trait AggTransport: Send + Sync {
    fn search(
        &self,
        query: &str,
        limit: usize,
        exhaustive: bool,
    ) -> Result<SearchResponse, TransportError>;
    fn ping(&self) -> bool;
}

/// In-process aggregator binding with a kill switch.
pub struct InProcessAgg {
    agg: Arc<AggregatorNode>,
    alive: Arc<AtomicBool>,
}

impl InProcessAgg {
    pub fn new(agg: Arc<AggregatorNode>) -> Self {
        Self::with_kill_switch(agg, Arc::new(AtomicBool::new(true)))
    }

    pub fn with_kill_switch(agg: Arc<AggregatorNode>, alive: Arc<AtomicBool>) -> Self {
        Self { agg, alive }
    }

    pub fn kill_switch(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.alive)
    }
}

impl AggTransport for InProcessAgg {
    fn search(
        &self,
        query: &str,
        limit: usize,
        exhaustive: bool,
    ) -> Result<SearchResponse, TransportError> {
        if !self.alive.load(Ordering::SeqCst) {
            return Err(TransportError::Unreachable(self.agg.domain().to_string()));
        }
        self.agg
            .search(query, limit, exhaustive)
            .map_err(|e| TransportError::Protocol(e.to_string()))
    }

    fn ping(&self) -> bool {
        self.alive.load(Ordering::SeqCst)
    }
}

/// One URL after cross-source merging.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergedResult {
    pub url: String,
    /// Sum of the per-aggregator overlap scores.
    pub total_score: u64,
    /// Maximum keyword total across sources.
    pub keyword_total: u64,
    pub contributing_sources: Vec<String>,
    pub title: String,
    pub abstract_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FederationError {
    #[error("empty query")]
    EmptyQuery,
    #[error("invalid limit")]
    InvalidLimit,
    #[error("no sources available")]
    NoSources,
    #[error("invalid federation config: {0}")]
    InvalidConfig(String),
}

pub struct RootNode {
    config: FederationConfig,
    transports: Vec<Arc<dyn AggTransport>>,
}

impl RootNode {
    pub fn new(
        config: FederationConfig,
        transports: Vec<Arc<dyn AggTransport>>,
    ) -> Result<RootNode, FederationError> {
        config.validate()?;
        if transports.len() != config.aggregators.len() {
            return Err(FederationError::InvalidConfig(format!(
                "{} transports for {} configured aggregators",
                transports.len(),
                config.aggregators.len()
            )));
        }
        Ok(RootNode { config, transports })
    }

    /// Fan the query out, wait up to the configured timeout, merge what came
    /// back. `exhaustive` asks sources for untruncated lists and skips the
    /// final cut, so the output is comparable to a global oracle.
    pub fn federated_search(
        &self,
        query: &str,
        limit: usize,
        exhaustive: bool,
    ) -> Result<SearchResponse, FederationError> {
        if terms_of(query).is_empty() {
            return Err(FederationError::EmptyQuery);
        }
        if !(1..=MAX_SEARCH_LIMIT).contains(&limit) && !exhaustive {
            return Err(FederationError::InvalidLimit);
        }

        let per_source_limit = limit.saturating_mul(self.config.per_source_limit_factor as usize);
        let (tx, rx) = mpsc::channel();
        for (idx, transport) in self.transports.iter().enumerate() {
            let transport = Arc::clone(transport);
            let tx = tx.clone();
            let query = query.to_string();
            thread::spawn(move || {
                let outcome = transport.search(&query, per_source_limit, exhaustive);
                let _ = tx.send((idx, outcome));
            });
        }
        drop(tx);

        let deadline = Instant::now() + self.config.timeout();
        let mut outcomes: Vec<Option<Result<SearchResponse, TransportError>>> =
            (0..self.transports.len()).map(|_| None).collect();
        let mut received = 0;
        while received < self.transports.len() {
            let now = Instant::now();
            if now >= deadline {
                break;
            }
            match rx.recv_timeout(deadline - now) {
                Ok((idx, outcome)) => {
                    outcomes[idx] = Some(outcome);
                    received += 1;
                }
                Err(_) => break,
            }
        }

        let mut answered: Vec<(&str, Vec<WireResult>)> = Vec::new();
        let mut failed: Vec<String> = Vec::new();
        for (idx, outcome) in outcomes.into_iter().enumerate() {
            let name = self.config.aggregators[idx].name.as_str();
            match outcome {
                Some(Ok(response)) => answered.push((name, response.results)),
                Some(Err(err)) => {
                    tracing::warn!(source = name, %err, "source failed");
                    failed.push(name.to_string());
                }
                None => {
                    tracing::warn!(source = name, "source timed out");
                    failed.push(name.to_string());
                }
            }
        }
        if answered.is_empty() {
            return Err(FederationError::NoSources);
        }
        failed.sort();

        let mut merged = merge_results(&answered);
        if !exhaustive {
            merged.truncate(limit);
        }

        Ok(SearchResponse {
            query: query.to_string(),
            results: merged
                .into_iter()
                .map(|m| WireResult {
                    url: m.url,
                    title: m.title,
                    abstract_text: m.abstract_text,
                    score: m.total_score,
                    keyword_total: Some(m.keyword_total),
                    sources: m.contributing_sources,
                })
                .collect(),
            partial: !failed.is_empty(),
            failed_sources: Some(failed),
        })
    }

    pub fn sources(&self) -> Vec<SourceHealth> {
        self.config
            .aggregators
            .iter()
            .zip(&self.transports)
            .map(|(agg, transport)| SourceHealth {
                name: agg.name.clone(),
                endpoint: agg.endpoint.clone(),
                healthy: transport.ping(),
            })
            .collect()
    }
}

/// Group per-source ranked lists by URL, summing scores. Pure function of
/// its inputs: permuting sources or partitioning them changes nothing.
pub fn merge_results(lists: &[(&str, Vec<WireResult>)]) -> Vec<MergedResult> {
    struct Accum {
        total_score: u64,
        keyword_total: u64,
        sources: Vec<String>,
        title: String,
        abstract_text: String,
        display_score: u64,
        display_source: String,
    }

    let mut groups: BTreeMap<&str, Accum> = BTreeMap::new();
    for (source, results) in lists {
        for result in results {
            let entry = groups.entry(result.url.as_str()).or_insert_with(|| Accum {
                total_score: 0,
                keyword_total: 0,
                sources: Vec::new(),
                title: result.title.clone(),
                abstract_text: result.abstract_text.clone(),
                display_score: result.score,
                display_source: source.to_string(),
            });
            entry.total_score += result.score;
            entry.keyword_total = entry.keyword_total.max(result.keyword_total.unwrap_or(0));
            entry.sources.push(source.to_string());
            // Display fields follow the highest-scoring source; name-asc on
            // ties keeps the choice independent of input order.
            if result.score > entry.display_score
                || (result.score == entry.display_score
                    && *source < entry.display_source.as_str())
            {
                entry.display_score = result.score;
                entry.display_source = source.to_string();
                entry.title = result.title.clone();
                entry.abstract_text = result.abstract_text.clone();
            }
        }
    }

    let mut merged: Vec<MergedResult> = groups
        .into_iter()
        .map(|(url, mut accum)| {
            accum.sources.sort();
            accum.sources.dedup();
            MergedResult {
                url: url.to_string(),
                total_score: accum.total_score,
                keyword_total: accum.keyword_total,
                contributing_sources: accum.sources,
                title: accum.title,
                abstract_text: accum.abstract_text,
            }
        })
        .collect();
    merged.sort_by(|a, b| {
        b.total_score
            .cmp(&a.total_score)
            .then_with(|| b.keyword_total.cmp(&a.keyword_total))
            .then_with(|| a.url.cmp(&b.url))
    });
    merged
}
