//! Layer-2 node: harvests metadata records from many leaves and ranks pages
//! by their overlap count.
//!
//! A page fetched by several sites' crawls shows up once per origin site.
//! Grouping replicas by URL and counting distinct live origins gives the
//! overlap count — the number of sites that could reach the page, which is
//! this layer's ranking score. Harvesting is incremental: each leaf is paged
//! through `/v1/export` from the last cursor, and the cursor only advances
//! after a page has been fully applied.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex, RwLock};
use std::time::SystemTime;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indexer::{terms_of, MetadataRecord, QueryError, RecordKey};
use crate::leafnode::MAX_SEARCH_LIMIT;
use crate::urlnorm;
use crate::wire::{ExportResponse, HarvestReport, SearchResponse, WireResult};

/// How a harvester reaches one leaf. In-process for the test harness, HTTP
/// in deployment; the aggregator cannot tell the difference.
pub trait LeafTransport: Send + Sync {
    fn endpoint(&self) -> &str;
    fn export(&self, cursor: u64, max: u32) -> Result<ExportResponse, TransportError>;
    fn ping(&self) -> bool;
}

#[derive(Debug, Clone, Error)]
pub enum TransportError {
    #[error("unreachable: {0}")]
    Unreachable(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// In-process binding with a kill switch, so failure scenarios need no
/// network.
pub struct InProcessLeaf {
    leaf: Arc<crate::leafnode::LeafNode>,
    endpoint: String,
    alive: Arc<std::sync::atomic::AtomicBool>,
}

impl InProcessLeaf {
    pub fn new(endpoint: impl Into<String>, leaf: Arc<crate::leafnode::LeafNode>) -> Self {
        Self::with_kill_switch(
            endpoint,
            leaf,
            Arc::new(std::sync::atomic::AtomicBool::new(true)),
        )
    }

    /// Share `alive` across several transports to model one node dying for
    /// every consumer at once.
    pub fn with_kill_switch(
        endpoint: impl Into<String>,
        leaf: Arc<crate::leafnode::LeafNode>,
        alive: Arc<std::sync::atomic::AtomicBool>,
    ) -> Self {
        Self {
            leaf,
            endpoint: endpoint.into(),
            alive,
        }
    }

    pub fn kill_switch(&self) -> Arc<std::sync::atomic::AtomicBool> {
        Arc::clone(&self.alive)
    }
}

impl LeafTransport for InProcessLeaf {
    fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn export(&self, cursor: u64, max: u32) -> Result<ExportResponse, TransportError> {
        if !self.alive.load(std::sync::atomic::Ordering::SeqCst) {
            return Err(TransportError::Unreachable(self.endpoint.clone()));
        }
        Ok(self.leaf.handle_export(cursor, max))
    }

    fn ping(&self) -> bool {
        self.alive.load(std::sync::atomic::Ordering::SeqCst)
    }
}

/// Merge of all live replicas of one URL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnifiedRecord {
    pub url: String,
    pub title: String,
    pub encoding: String,
    pub abstract_text: String,
    pub origins: BTreeSet<String>,
    pub overlap_count: u64,
    /// Per-term maximum across replicas. Replicas are copies of one
    /// document, so summing would double-count; popularity is already
    /// captured by the overlap count.
    pub merged_keywords: BTreeMap<String, u32>,
}

/// Per-leaf harvest bookkeeping.
#[derive(Debug, Clone)]
pub struct PeerState {
    pub endpoint: String,
    pub last_cursor: u64,
    pub last_success_time: Option<SystemTime>,
    pub error_count: u64,
}

#[derive(Debug, Default)]
pub struct HarvestState {
    pub peers: Vec<PeerState>,
    pub records: BTreeMap<RecordKey, MetadataRecord>,
    pub unified: BTreeMap<String, UnifiedRecord>,
}

/// One ranked aggregator answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggHit {
    pub url: String,
    pub overlap_count: u64,
    pub keyword_total: u64,
    pub title: String,
    pub abstract_text: String,
    pub origins: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatorConfig {
    pub domain: String,
    pub leaves: Vec<String>,
    #[serde(default = "default_listen_address")]
    pub listen_address: String,
    #[serde(default = "default_harvest_page_size")]
    pub harvest_page_size: u32,
}

fn default_listen_address() -> String {
    "127.0.0.1:0".to_string()
}

fn default_harvest_page_size() -> u32 {
    500
}

pub struct AggregatorNode {
    domain: String,
    transports: Vec<Arc<dyn LeafTransport>>,
    harvest_page_size: u32,
    state: RwLock<HarvestState>,
    harvest_lock: Mutex<()>,
}

impl AggregatorNode {
    pub fn new(domain: impl Into<String>, transports: Vec<Arc<dyn LeafTransport>>) -> Self {
        Self::with_page_size(domain, transports, default_harvest_page_size())
    }

    pub fn with_page_size(
        domain: impl Into<String>,
        transports: Vec<Arc<dyn LeafTransport>>,
        harvest_page_size: u32,
    ) -> Self {
        let peers = transports
            .iter()
            .map(|t| PeerState {
                endpoint: t.endpoint().to_string(),
                last_cursor: 0,
                last_success_time: None,
                error_count: 0,
            })
            .collect();
        AggregatorNode {
            domain: domain.into(),
            transports,
            harvest_page_size: harvest_page_size.max(1),
            state: RwLock::new(HarvestState {
                peers,
                records: BTreeMap::new(),
                unified: BTreeMap::new(),
            }),
            harvest_lock: Mutex::new(()),
        }
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    /// One harvest round over every configured leaf. An unreachable leaf is
    /// skipped for the round without disturbing the others.
    pub fn harvest(&self) -> HarvestReport {
        let _guard = self.harvest_lock.lock().unwrap();
        let mut applied = 0u64;
        let mut failed = Vec::new();

        for (idx, transport) in self.transports.iter().enumerate() {
            let mut cursor = self.state.read().unwrap().peers[idx].last_cursor;
            loop {
                match transport.export(cursor, self.harvest_page_size) {
                    Ok(page) => {
                        let stalled = page.records.is_empty() && page.next_cursor <= cursor;
                        let done = page.done;
                        let next_cursor = page.next_cursor.max(cursor);

                        let mut state = self.state.write().unwrap();
                        for record in page.records {
                            apply_record(&mut state, record);
                            applied += 1;
                        }
                        let peer = &mut state.peers[idx];
                        peer.last_cursor = next_cursor;
                        peer.last_success_time = Some(SystemTime::now());
                        cursor = next_cursor;

                        if done || stalled {
                            break;
                        }
                    }
                    Err(err) => {
                        tracing::warn!(leaf = transport.endpoint(), %err, "harvest failed");
                        let mut state = self.state.write().unwrap();
                        state.peers[idx].error_count += 1;
                        failed.push(transport.endpoint().to_string());
                        break;
                    }
                }
            }
        }

        HarvestReport {
            leaves: self.transports.len() as u64,
            applied,
            failed,
        }
    }

    /// Conjunctive search over unified records, ranked by
    /// (overlap desc, keyword total desc, url asc).
    pub fn search(
        &self,
        query: &str,
        limit: usize,
        exhaustive: bool,
    ) -> Result<SearchResponse, QueryError> {
        if !(1..=MAX_SEARCH_LIMIT).contains(&limit) && !exhaustive {
            return Err(QueryError::InvalidLimit);
        }
        let terms: BTreeSet<String> = terms_of(query).into_iter().collect();
        if terms.is_empty() {
            return Err(QueryError::EmptyQuery);
        }

        let state = self.state.read().unwrap();
        let mut hits: Vec<AggHit> = Vec::new();
        'unified: for record in state.unified.values() {
            let mut keyword_total = 0u64;
            for term in &terms {
                match record.merged_keywords.get(term) {
                    Some(score) => keyword_total += u64::from(*score),
                    None => continue 'unified,
                }
            }
            hits.push(AggHit {
                url: record.url.clone(),
                overlap_count: record.overlap_count,
                keyword_total,
                title: record.title.clone(),
                abstract_text: record.abstract_text.clone(),
                origins: record.origins.iter().cloned().collect(),
            });
        }
        hits.sort_by(|a, b| {
            b.overlap_count
                .cmp(&a.overlap_count)
                .then_with(|| b.keyword_total.cmp(&a.keyword_total))
                .then_with(|| a.url.cmp(&b.url))
        });
        if !exhaustive {
            hits.truncate(limit);
        }

        Ok(SearchResponse {
            query: query.to_string(),
            results: hits
                .into_iter()
                .map(|h| WireResult {
                    url: h.url,
                    title: h.title,
                    abstract_text: h.abstract_text,
                    score: h.overlap_count,
                    keyword_total: Some(h.keyword_total),
                    sources: h.origins,
                })
                .collect(),
            partial: false,
            failed_sources: None,
        })
    }

    /// Snapshot of url → overlap count, for oracle comparison.
    pub fn overlap_counts(&self) -> BTreeMap<String, u64> {
        self.state
            .read()
            .unwrap()
            .unified
            .iter()
            .map(|(url, record)| (url.clone(), record.overlap_count))
            .collect()
    }

    pub fn peer_cursors(&self) -> Vec<u64> {
        self.state
            .read()
            .unwrap()
            .peers
            .iter()
            .map(|p| p.last_cursor)
            .collect()
    }

    pub fn unified_snapshot(&self) -> BTreeMap<String, UnifiedRecord> {
        self.state.read().unwrap().unified.clone()
    }

    pub fn records_snapshot(&self) -> BTreeMap<RecordKey, MetadataRecord> {
        self.state.read().unwrap().records.clone()
    }

    pub fn ping_leaves(&self) -> Vec<(String, bool)> {
        self.transports
            .iter()
            .map(|t| (t.endpoint().to_string(), t.ping()))
            .collect()
    }
}

fn apply_record(state: &mut HarvestState, record: MetadataRecord) {
    let url = record.url.clone();
    state.records.insert(record.key(), record);
    let unified = unify_url_group(&state.records, &url);
    match unified {
        Some(u) => {
            state.unified.insert(url, u);
        }
        None => {
            state.unified.remove(&url);
        }
    }
}

/// Group the live replicas of one URL. Display fields come from the
/// home-site replica when present, else from the replica with the highest
/// keyword total (ties: origin asc).
fn unify_url_group(
    records: &BTreeMap<RecordKey, MetadataRecord>,
    url: &str,
) -> Option<UnifiedRecord> {
    let live: Vec<&MetadataRecord> = records
        .range((url.to_string(), String::new())..(format!("{url}\u{0}"), String::new()))
        .map(|(_, r)| r)
        .filter(|r| !r.deleted)
        .collect();
    if live.is_empty() {
        return None;
    }

    let home = urlnorm::host_of(url);
    let display = live
        .iter()
        .find(|r| Some(r.origin_site.as_str()) == home.as_deref())
        .copied()
        .unwrap_or_else(|| {
            live.iter()
                .copied()
                .max_by(|a, b| {
                    keyword_sum(a)
                        .cmp(&keyword_sum(b))
                        .then_with(|| b.origin_site.cmp(&a.origin_site))
                })
                .expect("live is non-empty")
        });

    let mut merged_keywords: BTreeMap<String, u32> = BTreeMap::new();
    let mut origins = BTreeSet::new();
    for replica in &live {
        origins.insert(replica.origin_site.clone());
        for (term, score) in &replica.keywords {
            let entry = merged_keywords.entry(term.clone()).or_insert(0);
            *entry = (*entry).max(*score);
        }
    }

    Some(UnifiedRecord {
        url: url.to_string(),
        title: display.title.clone(),
        encoding: display.encoding.clone(),
        abstract_text: display.abstract_text.clone(),
        overlap_count: origins.len() as u64,
        origins,
        merged_keywords,
    })
}

fn keyword_sum(record: &MetadataRecord) -> u64 {
    record.keywords.iter().map(|(_, s)| u64::from(*s)).sum()
}

/// From-scratch grouping of a record set; incremental maintenance must agree
/// with this at all times.
pub fn rebuild_unified(
    records: &BTreeMap<RecordKey, MetadataRecord>,
) -> BTreeMap<String, UnifiedRecord> {
    let urls: BTreeSet<&str> = records.keys().map(|(url, _)| url.as_str()).collect();
    urls.into_iter()
        .filter_map(|url| unify_url_group(records, url).map(|u| (url.to_string(), u)))
        .collect()
}
