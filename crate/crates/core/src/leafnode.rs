//! Layer-3 node: a search engine whose scope is one organization-scale
//! domain.
//!
//! Wraps the crawler and indexer behind three operations: search, cursor
//! export, and refresh. Every record carries a leaf-wide unique, monotone
//! version; the export cursor is simply "highest version already seen", so
//! a harvester pages through `version > cursor` and never misses or repeats
//! a record. Refresh builds the next generation aside and swaps it in
//! atomically; only records whose content actually changed get new versions,
//! and vanished records turn into tombstones.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crawler::{crawl_domain, CrawlError, Fetcher};
use crate::indexer::{
    records_from_pages, search_index, terms_of, LeafIndex, MetadataRecord, QueryError, RecordKey,
};
use crate::urlnorm;
use crate::wire::{ExportResponse, RefreshReport, SearchResponse, WireResult};

pub const MAX_SEARCH_LIMIT: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafConfig {
    pub domain: String,
    pub site_roots: Vec<String>,
    #[serde(default = "default_listen_address")]
    pub listen_address: String,
    #[serde(default = "default_export_page_size")]
    pub export_page_size: u32,
}

fn default_listen_address() -> String {
    "127.0.0.1:0".to_string()
}

fn default_export_page_size() -> u32 {
    500
}

impl LeafConfig {
    pub fn validate(&self) -> Result<(), LeafError> {
        if self.export_page_size < 1 {
            return Err(LeafError::InvalidConfig(
                "export_page_size must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LeafError {
    #[error("invalid leaf config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Crawl(#[from] CrawlError),
}

struct LeafState {
    config: LeafConfig,
    generation: u64,
    version_counter: u64,
    index: LeafIndex,
}

/// The leaf service. Search and export read the current generation
/// concurrently; refreshes serialize among themselves and swap the new
/// generation in atomically.
pub struct LeafNode {
    fetcher: Arc<dyn Fetcher>,
    state: RwLock<LeafState>,
    refresh_lock: Mutex<()>,
}

impl LeafNode {
    pub fn new(config: LeafConfig, fetcher: Arc<dyn Fetcher>) -> Result<LeafNode, LeafError> {
        config.validate()?;
        Ok(LeafNode {
            fetcher,
            state: RwLock::new(LeafState {
                config,
                generation: 0,
                version_counter: 0,
                index: LeafIndex::default(),
            }),
            refresh_lock: Mutex::new(()),
        })
    }

    pub fn domain(&self) -> String {
        self.state.read().unwrap().config.domain.clone()
    }

    pub fn generation(&self) -> u64 {
        self.state.read().unwrap().generation
    }

    pub fn export_page_size(&self) -> u32 {
        self.state.read().unwrap().config.export_page_size
    }

    /// Change the crawl scope for subsequent refreshes. Sites no longer
    /// listed will have their records tombstoned on the next refresh.
    pub fn set_site_roots(&self, roots: Vec<String>) {
        self.state.write().unwrap().config.site_roots = roots;
    }

    /// Search the current generation, deduplicating replicas of the same URL
    /// down to one result with the maximum score.
    pub fn handle_search(&self, query: &str, limit: usize) -> Result<SearchResponse, QueryError> {
        if !(1..=MAX_SEARCH_LIMIT).contains(&limit) {
            return Err(QueryError::InvalidLimit);
        }
        let terms = terms_of(query);
        if terms.is_empty() {
            return Err(QueryError::EmptyQuery);
        }

        let state = self.state.read().unwrap();
        let hits = search_index(&state.index, &terms, usize::MAX)?;

        // Group per URL: max score wins, the home-site replica is preferred
        // for display on ties, and all replica origins are reported.
        let mut grouped: BTreeMap<&str, GroupedHit<'_>> = BTreeMap::new();
        for hit in &hits {
            let is_home = urlnorm::host_of(&hit.url).as_deref() == Some(hit.origin_site.as_str());
            let entry = grouped.entry(hit.url.as_str()).or_insert_with(|| GroupedHit {
                best: hit,
                best_is_home: is_home,
                sources: Vec::new(),
            });
            entry.sources.push(hit.origin_site.clone());
            let better = hit.score > entry.best.score
                || (hit.score == entry.best.score && is_home && !entry.best_is_home);
            if better {
                entry.best = hit;
                entry.best_is_home = is_home;
            }
        }

        let mut results: Vec<WireResult> = grouped
            .into_values()
            .map(|g| {
                let mut sources = g.sources;
                sources.sort();
                WireResult {
                    url: g.best.url.clone(),
                    title: g.best.title.clone(),
                    abstract_text: g.best.abstract_text.clone(),
                    score: g.best.score,
                    keyword_total: None,
                    sources,
                }
            })
            .collect();
        results.sort_by(|a, b| b.score.cmp(&a.score).then_with(|| a.url.cmp(&b.url)));
        results.truncate(limit);

        Ok(SearchResponse {
            query: query.to_string(),
            results,
            partial: false,
            failed_sources: None,
        })
    }

    /// Page of records with `version > cursor`, version-ascending,
    /// tombstones included. `max = 0` means the configured page size.
    pub fn handle_export(&self, cursor: u64, max: u32) -> ExportResponse {
        let state = self.state.read().unwrap();
        let max = if max == 0 {
            state.config.export_page_size as usize
        } else {
            max as usize
        };

        let mut records: Vec<MetadataRecord> = state
            .index
            .records
            .values()
            .filter(|r| r.version > cursor)
            .cloned()
            .collect();
        records.sort_by_key(|r| r.version);
        let remaining = records.len().saturating_sub(max);
        records.truncate(max);

        let next_cursor = records.last().map_or(cursor, |r| r.version);
        ExportResponse {
            records,
            next_cursor,
            done: remaining == 0,
        }
    }

    /// Re-crawl the configured scope and swap in the next generation.
    /// Unchanged records keep their versions; changed or new ones are
    /// re-versioned; vanished ones become tombstones. A site whose root is
    /// unreachable is skipped with its previous records retained.
    pub fn refresh(&self) -> Result<RefreshReport, LeafError> {
        let _guard = self.refresh_lock.lock().unwrap();

        let (config, old_records, mut version_counter) = {
            let state = self.state.read().unwrap();
            (
                state.config.clone(),
                state.index.records.clone(),
                state.version_counter,
            )
        };

        let crawl = crawl_domain(self.fetcher.as_ref(), &config.domain, &config.site_roots)?;
        let skipped: Vec<&str> = crawl.skipped_sites.iter().map(String::as_str).collect();

        let mut changed = 0;
        let mut tombstones = 0;
        let mut next: BTreeMap<RecordKey, MetadataRecord> = BTreeMap::new();

        for (key, mut content) in records_from_pages(&crawl.pages) {
            match old_records.get(&key) {
                Some(prev) if content.same_content(prev) => {
                    content.version = prev.version;
                }
                _ => {
                    version_counter += 1;
                    content.version = version_counter;
                    changed += 1;
                }
            }
            next.insert(key, content);
        }

        for (key, prev) in &old_records {
            if next.contains_key(key) {
                continue;
            }
            if skipped.contains(&key.1.as_str()) || prev.deleted {
                next.insert(key.clone(), prev.clone());
                continue;
            }
            version_counter += 1;
            next.insert(
                key.clone(),
                MetadataRecord::tombstone(key.0.clone(), key.1.clone(), version_counter),
            );
            tombstones += 1;
        }

        let index = LeafIndex::from_records(next);
        let mut state = self.state.write().unwrap();
        state.generation += 1;
        state.version_counter = version_counter;
        state.index = index;
        Ok(RefreshReport {
            generation: state.generation,
            changed,
            tombstones,
        })
    }
}

struct GroupedHit<'a> {
    best: &'a crate::indexer::SearchHit,
    best_is_home: bool,
    sources: Vec<String>,
}
