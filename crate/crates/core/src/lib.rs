//! Core of a three-layer hierarchical search system.
//!
//! The bottom layer crawls and indexes the sites of one organization-scale
//! domain ([`leafnode`]), the middle layer harvests metadata records from many
//! leaves and ranks pages by how many distinct sites produced a copy of them
//! ([`aggregator`]), and the top layer fans queries out to aggregators and
//! sums their scores ([`rootnode`]). [`webcorpus`] provides the deterministic
//! synthetic web the whole stack runs against.

pub mod aggregator;
pub mod crawler;
pub mod indexer;
pub mod leafnode;
pub mod rootnode;
pub mod urlnorm;
pub mod webcorpus;
pub mod wire;

pub use crawler::{classify_link, crawl_domain, crawl_site, CrawlResult, FetchedPage, Fetcher};
pub use indexer::{build_index, score_keywords, search_index, tokenize, LeafIndex, MetadataRecord};
pub use leafnode::{LeafConfig, LeafNode};
pub use rootnode::{merge_results, FederationConfig, RootNode};
pub use webcorpus::{generate_corpus, Corpus, CorpusSpec, DomainSpec};
