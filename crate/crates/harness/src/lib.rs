//! End-to-end topology runner and the brute-force oracles that check it.
//!
//! [`topology`] declares a whole three-layer deployment plus a scripted event
//! sequence as data; [`runner`] boots it (in-process by default, or as real
//! subprocesses talking HTTP) and executes the script, emitting a
//! deterministic transcript. [`oracle`] recomputes overlap counts and global
//! rankings straight from raw page bytes, sharing no code with the crawl,
//! index or merge paths it certifies. [`tiny3`] is the fixed hand-enumerable
//! corpus every expectation here was derived from.

pub mod oracle;
pub mod runner;
pub mod tiny3;
pub mod topology;
pub mod transcript;

pub use oracle::{oracle_global_search, oracle_overlap, oracle_overlap_sites, DirectScanIndex};
pub use runner::{run_topology, Mode};
pub use topology::{CorpusSource, Event, TopologySpec};
pub use transcript::TranscriptReport;
