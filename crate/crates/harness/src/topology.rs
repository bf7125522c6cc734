//! Declarative description of a whole deployment plus its scripted events.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use hiersearch_core::webcorpus::{Corpus, CorpusSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub corpus: CorpusSource,
    pub leaves: Vec<TopologyLeaf>,
    pub aggregators: Vec<TopologyAggregator>,
    #[serde(default)]
    pub root: RootSettings,
    #[serde(default)]
    pub events: Vec<ScriptedEvent>,
}

/// Where the corpus comes from: generated on the spot, loaded from a
/// persisted directory, or the built-in reference scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    Generate(CorpusSpec),
    Load(PathBuf),
    Tiny3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyLeaf {
    pub name: String,
    pub domain: String,
    pub site_roots: Vec<String>,
    #[serde(default = "default_export_page_size")]
    pub export_page_size: u32,
}

fn default_export_page_size() -> u32 {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyAggregator {
    pub name: String,
    pub domain: String,
    /// Names of the leaves this aggregator harvests.
    pub leaves: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSettings {
    #[serde(default = "default_limit_factor")]
    pub per_source_limit_factor: u32,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_limit_factor() -> u32 {
    3
}

fn default_timeout_ms() -> u64 {
    2000
}

impl Default for RootSettings {
    fn default() -> Self {
        RootSettings {
            per_source_limit_factor: default_limit_factor(),
            timeout_ms: default_timeout_ms(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedEvent {
    pub step: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    /// Replace the `<p>` body of a corpus page.
    MutatePage { url: String, body: String },
    /// Remove a corpus page entirely.
    DeletePage { url: String },
    /// Make a leaf or aggregator unreachable.
    KillNode { node: String },
    ReviveNode { node: String },
    /// Run a harvest round on one aggregator, or all of them.
    Harvest {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        aggregator: Option<String>,
    },
    /// Re-crawl one leaf, or all of them.
    Refresh {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        leaf: Option<String>,
    },
    /// Federated query against the root, with optional expectations.
    Query {
        q: String,
        #[serde(default = "default_query_limit")]
        limit: usize,
        #[serde(default)]
        exhaustive: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<Expectation>,
    },
    /// Check every aggregator's overlap counts against the link-graph
    /// oracle.
    AssertOverlap,
    /// Check an exhaustive root query against the direct-scan oracle.
    AssertSearchMatchesOracle { q: String },
}

fn default_query_limit() -> usize {
    10
}

/// Declarative assertions attached to a query event.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial: Option<bool>,
    /// Exact result order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub urls: Option<Vec<String>>,
    /// Scores for a subset of URLs (all of which must be present).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<BTreeMap<String, u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_sources: Option<Vec<String>>,
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("invalid topology: {0}")]
    Invalid(String),
}

impl TopologySpec {
    /// Structural checks against the materialized corpus: names are unique,
    /// aggregator leaf references and event node references resolve, and
    /// every leaf root is a known site of the right domain.
    pub fn validate(&self, corpus: &Corpus) -> Result<(), TopologyError> {
        let bad = |msg: String| Err(TopologyError::Invalid(msg));

        let mut names = std::collections::BTreeSet::new();
        for leaf in &self.leaves {
            if !names.insert(leaf.name.as_str()) {
                return bad(format!("duplicate node name {}", leaf.name));
            }
            for root in &leaf.site_roots {
                let host = url::Url::parse(root)
                    .ok()
                    .and_then(|u| u.host_str().map(str::to_string))
                    .ok_or_else(|| TopologyError::Invalid(format!("bad site root {root}")))?;
                if corpus.site(&host).is_none() {
                    return bad(format!("leaf {}: {host} is not a corpus site", leaf.name));
                }
                if host != leaf.domain && !host.ends_with(&format!(".{}", leaf.domain)) {
                    return bad(format!(
                        "leaf {}: site {host} outside domain {}",
                        leaf.name, leaf.domain
                    ));
                }
            }
        }
        if self.aggregators.is_empty() {
            return bad("at least one aggregator required".into());
        }
        for agg in &self.aggregators {
            if !names.insert(agg.name.as_str()) {
                return bad(format!("duplicate node name {}", agg.name));
            }
            for leaf in &agg.leaves {
                if !self.leaves.iter().any(|l| &l.name == leaf) {
                    return bad(format!("aggregator {}: unknown leaf {leaf}", agg.name));
                }
            }
        }
        for scripted in &self.events {
            match &scripted.event {
                Event::KillNode { node } | Event::ReviveNode { node } => {
                    if !names.contains(node.as_str()) {
                        return bad(format!("event references unknown node {node}"));
                    }
                }
                Event::Refresh { leaf: Some(leaf) }
                    if !self.leaves.iter().any(|l| &l.name == leaf) =>
                {
                    return bad(format!("refresh references unknown leaf {leaf}"));
                }
                Event::Harvest {
                    aggregator: Some(agg),
                } if !self.aggregators.iter().any(|a| &a.name == agg) => {
                    return bad(format!("harvest references unknown aggregator {agg}"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Site names one aggregator's leaves crawl, resolved from leaf roots.
    pub fn aggregator_sites(&self, agg: &TopologyAggregator) -> Vec<String> {
        let mut sites = Vec::new();
        for leaf_name in &agg.leaves {
            if let Some(leaf) = self.leaves.iter().find(|l| &l.name == leaf_name) {
                for root in &leaf.site_roots {
                    if let Some(host) = url::Url::parse(root)
                        .ok()
                        .and_then(|u| u.host_str().map(str::to_string))
                    {
                        if !sites.contains(&host) {
                            sites.push(host);
                        }
                    }
                }
            }
        }
        sites
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiny3;

    #[test]
    fn tiny3_topology_validates() {
        let spec = tiny3::topology();
        spec.validate(&tiny3::corpus()).unwrap();
    }

    #[test]
    fn unknown_leaf_reference_is_rejected() {
        let mut spec = tiny3::topology();
        spec.aggregators[0].leaves.push("ghost".into());
        assert!(spec.validate(&tiny3::corpus()).is_err());
    }

    #[test]
    fn events_round_trip_through_json() {
        let spec = tiny3::topology();
        let json = serde_json::to_string_pretty(&spec).unwrap();
        let back: TopologySpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn event_json_shape_is_flat() {
        let event = ScriptedEvent {
            step: 3,
            event: Event::Refresh {
                leaf: Some("hust".into()),
            },
        };
        assert_eq!(
            serde_json::to_string(&event).unwrap(),
            r#"{"step":3,"type":"refresh","leaf":"hust"}"#
        );
    }
}
