//! Boot a declared topology and execute its scripted events.
//!
//! Two hosting modes share one event loop: `InProcess` wires nodes together
//! with direct calls and per-node kill switches (fast, fully deterministic),
//! `Sockets` spawns one subprocess per node talking real HTTP, with the
//! corpus persisted to disk and served to leaves from there. Transcripts
//! carry no wall-clock data, so a given spec reproduces its transcript
//! byte for byte.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use thiserror::Error;

use hiersearch_core::aggregator::{AggregatorConfig, AggregatorNode, InProcessLeaf, LeafTransport};
use hiersearch_core::crawler::CorpusFetcher;
use hiersearch_core::leafnode::{LeafConfig, LeafNode};
use hiersearch_core::rootnode::{
    AggTransport, AggregatorRef, FederationConfig, FederationError, InProcessAgg, RootNode,
};
use hiersearch_core::webcorpus::{generate_corpus, page_rel_path, Corpus, CorpusError};
use hiersearch_core::wire::{HarvestReport, RefreshReport, SearchResponse};
use hiersearch_net::client::{HttpAggClient, HttpLeafClient, HttpRootClient};

use crate::oracle::{oracle_overlap_sites, DirectScanIndex};
use crate::topology::{CorpusSource, Event, Expectation, TopologyError, TopologySpec};
use crate::transcript::{CheckRecord, StepRecord, TranscriptReport};

pub enum Mode {
    InProcess,
    /// Spawn one `hiersearch` subprocess per node and drive it over HTTP.
    Sockets { binary: PathBuf },
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("boot failure at node {node}: {reason}")]
    Boot { node: String, reason: String },
    #[error("harness io: {0}")]
    Io(#[from] std::io::Error),
    #[error("harness json: {0}")]
    Json(#[from] serde_json::Error),
}

pub fn materialize_corpus(source: &CorpusSource) -> Result<Corpus, CorpusError> {
    match source {
        CorpusSource::Generate(spec) => generate_corpus(spec),
        CorpusSource::Load(path) => Corpus::load(path),
        CorpusSource::Tiny3 => Ok(crate::tiny3::corpus()),
    }
}

pub fn run_topology(spec: &TopologySpec, mode: Mode) -> Result<TranscriptReport, HarnessError> {
    let corpus = materialize_corpus(&spec.corpus)?;
    spec.validate(&corpus)?;
    match mode {
        Mode::InProcess => {
            let mut cluster = InProcessCluster::boot(spec, corpus)?;
            Ok(execute(spec, &mut cluster))
        }
        Mode::Sockets { binary } => {
            let mut cluster = SocketCluster::boot(spec, corpus, &binary)?;
            Ok(execute(spec, &mut cluster))
        }
    }
}

/// What the event loop needs from a running deployment, regardless of how
/// the nodes are hosted.
trait Cluster {
    fn refresh(&mut self, leaf: &str) -> Result<RefreshReport, String>;
    fn harvest(&mut self, agg: &str) -> Result<HarvestReport, String>;
    fn query(&mut self, q: &str, limit: usize, exhaustive: bool)
        -> Result<SearchResponse, String>;
    fn kill(&mut self, node: &str) -> Result<(), String>;
    fn revive(&mut self, node: &str) -> Result<(), String>;
    fn mutate_page(&mut self, url: &str, body: &str) -> Result<(), String>;
    fn delete_page(&mut self, url: &str) -> Result<(), String>;
    fn overlap_counts(&mut self, agg: &str) -> Result<BTreeMap<String, u64>, String>;
    fn corpus(&self) -> Arc<RwLock<Corpus>>;
}

// ---- event loop ------------------------------------------------------------

fn execute(spec: &TopologySpec, cluster: &mut dyn Cluster) -> TranscriptReport {
    let mut ordered: Vec<&crate::topology::ScriptedEvent> = spec.events.iter().collect();
    ordered.sort_by_key(|e| e.step);

    let mut steps = Vec::new();
    let mut checks = Vec::new();
    for scripted in ordered {
        let outcome = run_event(spec, cluster, scripted.step, &scripted.event, &mut checks);
        steps.push(StepRecord {
            step: scripted.step,
            event: scripted.event.clone(),
            outcome,
        });
    }
    let passed = checks.iter().all(|c| c.pass);
    TranscriptReport {
        steps,
        checks,
        passed,
    }
}

fn run_event(
    spec: &TopologySpec,
    cluster: &mut dyn Cluster,
    step: u64,
    event: &Event,
    checks: &mut Vec<CheckRecord>,
) -> serde_json::Value {
    match event {
        Event::Refresh { leaf } => {
            let targets: Vec<&str> = match leaf {
                Some(name) => vec![name.as_str()],
                None => spec.leaves.iter().map(|l| l.name.as_str()).collect(),
            };
            let rows: Vec<serde_json::Value> = targets
                .into_iter()
                .map(|name| match cluster.refresh(name) {
                    Ok(report) => serde_json::json!({"leaf": name, "report": report}),
                    Err(err) => serde_json::json!({"leaf": name, "error": err}),
                })
                .collect();
            serde_json::Value::Array(rows)
        }
        Event::Harvest { aggregator } => {
            let targets: Vec<&str> = match aggregator {
                Some(name) => vec![name.as_str()],
                None => spec.aggregators.iter().map(|a| a.name.as_str()).collect(),
            };
            let rows: Vec<serde_json::Value> = targets
                .into_iter()
                .map(|name| match cluster.harvest(name) {
                    Ok(report) => serde_json::json!({"aggregator": name, "report": report}),
                    Err(err) => serde_json::json!({"aggregator": name, "error": err}),
                })
                .collect();
            serde_json::Value::Array(rows)
        }
        Event::Query {
            q,
            limit,
            exhaustive,
            expect,
        } => {
            let outcome = cluster.query(q, *limit, *exhaustive);
            if let Some(expect) = expect {
                check_expectation(step, expect, &outcome, checks);
            }
            match outcome {
                Ok(response) => serde_json::to_value(response).expect("response serializes"),
                Err(err) => serde_json::json!({"error": err}),
            }
        }
        Event::KillNode { node } => match cluster.kill(node) {
            Ok(()) => serde_json::json!({"killed": node}),
            Err(err) => serde_json::json!({"error": err}),
        },
        Event::ReviveNode { node } => match cluster.revive(node) {
            Ok(()) => serde_json::json!({"revived": node}),
            Err(err) => serde_json::json!({"error": err}),
        },
        Event::MutatePage { url, body } => match cluster.mutate_page(url, body) {
            Ok(()) => serde_json::json!({"mutated": url}),
            Err(err) => serde_json::json!({"error": err}),
        },
        Event::DeletePage { url } => match cluster.delete_page(url) {
            Ok(()) => serde_json::json!({"deleted": url}),
            Err(err) => serde_json::json!({"error": err}),
        },
        Event::AssertOverlap => {
            let corpus = cluster.corpus();
            let mut rows = Vec::new();
            for agg in &spec.aggregators {
                let sites: BTreeSet<String> =
                    spec.aggregator_sites(agg).into_iter().collect();
                let expected = oracle_overlap_sites(&corpus.read().unwrap(), &sites);
                let (pass, detail) = match cluster.overlap_counts(&agg.name) {
                    Ok(actual) if actual == expected => {
                        (true, format!("{} urls", expected.len()))
                    }
                    Ok(actual) => (false, diff_counts(&expected, &actual)),
                    Err(err) => (false, err),
                };
                checks.push(CheckRecord {
                    step,
                    name: format!("overlap[{}]", agg.name),
                    pass,
                    detail,
                });
                rows.push(serde_json::json!({"aggregator": agg.name}));
            }
            serde_json::Value::Array(rows)
        }
        Event::AssertSearchMatchesOracle { q } => {
            let corpus = cluster.corpus();
            let sites: BTreeSet<String> = spec
                .aggregators
                .iter()
                .flat_map(|a| spec.aggregator_sites(a))
                .collect();
            let expected = {
                let corpus = corpus.read().unwrap();
                DirectScanIndex::build(&corpus, &sites).search(q)
            };
            let (pass, detail) = match cluster.query(q, 1000, true) {
                Ok(response) => compare_to_oracle(&expected, &response),
                Err(err) => (false, err),
            };
            checks.push(CheckRecord {
                step,
                name: format!("oracle_search[{q}]"),
                pass,
                detail,
            });
            serde_json::json!({"query": q, "oracle_hits": expected.len()})
        }
    }
}

fn diff_counts(expected: &BTreeMap<String, u64>, actual: &BTreeMap<String, u64>) -> String {
    let mut diffs = Vec::new();
    for (url, count) in expected {
        match actual.get(url) {
            Some(a) if a == count => {}
            Some(a) => diffs.push(format!("{url}: expected {count}, got {a}")),
            None => diffs.push(format!("{url}: expected {count}, missing")),
        }
    }
    for url in actual.keys() {
        if !expected.contains_key(url) {
            diffs.push(format!("{url}: unexpected"));
        }
    }
    diffs.truncate(5);
    diffs.join("; ")
}

fn compare_to_oracle(
    expected: &[crate::oracle::OracleHit],
    response: &SearchResponse,
) -> (bool, String) {
    if response.partial {
        return (false, "response is partial".into());
    }
    if expected.len() != response.results.len() {
        return (
            false,
            format!(
                "oracle has {} hits, response has {}",
                expected.len(),
                response.results.len()
            ),
        );
    }
    for (oracle, result) in expected.iter().zip(&response.results) {
        if oracle.url != result.url
            || oracle.total_score != result.score
            || Some(oracle.keyword_total) != result.keyword_total
        {
            return (
                false,
                format!(
                    "mismatch at {}: oracle ({}, {}, {}), got ({}, {}, {:?})",
                    oracle.url,
                    oracle.url,
                    oracle.total_score,
                    oracle.keyword_total,
                    result.url,
                    result.score,
                    result.keyword_total
                ),
            );
        }
    }
    (true, format!("{} hits equal", expected.len()))
}

fn check_expectation(
    step: u64,
    expect: &Expectation,
    outcome: &Result<SearchResponse, String>,
    checks: &mut Vec<CheckRecord>,
) {
    let mut push = |name: &str, pass: bool, detail: String| {
        checks.push(CheckRecord {
            step,
            name: name.to_string(),
            pass,
            detail,
        });
    };
    let response = match outcome {
        Ok(response) => response,
        Err(err) => {
            push("expect", false, format!("query failed: {err}"));
            return;
        }
    };
    if let Some(partial) = expect.partial {
        push(
            "expect_partial",
            response.partial == partial,
            format!("expected {partial}, got {}", response.partial),
        );
    }
    if let Some(urls) = &expect.urls {
        let got: Vec<&str> = response.results.iter().map(|r| r.url.as_str()).collect();
        let want: Vec<&str> = urls.iter().map(String::as_str).collect();
        push(
            "expect_urls",
            got == want,
            format!("expected {want:?}, got {got:?}"),
        );
    }
    if let Some(scores) = &expect.scores {
        let mut bad = Vec::new();
        for (url, score) in scores {
            match response.results.iter().find(|r| &r.url == url) {
                Some(result) if result.score == *score => {}
                Some(result) => bad.push(format!("{url}: expected {score}, got {}", result.score)),
                None => bad.push(format!("{url}: missing")),
            }
        }
        push("expect_scores", bad.is_empty(), bad.join("; "));
    }
    if let Some(failed) = &expect.failed_sources {
        let got = response.failed_sources.clone().unwrap_or_default();
        push(
            "expect_failed_sources",
            &got == failed,
            format!("expected {failed:?}, got {got:?}"),
        );
    }
}

// ---- in-process hosting ----------------------------------------------------

struct InProcessCluster {
    corpus: Arc<RwLock<Corpus>>,
    leaves: Vec<(String, Arc<LeafNode>)>,
    aggs: Vec<(String, Arc<AggregatorNode>)>,
    switches: BTreeMap<String, Arc<AtomicBool>>,
    root: RootNode,
}

impl InProcessCluster {
    fn boot(spec: &TopologySpec, corpus: Corpus) -> Result<Self, HarnessError> {
        let fetcher = CorpusFetcher::new(corpus);
        let shared = fetcher.shared();

        let mut leaves = Vec::new();
        let mut switches = BTreeMap::new();
        for leaf_spec in &spec.leaves {
            let leaf = LeafNode::new(
                LeafConfig {
                    domain: leaf_spec.domain.clone(),
                    site_roots: leaf_spec.site_roots.clone(),
                    listen_address: "127.0.0.1:0".into(),
                    export_page_size: leaf_spec.export_page_size,
                },
                Arc::new(fetcher.clone()),
            )
            .map_err(|e| HarnessError::Boot {
                node: leaf_spec.name.clone(),
                reason: e.to_string(),
            })?;
            switches.insert(leaf_spec.name.clone(), Arc::new(AtomicBool::new(true)));
            leaves.push((leaf_spec.name.clone(), Arc::new(leaf)));
        }

        let mut aggs = Vec::new();
        for agg_spec in &spec.aggregators {
            let transports: Vec<Arc<dyn LeafTransport>> = agg_spec
                .leaves
                .iter()
                .map(|name| {
                    let leaf = leaves
                        .iter()
                        .find(|(n, _)| n == name)
                        .expect("validated leaf reference")
                        .1
                        .clone();
                    Arc::new(InProcessLeaf::with_kill_switch(
                        name.clone(),
                        leaf,
                        Arc::clone(&switches[name]),
                    )) as Arc<dyn LeafTransport>
                })
                .collect();
            switches.insert(agg_spec.name.clone(), Arc::new(AtomicBool::new(true)));
            aggs.push((
                agg_spec.name.clone(),
                Arc::new(AggregatorNode::new(agg_spec.domain.clone(), transports)),
            ));
        }

        let config = FederationConfig {
            aggregators: spec
                .aggregators
                .iter()
                .map(|a| AggregatorRef {
                    name: a.name.clone(),
                    endpoint: format!("inproc://{}", a.name),
                })
                .collect(),
            per_source_limit_factor: spec.root.per_source_limit_factor,
            timeout_ms: spec.root.timeout_ms,
            listen_address: "127.0.0.1:0".into(),
        };
        let transports: Vec<Arc<dyn AggTransport>> = aggs
            .iter()
            .map(|(name, agg)| {
                Arc::new(InProcessAgg::with_kill_switch(
                    Arc::clone(agg),
                    Arc::clone(&switches[name]),
                )) as Arc<dyn AggTransport>
            })
            .collect();
        let root = RootNode::new(config, transports).map_err(|e| HarnessError::Boot {
            node: "root".into(),
            reason: e.to_string(),
        })?;

        Ok(InProcessCluster {
            corpus: shared,
            leaves,
            aggs,
            switches,
            root,
        })
    }

    fn alive(&self, node: &str) -> bool {
        self.switches
            .get(node)
            .map(|s| s.load(Ordering::SeqCst))
            .unwrap_or(false)
    }
}

impl Cluster for InProcessCluster {
    fn refresh(&mut self, leaf: &str) -> Result<RefreshReport, String> {
        if !self.alive(leaf) {
            return Err("unreachable".into());
        }
        let node = &self
            .leaves
            .iter()
            .find(|(n, _)| n == leaf)
            .ok_or_else(|| format!("unknown leaf {leaf}"))?
            .1;
        node.refresh().map_err(|e| e.to_string())
    }

    fn harvest(&mut self, agg: &str) -> Result<HarvestReport, String> {
        if !self.alive(agg) {
            return Err("unreachable".into());
        }
        let node = &self
            .aggs
            .iter()
            .find(|(n, _)| n == agg)
            .ok_or_else(|| format!("unknown aggregator {agg}"))?
            .1;
        Ok(node.harvest())
    }

    fn query(&mut self, q: &str, limit: usize, exhaustive: bool)
        -> Result<SearchResponse, String> {
        self.root
            .federated_search(q, limit, exhaustive)
            .map_err(|e| match e {
                FederationError::EmptyQuery => "empty_query".to_string(),
                FederationError::InvalidLimit => "invalid_limit".to_string(),
                FederationError::NoSources => "no_sources".to_string(),
                other => other.to_string(),
            })
    }

    fn kill(&mut self, node: &str) -> Result<(), String> {
        self.switches
            .get(node)
            .map(|s| s.store(false, Ordering::SeqCst))
            .ok_or_else(|| format!("unknown node {node}"))
    }

    fn revive(&mut self, node: &str) -> Result<(), String> {
        self.switches
            .get(node)
            .map(|s| s.store(true, Ordering::SeqCst))
            .ok_or_else(|| format!("unknown node {node}"))
    }

    fn mutate_page(&mut self, url: &str, body: &str) -> Result<(), String> {
        self.corpus
            .write()
            .unwrap()
            .mutate_body(url, body)
            .map_err(|e| e.to_string())
    }

    fn delete_page(&mut self, url: &str) -> Result<(), String> {
        self.corpus
            .write()
            .unwrap()
            .remove_page(url)
            .map_err(|e| e.to_string())
    }

    fn overlap_counts(&mut self, agg: &str) -> Result<BTreeMap<String, u64>, String> {
        if !self.alive(agg) {
            return Err("unreachable".into());
        }
        self.aggs
            .iter()
            .find(|(n, _)| n == agg)
            .map(|(_, node)| node.overlap_counts())
            .ok_or_else(|| format!("unknown aggregator {agg}"))
    }

    fn corpus(&self) -> Arc<RwLock<Corpus>> {
        Arc::clone(&self.corpus)
    }
}

// ---- subprocess hosting ----------------------------------------------------

enum NodeKind {
    Leaf,
    Agg,
}

struct NodeProc {
    kind: NodeKind,
    config_path: PathBuf,
    port_file: PathBuf,
    endpoint: String,
    port: u16,
    child: Option<Child>,
}

struct SocketCluster {
    corpus: Arc<RwLock<Corpus>>,
    corpus_dir: PathBuf,
    binary: PathBuf,
    nodes: BTreeMap<String, NodeProc>,
    root: NodeProc,
    root_client: HttpRootClient,
    _workdir: tempfile::TempDir,
}

impl SocketCluster {
    fn boot(spec: &TopologySpec, corpus: Corpus, binary: &Path) -> Result<Self, HarnessError> {
        let workdir = tempfile::tempdir()?;
        let corpus_dir = workdir.path().join("corpus");
        corpus.save(&corpus_dir)?;

        let mut nodes: BTreeMap<String, NodeProc> = BTreeMap::new();

        for leaf_spec in &spec.leaves {
            let config = LeafConfig {
                domain: leaf_spec.domain.clone(),
                site_roots: leaf_spec.site_roots.clone(),
                listen_address: "127.0.0.1:0".into(),
                export_page_size: leaf_spec.export_page_size,
            };
            let config_path = workdir.path().join(format!("{}.leaf.json", leaf_spec.name));
            std::fs::write(&config_path, serde_json::to_string_pretty(&config)?)?;
            let port_file = workdir.path().join(format!("{}.port", leaf_spec.name));
            let args = vec![
                "serve-leaf".to_string(),
                "--config".into(),
                config_path.display().to_string(),
                "--corpus-dir".into(),
                corpus_dir.display().to_string(),
            ];
            let mut proc = NodeProc {
                kind: NodeKind::Leaf,
                config_path,
                port_file,
                endpoint: String::new(),
                port: 0,
                child: None,
            };
            spawn_node(binary, &args, &mut proc, &leaf_spec.name, None)?;
            nodes.insert(leaf_spec.name.clone(), proc);
        }

        for agg_spec in &spec.aggregators {
            let leaves: Vec<String> = agg_spec
                .leaves
                .iter()
                .map(|name| nodes[name].endpoint.clone())
                .collect();
            let config = AggregatorConfig {
                domain: agg_spec.domain.clone(),
                leaves,
                listen_address: "127.0.0.1:0".into(),
                harvest_page_size: 500,
            };
            let config_path = workdir.path().join(format!("{}.agg.json", agg_spec.name));
            std::fs::write(&config_path, serde_json::to_string_pretty(&config)?)?;
            let port_file = workdir.path().join(format!("{}.port", agg_spec.name));
            let args = vec![
                "serve-agg".to_string(),
                "--config".into(),
                config_path.display().to_string(),
            ];
            let mut proc = NodeProc {
                kind: NodeKind::Agg,
                config_path,
                port_file,
                endpoint: String::new(),
                port: 0,
                child: None,
            };
            spawn_node(binary, &args, &mut proc, &agg_spec.name, None)?;
            nodes.insert(agg_spec.name.clone(), proc);
        }

        let config = FederationConfig {
            aggregators: spec
                .aggregators
                .iter()
                .map(|a| AggregatorRef {
                    name: a.name.clone(),
                    endpoint: nodes[&a.name].endpoint.clone(),
                })
                .collect(),
            per_source_limit_factor: spec.root.per_source_limit_factor,
            timeout_ms: spec.root.timeout_ms,
            listen_address: "127.0.0.1:0".into(),
        };
        let config_path = workdir.path().join("root.json");
        std::fs::write(&config_path, serde_json::to_string_pretty(&config)?)?;
        let port_file = workdir.path().join("root.port");
        let args = vec![
            "serve-root".to_string(),
            "--config".into(),
            config_path.display().to_string(),
        ];
        let mut root = NodeProc {
            kind: NodeKind::Agg,
            config_path,
            port_file,
            endpoint: String::new(),
            port: 0,
            child: None,
        };
        spawn_node(binary, &args, &mut root, "root", None)?;
        let root_client = HttpRootClient::with_timeout(
            root.endpoint.clone(),
            Duration::from_millis(spec.root.timeout_ms + 10_000),
        );

        Ok(SocketCluster {
            corpus: Arc::new(RwLock::new(corpus)),
            corpus_dir,
            binary: binary.to_path_buf(),
            nodes,
            root,
            root_client,
            _workdir: workdir,
        })
    }

    fn endpoint_of(&self, node: &str) -> Result<String, String> {
        self.nodes
            .get(node)
            .map(|n| n.endpoint.clone())
            .ok_or_else(|| format!("unknown node {node}"))
    }
}

fn spawn_node(
    binary: &Path,
    args: &[String],
    proc: &mut NodeProc,
    name: &str,
    pin_port: Option<u16>,
) -> Result<(), HarnessError> {
    let _ = std::fs::remove_file(&proc.port_file);
    let mut command = Command::new(binary);
    command
        .args(args)
        .arg("--port-file")
        .arg(&proc.port_file)
        .stdout(Stdio::null())
        .stderr(Stdio::null());
    if let Some(port) = pin_port {
        command.arg("--listen").arg(format!("127.0.0.1:{port}"));
    }
    let mut child = command.spawn().map_err(|e| HarnessError::Boot {
        node: name.to_string(),
        reason: format!("spawn {}: {e}", binary.display()),
    })?;

    let deadline = Instant::now() + Duration::from_secs(15);
    loop {
        if let Ok(contents) = std::fs::read_to_string(&proc.port_file) {
            if let Ok(addr) = contents.trim().parse::<std::net::SocketAddr>() {
                proc.endpoint = format!("http://{addr}");
                proc.port = addr.port();
                proc.child = Some(child);
                return Ok(());
            }
        }
        if let Ok(Some(status)) = child.try_wait() {
            return Err(HarnessError::Boot {
                node: name.to_string(),
                reason: format!("exited during startup: {status}"),
            });
        }
        if Instant::now() > deadline {
            let _ = child.kill();
            return Err(HarnessError::Boot {
                node: name.to_string(),
                reason: "timed out waiting for port file".into(),
            });
        }
        std::thread::sleep(Duration::from_millis(20));
    }
}

impl Cluster for SocketCluster {
    fn refresh(&mut self, leaf: &str) -> Result<RefreshReport, String> {
        let endpoint = self.endpoint_of(leaf)?;
        HttpLeafClient::new(endpoint)
            .refresh()
            .map_err(|e| e.to_string())
    }

    fn harvest(&mut self, agg: &str) -> Result<HarvestReport, String> {
        let endpoint = self.endpoint_of(agg)?;
        HttpAggClient::new(endpoint)
            .harvest()
            .map_err(|e| e.to_string())
    }

    fn query(&mut self, q: &str, limit: usize, exhaustive: bool)
        -> Result<SearchResponse, String> {
        self.root_client
            .search(q, limit, exhaustive)
            .map_err(|e| e.to_string())
    }

    fn kill(&mut self, node: &str) -> Result<(), String> {
        let proc = self
            .nodes
            .get_mut(node)
            .ok_or_else(|| format!("unknown node {node}"))?;
        if let Some(mut child) = proc.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
        Ok(())
    }

    /// Respawn on the same port so peers' configured endpoints stay valid.
    /// Subprocess state is not persisted: a revived leaf restarts empty.
    fn revive(&mut self, node: &str) -> Result<(), String> {
        let (kind, config_path, port) = {
            let proc = self
                .nodes
                .get(node)
                .ok_or_else(|| format!("unknown node {node}"))?;
            if proc.child.is_some() {
                return Ok(());
            }
            (
                match proc.kind {
                    NodeKind::Leaf => "serve-leaf",
                    NodeKind::Agg => "serve-agg",
                },
                proc.config_path.display().to_string(),
                proc.port,
            )
        };
        let mut args = vec![kind.to_string(), "--config".into(), config_path];
        if matches!(self.nodes[node].kind, NodeKind::Leaf) {
            args.push("--corpus-dir".into());
            args.push(self.corpus_dir.display().to_string());
        }
        let binary = self.binary.clone();
        let proc = self.nodes.get_mut(node).expect("checked above");
        spawn_node(&binary, &args, proc, node, Some(port)).map_err(|e| e.to_string())
    }

    fn mutate_page(&mut self, url: &str, body: &str) -> Result<(), String> {
        let mut corpus = self.corpus.write().unwrap();
        corpus.mutate_body(url, body).map_err(|e| e.to_string())?;
        let page = corpus.pages.get(url).expect("just mutated");
        let rel = page_rel_path(url, &page.site_name, &corpus.sites).map_err(|e| e.to_string())?;
        std::fs::write(self.corpus_dir.join(rel), &page.html_bytes).map_err(|e| e.to_string())
    }

    fn delete_page(&mut self, url: &str) -> Result<(), String> {
        let mut corpus = self.corpus.write().unwrap();
        let site_name = corpus
            .pages
            .get(url)
            .map(|p| p.site_name.clone())
            .ok_or_else(|| format!("page not found: {url}"))?;
        let rel = page_rel_path(url, &site_name, &corpus.sites).map_err(|e| e.to_string())?;
        corpus.remove_page(url).map_err(|e| e.to_string())?;
        std::fs::remove_file(self.corpus_dir.join(rel)).map_err(|e| e.to_string())
    }

    fn overlap_counts(&mut self, agg: &str) -> Result<BTreeMap<String, u64>, String> {
        let endpoint = self.endpoint_of(agg)?;
        HttpAggClient::new(endpoint)
            .overlap_counts()
            .map_err(|e| e.to_string())
    }

    fn corpus(&self) -> Arc<RwLock<Corpus>> {
        Arc::clone(&self.corpus)
    }
}

impl Drop for SocketCluster {
    fn drop(&mut self) {
        for proc in self.nodes.values_mut() {
            if let Some(mut child) = proc.child.take() {
                let _ = child.kill();
                let _ = child.wait();
            }
        }
        if let Some(mut child) = self.root.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}
