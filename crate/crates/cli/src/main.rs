//! `hiersearch`: generate a synthetic web, crawl it, index it, serve the
//! three node layers, and run whole scripted topologies.

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use hiersearch_core::aggregator::{AggregatorConfig, AggregatorNode, LeafTransport};
use hiersearch_core::crawler::{crawl_domain, CrawlResult, DirFetcher, Fetcher};
use hiersearch_core::indexer::{build_index, save_index};
use hiersearch_core::leafnode::{LeafConfig, LeafNode};
use hiersearch_core::rootnode::{AggTransport, FederationConfig, RootNode};
use hiersearch_core::webcorpus::{generate_corpus, CorpusSpec};
use hiersearch_harness::runner::{run_topology, Mode};
use hiersearch_harness::topology::TopologySpec;
use hiersearch_net::client::{HttpAggClient, HttpLeafClient, HttpRootClient};
use hiersearch_net::corpus_server::serve_corpus_dir;
use hiersearch_net::{serve_agg, serve_leaf, serve_root, HttpFetcher};

#[derive(Parser)]
#[command(name = "hiersearch", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a corpus from a spec file and persist it as a directory.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Crawl one domain (or one site) of a persisted corpus.
    Crawl {
        /// Path to the corpus manifest.json.
        #[arg(long)]
        manifest: PathBuf,
        /// Manifest domain name, or a single site name.
        #[arg(long)]
        domain: String,
        /// Output directory; receives crawl.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build an index file from a crawl directory.
    Index {
        #[arg(long)]
        crawl: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve one leaf node over HTTP.
    ServeLeaf {
        #[arg(long)]
        config: PathBuf,
        /// Crawl from a persisted corpus directory.
        #[arg(long)]
        corpus_dir: Option<PathBuf>,
        /// Crawl from a corpus served over HTTP (gateway base URL).
        #[arg(long)]
        corpus_http: Option<String>,
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        port_file: Option<PathBuf>,
        /// Crawl and index once before serving.
        #[arg(long)]
        refresh_on_start: bool,
    },
    /// Serve one aggregator node over HTTP.
    ServeAgg {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        port_file: Option<PathBuf>,
    },
    /// Serve the federated root over HTTP.
    ServeRoot {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        port_file: Option<PathBuf>,
    },
    /// Serve a persisted corpus directory as static files.
    ServeCorpus {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1:0")]
        listen: String,
    },
    /// Trigger one harvest round on an aggregator.
    Harvest {
        #[arg(long)]
        agg: String,
    },
    /// Query any node's /v1/search endpoint.
    Query {
        #[arg(long)]
        endpoint: String,
        #[arg(long)]
        q: String,
        #[arg(long, default_value_t = 10)]
        limit: usize,
        #[arg(long)]
        exhaustive: bool,
    },
    /// Boot a scripted topology, execute its events, judge its checks.
    Run {
        #[arg(long, conflicts_with = "tiny3")]
        spec: Option<PathBuf>,
        /// Use the built-in reference scenario.
        #[arg(long)]
        tiny3: bool,
        /// Host nodes as subprocesses talking real HTTP.
        #[arg(long)]
        sockets: bool,
        /// Write the transcript JSON here instead of stdout.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Gen { spec, out } => {
            let spec: CorpusSpec = read_json(&spec)?;
            let corpus = generate_corpus(&spec)?;
            corpus.save(&out)?;
            println!(
                "generated {} pages across {} sites into {}",
                corpus.pages.len(),
                corpus.sites.len(),
                out.display()
            );
        }
        Command::Crawl {
            manifest,
            domain,
            out,
        } => {
            let corpus_dir = manifest
                .parent()
                .context("manifest path has no parent directory")?;
            let fetcher = DirFetcher::open(corpus_dir)?;
            let parsed = DirFetcher::manifest(corpus_dir)?;
            let roots = parsed.roots_for(&domain);
            if roots.is_empty() {
                bail!("domain {domain} not found in {}", manifest.display());
            }
            let result = crawl_domain(&fetcher, &domain, &roots)?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("crawl.json"), serde_json::to_string(&result)?)?;
            println!(
                "crawled {}: {} pages ({} stop urls, {} dead links)",
                domain, result.stats.fetched, result.stats.stop_urls, result.stats.dead
            );
        }
        Command::Index { crawl, out } => {
            let result: CrawlResult = read_json(&crawl.join("crawl.json"))?;
            let index = build_index(&result.pages);
            save_index(&index, &out)?;
            println!(
                "indexed {} records ({} terms) into {}",
                index.records.len(),
                index.postings.len(),
                out.display()
            );
        }
        Command::ServeLeaf {
            config,
            corpus_dir,
            corpus_http,
            listen,
            port_file,
            refresh_on_start,
        } => {
            let config: LeafConfig = read_json(&config)?;
            let fetcher: Arc<dyn Fetcher> = match (&corpus_dir, &corpus_http) {
                (Some(dir), None) => Arc::new(DirFetcher::open(dir)?),
                (None, Some(gateway)) => {
                    Arc::new(HttpFetcher::open(gateway).map_err(|e| anyhow::anyhow!("{e}"))?)
                }
                _ => bail!("pass exactly one of --corpus-dir or --corpus-http"),
            };
            let listen = listen.unwrap_or_else(|| config.listen_address.clone());
            let leaf = Arc::new(LeafNode::new(config, fetcher)?);
            if refresh_on_start {
                let report = leaf.refresh()?;
                eprintln!(
                    "initial refresh: generation {} ({} changed)",
                    report.generation, report.changed
                );
            }
            let handle = serve_leaf(leaf, &listen, port_file.as_deref())?;
            eprintln!("leaf listening on {}", handle.addr);
            handle.wait();
        }
        Command::ServeAgg {
            config,
            listen,
            port_file,
        } => {
            let config: AggregatorConfig = read_json(&config)?;
            let transports: Vec<Arc<dyn LeafTransport>> = config
                .leaves
                .iter()
                .map(|endpoint| {
                    Arc::new(HttpLeafClient::new(endpoint.clone())) as Arc<dyn LeafTransport>
                })
                .collect();
            let listen = listen.unwrap_or_else(|| config.listen_address.clone());
            let agg = Arc::new(AggregatorNode::with_page_size(
                config.domain.clone(),
                transports,
                config.harvest_page_size,
            ));
            let handle = serve_agg(agg, &listen, port_file.as_deref())?;
            eprintln!("aggregator listening on {}", handle.addr);
            handle.wait();
        }
        Command::ServeRoot {
            config,
            listen,
            port_file,
        } => {
            let config: FederationConfig = read_json(&config)?;
            let transports: Vec<Arc<dyn AggTransport>> = config
                .aggregators
                .iter()
                .map(|agg| {
                    Arc::new(HttpAggClient::with_timeout(
                        agg.endpoint.clone(),
                        config.timeout() + std::time::Duration::from_millis(500),
                    )) as Arc<dyn AggTransport>
                })
                .collect();
            let listen = listen.unwrap_or_else(|| config.listen_address.clone());
            let root = Arc::new(RootNode::new(config, transports)?);
            let handle = serve_root(root, &listen, port_file.as_deref())?;
            eprintln!("root listening on {}", handle.addr);
            handle.wait();
        }
        Command::ServeCorpus { dir, listen } => {
            let handle = serve_corpus_dir(&dir, &listen)?;
            eprintln!("corpus served on {}", handle.addr);
            handle.wait();
        }
        Command::Harvest { agg } => {
            let report = HttpAggClient::new(agg)
                .harvest()
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Query {
            endpoint,
            q,
            limit,
            exhaustive,
        } => {
            let response = HttpRootClient::new(endpoint)
                .search(&q, limit, exhaustive)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            println!("{}", serde_json::to_string_pretty(&response)?);
        }
        Command::Run {
            spec,
            tiny3,
            sockets,
            transcript,
        } => {
            let spec: TopologySpec = if tiny3 {
                hiersearch_harness::tiny3::topology()
            } else {
                let path = spec.context("pass --spec <file> or --tiny3")?;
                read_json(&path)?
            };
            let mode = if sockets {
                Mode::Sockets {
                    binary: std::env::current_exe()?,
                }
            } else {
                Mode::InProcess
            };
            let report = run_topology(&spec, mode)?;
            for check in &report.checks {
                println!(
                    "CHECK {} [step {}]: {}",
                    check.name,
                    check.step,
                    if check.pass { "PASS" } else { "FAIL" }
                );
                if !check.pass {
                    println!("  {}", check.detail);
                }
            }
            match &transcript {
                Some(path) => fs::write(path, report.to_json())?,
                None => println!("{}", report.to_json()),
            }
            if !report.passed {
                std::process::exit(1);
            }
        }
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&raw).with_context(|| format!("parsing {}", path.display()))
}
