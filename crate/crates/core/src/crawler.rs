//! Site-scoped spider.
//!
//! A crawl is organized per site: breadth-first from the site root over
//! internal links. A link whose host is a different site is a *stop* link:
//! its page is still fetched and kept (it counts as material of the crawling
//! site) but its own links are never expanded. Sibling sites of the same
//! domain are stop targets too — the boundary is the site, not the domain.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::urlnorm;
use crate::webcorpus::{serve_page, Corpus, CorpusError, Manifest};

/// One fetched page, tagged with the site whose crawl produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchedPage {
    pub url: String,
    #[serde(with = "html_as_string")]
    pub html_bytes: Vec<u8>,
    pub origin_site: String,
    pub is_stop_url: bool,
    pub fetch_seq: u64,
}

/// Serialize page bytes as a JSON string; the corpus subset is UTF-8.
mod html_as_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&String::from_utf8_lossy(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        Ok(String::deserialize(de)?.into_bytes())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CrawlStats {
    pub fetched: u64,
    pub stop_urls: u64,
    pub dead: u64,
    pub parse_warnings: u64,
}

/// Union of the per-site crawls of one domain. Pages duplicated across origin
/// sites are kept on purpose: replica multiplicity is what the layer above
/// counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrawlResult {
    pub domain: String,
    pub pages: Vec<FetchedPage>,
    pub dead_links: Vec<String>,
    pub skipped_sites: Vec<String>,
    pub stats: CrawlStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkClass {
    Internal,
    Stop,
}

/// Outcome of classifying one href found on a page.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClassifiedLink {
    Internal(String),
    Stop(String),
    /// The href did not resolve to a URL. Treated as a stop link with
    /// nothing to fetch; the crawl records a parse warning and moves on.
    Unresolvable { href: String },
}

impl ClassifiedLink {
    pub fn class(&self) -> LinkClass {
        match self {
            ClassifiedLink::Internal(_) => LinkClass::Internal,
            ClassifiedLink::Stop(_) | ClassifiedLink::Unresolvable { .. } => LinkClass::Stop,
        }
    }
}

/// Resolve `href` against `base_url` and decide whether it stays inside
/// `current_site`. A link to the page itself is internal.
pub fn classify_link(base_url: &str, href: &str, current_site: &str) -> ClassifiedLink {
    match urlnorm::resolve(base_url, href) {
        Ok(url) => match urlnorm::host_of(&url) {
            Some(host) if host == current_site => ClassifiedLink::Internal(url),
            Some(_) => ClassifiedLink::Stop(url),
            None => ClassifiedLink::Unresolvable {
                href: href.to_string(),
            },
        },
        Err(_) => ClassifiedLink::Unresolvable {
            href: href.to_string(),
        },
    }
}

/// All `<a href>` values of a page, in document order.
pub fn extract_hrefs(html: &[u8]) -> Vec<String> {
    let text = String::from_utf8_lossy(html);
    let bytes = text.as_bytes();
    let mut hrefs = Vec::new();
    let mut i = 0;
    while let Some(pos) = text[i..].find("href=") {
        let mut j = i + pos + "href=".len();
        let end = match bytes.get(j) {
            Some(&q @ (b'"' | b'\'')) => {
                j += 1;
                text[j..].find(q as char).map(|e| j + e)
            }
            Some(_) => text[j..]
                .find(|c: char| c == '>' || c.is_whitespace())
                .map(|e| j + e),
            None => None,
        };
        match end {
            Some(e) => {
                hrefs.push(text[j..e].to_string());
                i = e;
            }
            None => break,
        }
    }
    hrefs
}

/// Where pages come from. Implementations must be shareable across the
/// concurrent site crawls of one domain.
pub trait Fetcher: Send + Sync {
    fn fetch(&self, url: &str) -> Result<Vec<u8>, FetchError>;
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("unreachable: {url}: {reason}")]
    Unreachable { url: String, reason: String },
}

/// Fetcher over an in-memory corpus. The lock lets a harness mutate pages
/// between crawl generations while crawls and fetches stay consistent.
#[derive(Clone)]
pub struct CorpusFetcher {
    corpus: Arc<RwLock<Corpus>>,
}

impl CorpusFetcher {
    pub fn new(corpus: Corpus) -> Self {
        Self {
            corpus: Arc::new(RwLock::new(corpus)),
        }
    }

    pub fn from_shared(corpus: Arc<RwLock<Corpus>>) -> Self {
        Self { corpus }
    }

    pub fn shared(&self) -> Arc<RwLock<Corpus>> {
        Arc::clone(&self.corpus)
    }
}

impl Fetcher for CorpusFetcher {
    fn fetch(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        let corpus = self.corpus.read().expect("corpus lock poisoned");
        match serve_page(&corpus, url) {
            Ok(page) => Ok(page.html_bytes.clone()),
            Err(CorpusError::PageNotFound { url }) => Err(FetchError::NotFound(url)),
            Err(other) => Err(FetchError::Unreachable {
                url: url.to_string(),
                reason: other.to_string(),
            }),
        }
    }
}

/// Fetcher over a persisted corpus directory, driven by its manifest.
pub struct DirFetcher {
    root: PathBuf,
    site_to_domain: BTreeMap<String, String>,
}

impl DirFetcher {
    pub fn open(dir: &Path) -> Result<Self, CorpusError> {
        let manifest_path = dir.join("manifest.json");
        if !manifest_path.exists() {
            return Err(CorpusError::MissingFile(manifest_path));
        }
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
        let mut site_to_domain = BTreeMap::new();
        for domain in &manifest.domains {
            for site in &domain.sites {
                site_to_domain.insert(site.site.clone(), domain.name.clone());
            }
        }
        Ok(Self {
            root: dir.to_path_buf(),
            site_to_domain,
        })
    }

    pub fn manifest(dir: &Path) -> Result<Manifest, CorpusError> {
        let manifest_path = dir.join("manifest.json");
        if !manifest_path.exists() {
            return Err(CorpusError::MissingFile(manifest_path));
        }
        Ok(serde_json::from_str(&fs::read_to_string(manifest_path)?)?)
    }
}

impl Fetcher for DirFetcher {
    fn fetch(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        let not_found = || FetchError::NotFound(url.to_string());
        let parsed = url::Url::parse(url).map_err(|_| not_found())?;
        let host = parsed.host_str().ok_or_else(not_found)?;
        let domain = self.site_to_domain.get(host).ok_or_else(not_found)?;
        let mut path = self.root.join(domain).join(host);
        for seg in parsed.path_segments().into_iter().flatten() {
            if seg.is_empty() || seg == ".." {
                continue;
            }
            path.push(seg);
        }
        match fs::read(&path) {
            Ok(bytes) => Ok(bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(not_found()),
            Err(e) => Err(FetchError::Unreachable {
                url: url.to_string(),
                reason: e.to_string(),
            }),
        }
    }
}

/// Pages and fetch failures of one site's crawl.
#[derive(Debug, Clone, Default)]
pub struct SiteCrawl {
    pub pages: Vec<FetchedPage>,
    pub dead_links: Vec<String>,
    pub parse_warnings: u64,
}

#[derive(Debug, Error)]
pub enum CrawlError {
    #[error("site root unreachable: {root}: {source}")]
    RootUnreachable { root: String, source: FetchError },
    #[error("bad root url: {0}")]
    BadRootUrl(String),
    #[error("root {root} does not belong to domain {domain}")]
    RootOutsideDomain { root: String, domain: String },
}

/// Breadth-first crawl of one site. Internal links are expanded, stop links
/// are fetched once and kept, links are enqueued in document order, and the
/// result order is fetch order.
pub fn crawl_site(
    fetcher: &dyn Fetcher,
    site_root: &str,
    site: &str,
) -> Result<SiteCrawl, CrawlError> {
    let root = urlnorm::normalize(site_root)
        .map_err(|_| CrawlError::BadRootUrl(site_root.to_string()))?;

    let mut crawl = SiteCrawl::default();
    let mut seen: HashSet<String> = HashSet::new();
    let mut frontier: VecDeque<(String, bool)> = VecDeque::new();

    seen.insert(root.clone());
    let root_is_stop = urlnorm::host_of(&root).as_deref() != Some(site);
    match fetcher.fetch(&root) {
        Ok(bytes) => frontier_absorb(&mut crawl, &mut seen, &mut frontier, root, bytes, site, root_is_stop),
        Err(source) => return Err(CrawlError::RootUnreachable { root, source }),
    }

    while let Some((url, is_stop)) = frontier.pop_front() {
        match fetcher.fetch(&url) {
            Ok(bytes) => frontier_absorb(&mut crawl, &mut seen, &mut frontier, url, bytes, site, is_stop),
            Err(_) => crawl.dead_links.push(url),
        }
    }

    Ok(crawl)
}

fn frontier_absorb(
    crawl: &mut SiteCrawl,
    seen: &mut HashSet<String>,
    frontier: &mut VecDeque<(String, bool)>,
    url: String,
    html_bytes: Vec<u8>,
    site: &str,
    is_stop: bool,
) {
    if !is_stop {
        for href in extract_hrefs(&html_bytes) {
            match classify_link(&url, &href, site) {
                ClassifiedLink::Internal(target) => {
                    if seen.insert(target.clone()) {
                        frontier.push_back((target, false));
                    }
                }
                ClassifiedLink::Stop(target) => {
                    if seen.insert(target.clone()) {
                        frontier.push_back((target, true));
                    }
                }
                ClassifiedLink::Unresolvable { href } => {
                    tracing::debug!(page = %url, href = %href, "unresolvable href");
                    crawl.parse_warnings += 1;
                }
            }
        }
    }
    let fetch_seq = crawl.pages.len() as u64;
    crawl.pages.push(FetchedPage {
        url,
        html_bytes,
        origin_site: site.to_string(),
        is_stop_url: is_stop,
        fetch_seq,
    });
}

/// Crawl every site of a domain and keep the union, duplicates included.
/// Unreachable site roots are skipped and reported; everything else proceeds.
pub fn crawl_domain(
    fetcher: &dyn Fetcher,
    domain: &str,
    site_roots: &[String],
) -> Result<CrawlResult, CrawlError> {
    let mut sites = Vec::with_capacity(site_roots.len());
    for root in site_roots {
        let normalized =
            urlnorm::normalize(root).map_err(|_| CrawlError::BadRootUrl(root.clone()))?;
        let host = urlnorm::host_of(&normalized)
            .ok_or_else(|| CrawlError::BadRootUrl(root.clone()))?;
        if host != domain && !host.ends_with(&format!(".{domain}")) {
            return Err(CrawlError::RootOutsideDomain {
                root: root.clone(),
                domain: domain.to_string(),
            });
        }
        sites.push((normalized, host));
    }

    let mut result = CrawlResult {
        domain: domain.to_string(),
        pages: Vec::new(),
        dead_links: Vec::new(),
        skipped_sites: Vec::new(),
        stats: CrawlStats::default(),
    };

    for (root, site) in sites {
        match crawl_site(fetcher, &root, &site) {
            Ok(crawl) => {
                result.pages.extend(crawl.pages);
                result.dead_links.extend(crawl.dead_links);
                result.stats.parse_warnings += crawl.parse_warnings;
            }
            Err(CrawlError::RootUnreachable { .. }) => {
                tracing::warn!(site = %site, "site root unreachable, skipping");
                result.skipped_sites.push(site);
            }
            Err(other) => return Err(other),
        }
    }

    result.stats.fetched = result.pages.len() as u64;
    result.stats.stop_urls = result.pages.iter().filter(|p| p.is_stop_url).count() as u64;
    result.stats.dead = result.dead_links.len() as u64;
    Ok(result)
}
