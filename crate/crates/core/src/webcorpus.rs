//! Deterministic synthetic web: domains → sites → interlinked HTML pages.
//!
//! The generator stands in for the internet the rest of the stack indexes.
//! Everything is a pure function of [`CorpusSpec`]: one splitmix64 stream per
//! site, fixed draw order, fixed HTML layout. Page 0 of each site is the
//! root, and every page `i > 0` receives a spine link from page `(i-1)/2` of
//! the same site, so a breadth-first crawl from the root reaches every page.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::urlnorm;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64, pinned as the corpus PRNG so "same seed, same corpus" holds
/// regardless of platform or standard-library RNG changes.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [0, n). n must be > 0.
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.next_u64() % n
    }
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a site's private stream. Streams are independent across sites, so
/// sites may generate in parallel without changing the output.
fn site_stream_seed(corpus_seed: u64, global_site_index: u64) -> u64 {
    mix(corpus_seed.wrapping_add(GAMMA.wrapping_mul(global_site_index.wrapping_add(1))))
}

/// One second-level zone: how many sites it has and how big each site is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    /// Dotted lowercase zone name, e.g. "edu.cn".
    pub name: String,
    pub sites: u32,
    pub pages_per_site: u32,
}

/// Full description of a synthetic web. Generation is deterministic in this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub seed: u64,
    pub domains: Vec<DomainSpec>,
    #[serde(default)]
    pub intra_link_prob: f64,
    #[serde(default)]
    pub cross_site_link_prob: f64,
    #[serde(default)]
    pub cross_domain_link_prob: f64,
    #[serde(default = "default_vocab_size")]
    pub vocab_size: u32,
    #[serde(default = "default_words_per_page")]
    pub words_per_page: u32,
}

fn default_vocab_size() -> u32 {
    50
}

fn default_words_per_page() -> u32 {
    40
}

impl CorpusSpec {
    /// Closed-form page count: Σ over domains of sites × pages_per_site.
    pub fn page_count(&self) -> u64 {
        self.domains
            .iter()
            .map(|d| u64::from(d.sites) * u64::from(d.pages_per_site))
            .sum()
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        for (field, p) in [
            ("intra_link_prob", self.intra_link_prob),
            ("cross_site_link_prob", self.cross_site_link_prob),
            ("cross_domain_link_prob", self.cross_domain_link_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(CorpusError::InvalidSpec {
                    field,
                    reason: format!("probability {p} outside [0, 1]"),
                });
            }
        }
        if self.vocab_size < 10 {
            return Err(CorpusError::InvalidSpec {
                field: "vocab_size",
                reason: format!("{} < 10", self.vocab_size),
            });
        }
        if self.words_per_page < 1 {
            return Err(CorpusError::InvalidSpec {
                field: "words_per_page",
                reason: "must be >= 1".into(),
            });
        }
        let mut seen = std::collections::BTreeSet::new();
        for d in &self.domains {
            if d.sites < 1 {
                return Err(CorpusError::InvalidSpec {
                    field: "sites",
                    reason: format!("domain {}: must be >= 1", d.name),
                });
            }
            if d.pages_per_site < 1 {
                return Err(CorpusError::InvalidSpec {
                    field: "pages_per_site",
                    reason: format!("domain {}: must be >= 1", d.name),
                });
            }
            if !seen.insert(d.name.as_str()) {
                return Err(CorpusError::InvalidSpec {
                    field: "domains",
                    reason: format!("duplicate domain name {}", d.name),
                });
            }
        }
        Ok(())
    }
}

/// One web site: the unit a spider crawls and the origin of metadata records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub site_name: String,
    pub domain: String,
    pub root_url: String,
}

/// Raw bytes of one page plus the site that owns it.
#[derive(Debug, Clone, PartialEq)]
pub struct PageSource {
    pub html_bytes: Vec<u8>,
    pub site_name: String,
}

/// A generated (or hand-built) web. Immutable in normal operation; the
/// harness mutates it between crawl generations via [`Corpus::mutate_body`]
/// and [`Corpus::remove_page`].
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub spec: CorpusSpec,
    pub sites: Vec<Site>,
    pub pages: BTreeMap<String, PageSource>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid spec: field `{field}`: {reason}")]
    InvalidSpec { field: &'static str, reason: String },
    #[error("page not found: {url}")]
    PageNotFound { url: String },
    #[error("bad url {url}: {source}")]
    BadUrl {
        url: String,
        source: url::ParseError,
    },
    #[error("corpus io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a corpus directory (missing {0})")]
    MissingFile(PathBuf),
}

/// On-disk catalogue of a corpus: which sites exist and where their roots
/// are. This is what crawlers consume instead of real DNS zone enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub domains: Vec<ManifestDomain>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestDomain {
    pub name: String,
    pub sites: Vec<ManifestSite>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSite {
    pub site: String,
    pub root: String,
}

impl Manifest {
    /// Roots for a crawl scope: `scope` may name a whole domain from the
    /// manifest or a single site within one.
    pub fn roots_for(&self, scope: &str) -> Vec<String> {
        let mut roots = Vec::new();
        for d in &self.domains {
            if d.name == scope {
                roots.extend(d.sites.iter().map(|s| s.root.clone()));
            } else {
                roots.extend(
                    d.sites
                        .iter()
                        .filter(|s| s.site == scope)
                        .map(|s| s.root.clone()),
                );
            }
        }
        roots
    }

    pub fn site_names(&self) -> impl Iterator<Item = &str> {
        self.domains
            .iter()
            .flat_map(|d| d.sites.iter().map(|s| s.site.as_str()))
    }
}

pub fn page_url(site_name: &str, page_index: u32) -> String {
    format!("http://{site_name}/p{page_index}.html")
}

/// Render a page in the fixed HTML subset every other module understands.
/// `links` are (href, anchor text) pairs emitted in order.
pub fn render_page(title: &str, h1: &str, body: &str, links: &[(String, String)]) -> String {
    let mut html = String::with_capacity(128 + body.len());
    html.push_str("<html><head><title>");
    html.push_str(title);
    html.push_str("</title></head><body><h1>");
    html.push_str(h1);
    html.push_str("</h1><p>");
    html.push_str(body);
    html.push_str("</p>");
    for (href, text) in links {
        html.push_str("<a href=\"");
        html.push_str(href);
        html.push_str("\">");
        html.push_str(text);
        html.push_str("</a>");
    }
    html.push_str("</body></html>");
    html
}

// Fixed per-page draw budget. Expected extra links per page are these counts
// times the corresponding probability.
const INTRA_LINK_DRAWS: u32 = 4;
const CROSS_SITE_LINK_DRAWS: u32 = 2;
const CROSS_DOMAIN_LINK_DRAWS: u32 = 2;
const TITLE_WORDS: u32 = 2;
const H1_WORDS: u32 = 1;

/// Generate the corpus described by `spec`. Byte-identical across runs.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Corpus, CorpusError> {
    spec.validate()?;

    let mut sites = Vec::new();
    let mut pages = BTreeMap::new();
    let mut global_site_index: u64 = 0;

    for (domain_idx, domain) in spec.domains.iter().enumerate() {
        for site_idx in 0..domain.sites {
            let site_name = format!("s{site_idx:04}.{}", domain.name);
            sites.push(Site {
                site_name: site_name.clone(),
                domain: domain.name.clone(),
                root_url: page_url(&site_name, 0),
            });

            let mut rng = SplitMix64::new(site_stream_seed(spec.seed, global_site_index));
            global_site_index += 1;

            for page_idx in 0..domain.pages_per_site {
                let html = generate_page(spec, domain_idx, site_idx, page_idx, &mut rng);
                pages.insert(
                    page_url(&site_name, page_idx),
                    PageSource {
                        html_bytes: html.into_bytes(),
                        site_name: site_name.clone(),
                    },
                );
            }
        }
    }

    Ok(Corpus {
        spec: spec.clone(),
        sites,
        pages,
    })
}

fn generate_page(
    spec: &CorpusSpec,
    domain_idx: usize,
    site_idx: u32,
    page_idx: u32,
    rng: &mut SplitMix64,
) -> String {
    let domain = &spec.domains[domain_idx];
    let word = |rng: &mut SplitMix64| format!("w{}", rng.next_below(u64::from(spec.vocab_size)));
    let words = |rng: &mut SplitMix64, n: u32| {
        (0..n).map(|_| word(rng)).collect::<Vec<_>>().join(" ")
    };

    let title = words(rng, TITLE_WORDS);
    let h1 = words(rng, H1_WORDS);
    let body = words(rng, spec.words_per_page);

    let mut links: Vec<(String, String)> = Vec::new();

    // Spine: this page links to its children 2i+1 and 2i+2, which gives every
    // non-root page an incoming intra-site link and makes BFS coverage total.
    for child in [2 * page_idx + 1, 2 * page_idx + 2] {
        if child < domain.pages_per_site {
            links.push((format!("p{child}.html"), word(rng)));
        }
    }

    for _ in 0..INTRA_LINK_DRAWS {
        if rng.next_f64() < spec.intra_link_prob {
            let target = rng.next_below(u64::from(domain.pages_per_site)) as u32;
            links.push((format!("p{target}.html"), word(rng)));
        }
    }

    for _ in 0..CROSS_SITE_LINK_DRAWS {
        if domain.sites > 1 && rng.next_f64() < spec.cross_site_link_prob {
            let mut other = rng.next_below(u64::from(domain.sites) - 1) as u32;
            if other >= site_idx {
                other += 1;
            }
            let target_page = rng.next_below(u64::from(domain.pages_per_site)) as u32;
            let other_name = format!("s{other:04}.{}", domain.name);
            links.push((page_url(&other_name, target_page), word(rng)));
        }
    }

    for _ in 0..CROSS_DOMAIN_LINK_DRAWS {
        if spec.domains.len() > 1 && rng.next_f64() < spec.cross_domain_link_prob {
            let mut other = rng.next_below(spec.domains.len() as u64 - 1) as usize;
            if other >= domain_idx {
                other += 1;
            }
            let target_domain = &spec.domains[other];
            let target_site = rng.next_below(u64::from(target_domain.sites)) as u32;
            let target_page = rng.next_below(u64::from(target_domain.pages_per_site)) as u32;
            let other_name = format!("s{target_site:04}.{}", target_domain.name);
            links.push((page_url(&other_name, target_page), word(rng)));
        }
    }

    render_page(&title, &h1, &body, &links)
}

/// Exact-match page lookup on the normalized URL.
pub fn serve_page<'a>(corpus: &'a Corpus, url: &str) -> Result<&'a PageSource, CorpusError> {
    let normalized = urlnorm::normalize(url).map_err(|source| CorpusError::BadUrl {
        url: url.to_string(),
        source,
    })?;
    corpus
        .pages
        .get(&normalized)
        .ok_or(CorpusError::PageNotFound { url: normalized })
}

impl Corpus {
    /// Hand-build a corpus from explicit sites and (url, html) pages.
    /// `spec` only records the vocabulary bounds for such corpora.
    pub fn from_parts(
        spec: CorpusSpec,
        sites: Vec<Site>,
        pages: Vec<(String, PageSource)>,
    ) -> Self {
        Corpus {
            spec,
            sites,
            pages: pages.into_iter().collect(),
        }
    }

    pub fn manifest(&self) -> Manifest {
        let mut domains: Vec<ManifestDomain> = Vec::new();
        for site in &self.sites {
            let entry = ManifestSite {
                site: site.site_name.clone(),
                root: site.root_url.clone(),
            };
            match domains.iter_mut().find(|d| d.name == site.domain) {
                Some(d) => d.sites.push(entry),
                None => domains.push(ManifestDomain {
                    name: site.domain.clone(),
                    sites: vec![entry],
                }),
            }
        }
        Manifest { domains }
    }

    pub fn site(&self, site_name: &str) -> Option<&Site> {
        self.sites.iter().find(|s| s.site_name == site_name)
    }

    /// Replace the `<p>` body of a page, keeping title, h1 and links intact.
    pub fn mutate_body(&mut self, url: &str, new_body: &str) -> Result<(), CorpusError> {
        let normalized = urlnorm::normalize(url).map_err(|source| CorpusError::BadUrl {
            url: url.to_string(),
            source,
        })?;
        let page = self
            .pages
            .get_mut(&normalized)
            .ok_or(CorpusError::PageNotFound { url: normalized })?;
        let html = String::from_utf8_lossy(&page.html_bytes).into_owned();
        let (start, end) = match (html.find("<p>"), html.find("</p>")) {
            (Some(s), Some(e)) if s + 3 <= e => (s + 3, e),
            _ => {
                return Err(CorpusError::InvalidSpec {
                    field: "mutate_body",
                    reason: format!("page has no <p> element: {url}"),
                })
            }
        };
        let mut out = String::with_capacity(html.len());
        out.push_str(&html[..start]);
        out.push_str(new_body);
        out.push_str(&html[end..]);
        page.html_bytes = out.into_bytes();
        Ok(())
    }

    pub fn remove_page(&mut self, url: &str) -> Result<(), CorpusError> {
        let normalized = urlnorm::normalize(url).map_err(|source| CorpusError::BadUrl {
            url: url.to_string(),
            source,
        })?;
        self.pages
            .remove(&normalized)
            .map(|_| ())
            .ok_or(CorpusError::PageNotFound { url: normalized })
    }

    /// Persist as `<dir>/<domain>/<site>/p<i>.html` plus `manifest.json`.
    /// A `spec.json` sidecar lets [`Corpus::load`] restore the full value.
    pub fn save(&self, dir: &Path) -> Result<(), CorpusError> {
        fs::create_dir_all(dir)?;
        let manifest = self.manifest();
        fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        fs::write(dir.join("spec.json"), serde_json::to_string_pretty(&self.spec)?)?;
        for (url, page) in &self.pages {
            let path = dir.join(page_rel_path(url, &page.site_name, &self.sites)?);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, &page.html_bytes)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Corpus, CorpusError> {
        let manifest_path = dir.join("manifest.json");
        if !manifest_path.exists() {
            return Err(CorpusError::MissingFile(manifest_path));
        }
        let spec_path = dir.join("spec.json");
        if !spec_path.exists() {
            return Err(CorpusError::MissingFile(spec_path));
        }
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
        let spec: CorpusSpec = serde_json::from_str(&fs::read_to_string(spec_path)?)?;

        let mut sites = Vec::new();
        let mut pages = BTreeMap::new();
        for domain in &manifest.domains {
            for entry in &domain.sites {
                sites.push(Site {
                    site_name: entry.site.clone(),
                    domain: domain.name.clone(),
                    root_url: entry.root.clone(),
                });
                let site_dir = dir.join(&domain.name).join(&entry.site);
                let mut names: Vec<String> = Vec::new();
                for file in fs::read_dir(&site_dir)? {
                    names.push(file?.file_name().to_string_lossy().into_owned());
                }
                names.sort();
                for name in names {
                    let html_bytes = fs::read(site_dir.join(&name))?;
                    pages.insert(
                        format!("http://{}/{}", entry.site, name),
                        PageSource {
                            html_bytes,
                            site_name: entry.site.clone(),
                        },
                    );
                }
            }
        }
        Ok(Corpus { spec, sites, pages })
    }
}

/// `<domain>/<site>/<url path>`, the layout both the saver and the
/// directory-backed fetcher agree on.
pub fn page_rel_path(url: &str, site_name: &str, sites: &[Site]) -> Result<PathBuf, CorpusError> {
    let parsed = url::Url::parse(url).map_err(|source| CorpusError::BadUrl {
        url: url.to_string(),
        source,
    })?;
    let domain = sites
        .iter()
        .find(|s| s.site_name == site_name)
        .map(|s| s.domain.clone())
        .unwrap_or_else(|| site_name.to_string());
    let mut path = PathBuf::from(domain).join(site_name);
    for seg in parsed.path_segments().into_iter().flatten() {
        if seg.is_empty() || seg == ".." {
            continue;
        }
        path.push(seg);
    }
    Ok(path)
}

impl fmt::Display for Corpus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "corpus: {} sites, {} pages",
            self.sites.len(),
            self.pages.len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_domain_spec() -> CorpusSpec {
        CorpusSpec {
            seed: 7,
            domains: vec![
                DomainSpec {
                    name: "edu.cn".into(),
                    sites: 2,
                    pages_per_site: 2,
                },
                DomainSpec {
                    name: "edu.us".into(),
                    sites: 1,
                    pages_per_site: 1,
                },
            ],
            intra_link_prob: 0.0,
            cross_site_link_prob: 0.0,
            cross_domain_link_prob: 0.0,
            vocab_size: 10,
            words_per_page: 5,
        }
    }

    #[test]
    fn page_count_matches_closed_form() {
        let spec = two_domain_spec();
        let corpus = generate_corpus(&spec).unwrap();
        assert_eq!(corpus.pages.len() as u64, spec.page_count());
        assert_eq!(spec.page_count(), 5);
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let spec = CorpusSpec {
            intra_link_prob: 0.5,
            cross_site_link_prob: 0.4,
            cross_domain_link_prob: 0.3,
            ..two_domain_spec()
        };
        let a = generate_corpus(&spec).unwrap();
        let b = generate_corpus(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn root_is_page_zero() {
        let corpus = generate_corpus(&two_domain_spec()).unwrap();
        for site in &corpus.sites {
            assert_eq!(site.root_url, page_url(&site.site_name, 0));
            let page = serve_page(&corpus, &site.root_url).unwrap();
            assert_eq!(page.site_name, site.site_name);
        }
    }

    #[test]
    fn unknown_url_is_not_found() {
        let corpus = generate_corpus(&two_domain_spec()).unwrap();
        match serve_page(&corpus, "http://nosuch.example/x") {
            Err(CorpusError::PageNotFound { .. }) => {}
            other => panic!("expected PageNotFound, got {other:?}"),
        }
    }

    #[test]
    fn invalid_spec_names_the_field() {
        let mut spec = two_domain_spec();
        spec.vocab_size = 3;
        match generate_corpus(&spec) {
            Err(CorpusError::InvalidSpec { field, .. }) => assert_eq!(field, "vocab_size"),
            other => panic!("expected InvalidSpec, got {other:?}"),
        }

        let mut spec = two_domain_spec();
        spec.intra_link_prob = 1.5;
        match generate_corpus(&spec) {
            Err(CorpusError::InvalidSpec { field, .. }) => assert_eq!(field, "intra_link_prob"),
            other => panic!("expected InvalidSpec, got {other:?}"),
        }

        let mut spec = two_domain_spec();
        spec.domains.push(spec.domains[0].clone());
        assert!(matches!(
            generate_corpus(&spec),
            Err(CorpusError::InvalidSpec { field: "domains", .. })
        ));
    }

    #[test]
    fn save_load_round_trips() {
        let spec = CorpusSpec {
            intra_link_prob: 0.5,
            cross_site_link_prob: 0.5,
            cross_domain_link_prob: 0.5,
            ..two_domain_spec()
        };
        let corpus = generate_corpus(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        corpus.save(dir.path()).unwrap();
        let loaded = Corpus::load(dir.path()).unwrap();
        assert_eq!(corpus, loaded);
    }

    #[test]
    fn manifest_shape_is_stable() {
        let corpus = generate_corpus(&two_domain_spec()).unwrap();
        let json = serde_json::to_value(corpus.manifest()).unwrap();
        assert_eq!(
            json["domains"][0]["name"].as_str().unwrap(),
            "edu.cn"
        );
        assert_eq!(
            json["domains"][0]["sites"][0]["site"].as_str().unwrap(),
            "s0000.edu.cn"
        );
        assert_eq!(
            json["domains"][0]["sites"][0]["root"].as_str().unwrap(),
            "http://s0000.edu.cn/p0.html"
        );
    }

    #[test]
    fn mutate_body_replaces_only_the_paragraph() {
        let mut corpus = generate_corpus(&two_domain_spec()).unwrap();
        let url = "http://s0000.edu.cn/p1.html";
        let before = String::from_utf8(serve_page(&corpus, url).unwrap().html_bytes.clone()).unwrap();
        corpus.mutate_body(url, "changed words here").unwrap();
        let after = String::from_utf8(serve_page(&corpus, url).unwrap().html_bytes.clone()).unwrap();
        assert_ne!(before, after);
        assert!(after.contains("<p>changed words here</p>"));
        let title_of = |s: &str| s[s.find("<title>").unwrap()..s.find("</title>").unwrap()].to_string();
        assert_eq!(title_of(&before), title_of(&after));
    }
}
