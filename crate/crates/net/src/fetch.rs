//! Crawl a corpus served as static files over HTTP.
//!
//! Synthetic site hostnames do not resolve, so the fetcher rewrites
//! `http://<site>/<path>` to `<gateway>/<domain>/<site>/<path>` — the same
//! layout [`Corpus::save`] writes and [`corpus_server`] serves.
//!
//! [`Corpus::save`]: hiersearch_core::webcorpus::Corpus::save
//! [`corpus_server`]: crate::corpus_server

use std::collections::BTreeMap;
use std::time::Duration;

use hiersearch_core::crawler::{FetchError, Fetcher};
use hiersearch_core::webcorpus::Manifest;

pub struct HttpFetcher {
    gateway: String,
    site_to_domain: BTreeMap<String, String>,
    client: reqwest::blocking::Client,
}

impl HttpFetcher {
    /// Reads `<gateway>/manifest.json` to learn the site layout.
    pub fn open(gateway: &str) -> Result<Self, FetchError> {
        let gateway = gateway.trim_end_matches('/').to_string();
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(10))
            .build()
            .expect("reqwest client");
        let manifest_url = format!("{gateway}/manifest.json");
        let manifest: Manifest = client
            .get(&manifest_url)
            .send()
            .map_err(|e| FetchError::Unreachable {
                url: manifest_url.clone(),
                reason: e.to_string(),
            })?
            .json()
            .map_err(|e| FetchError::Unreachable {
                url: manifest_url,
                reason: e.to_string(),
            })?;
        let mut site_to_domain = BTreeMap::new();
        for domain in &manifest.domains {
            for site in &domain.sites {
                site_to_domain.insert(site.site.clone(), domain.name.clone());
            }
        }
        Ok(Self {
            gateway,
            site_to_domain,
            client,
        })
    }
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        let not_found = || FetchError::NotFound(url.to_string());
        let parsed = url::Url::parse(url).map_err(|_| not_found())?;
        let host = parsed.host_str().ok_or_else(not_found)?;
        let domain = self.site_to_domain.get(host).ok_or_else(not_found)?;
        let rewritten = format!("{}/{domain}/{host}{}", self.gateway, parsed.path());

        let response = self
            .client
            .get(&rewritten)
            .send()
            .map_err(|e| FetchError::Unreachable {
                url: url.to_string(),
                reason: e.to_string(),
            })?;
        if response.status() == reqwest::StatusCode::NOT_FOUND {
            return Err(not_found());
        }
        if !response.status().is_success() {
            return Err(FetchError::Unreachable {
                url: url.to_string(),
                reason: format!("http {}", response.status()),
            });
        }
        response
            .bytes()
            .map(|b| b.to_vec())
            .map_err(|e| FetchError::Unreachable {
                url: url.to_string(),
                reason: e.to_string(),
            })
    }
}
