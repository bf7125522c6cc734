//! Blocking HTTP clients implementing the core transport traits.

use std::time::Duration;

use hiersearch_core::aggregator::{LeafTransport, TransportError};
use hiersearch_core::rootnode::AggTransport;
use hiersearch_core::wire::{
    ExportResponse, HarvestReport, RefreshReport, SearchResponse, SourcesResponse,
};

fn client(timeout: Duration) -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .expect("reqwest client")
}

fn get_json<T: serde::de::DeserializeOwned>(
    client: &reqwest::blocking::Client,
    url: &str,
) -> Result<T, TransportError> {
    let response = client
        .get(url)
        .send()
        .map_err(|e| TransportError::Unreachable(e.to_string()))?;
    if !response.status().is_success() {
        return Err(TransportError::Protocol(format!(
            "{url}: http {}",
            response.status()
        )));
    }
    response
        .json()
        .map_err(|e| TransportError::Protocol(e.to_string()))
}

fn ping(client: &reqwest::blocking::Client, endpoint: &str) -> bool {
    client
        .get(format!("{endpoint}/v1/ping"))
        .send()
        .map(|r| r.status().is_success())
        .unwrap_or(false)
}

/// Leaf reached over HTTP; the aggregator's view of one third-level node.
pub struct HttpLeafClient {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl HttpLeafClient {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self::with_timeout(endpoint, Duration::from_secs(10))
    }

    pub fn with_timeout(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            client: client(timeout),
        }
    }

    pub fn refresh(&self) -> Result<RefreshReport, TransportError> {
        let url = format!("{}/v1/refresh", self.endpoint);
        let response = self
            .client
            .post(&url)
            .send()
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        if !response.status().is_success() {
            return Err(TransportError::Protocol(format!(
                "{url}: http {}",
                response.status()
            )));
        }
        response
            .json()
            .map_err(|e| TransportError::Protocol(e.to_string()))
    }

    pub fn search(&self, query: &str, limit: usize) -> Result<SearchResponse, TransportError> {
        get_json(
            &self.client,
            &format!(
                "{}/v1/search?q={}&limit={limit}",
                self.endpoint,
                urlencode(query)
            ),
        )
    }
}

impl LeafTransport for HttpLeafClient {
    fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn export(&self, cursor: u64, max: u32) -> Result<ExportResponse, TransportError> {
        get_json(
            &self.client,
            &format!("{}/v1/export?cursor={cursor}&max={max}", self.endpoint),
        )
    }

    fn ping(&self) -> bool {
        ping(&self.client, &self.endpoint)
    }
}

/// Aggregator reached over HTTP; the root's view of one second-level node.
pub struct HttpAggClient {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl HttpAggClient {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self::with_timeout(endpoint, Duration::from_secs(10))
    }

    pub fn with_timeout(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            client: client(timeout),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn harvest(&self) -> Result<HarvestReport, TransportError> {
        let url = format!("{}/v1/harvest", self.endpoint);
        let response = self
            .client
            .post(&url)
            .send()
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        if !response.status().is_success() {
            return Err(TransportError::Protocol(format!(
                "{url}: http {}",
                response.status()
            )));
        }
        response
            .json()
            .map_err(|e| TransportError::Protocol(e.to_string()))
    }

    pub fn overlap_counts(
        &self,
    ) -> Result<std::collections::BTreeMap<String, u64>, TransportError> {
        #[derive(serde::Deserialize)]
        struct Overlap {
            counts: std::collections::BTreeMap<String, u64>,
        }
        let overlap: Overlap =
            get_json(&self.client, &format!("{}/v1/overlap", self.endpoint))?;
        Ok(overlap.counts)
    }
}

impl AggTransport for HttpAggClient {
    fn search(
        &self,
        query: &str,
        limit: usize,
        exhaustive: bool,
    ) -> Result<SearchResponse, TransportError> {
        get_json(
            &self.client,
            &format!(
                "{}/v1/search?q={}&limit={limit}&exhaustive={exhaustive}",
                self.endpoint,
                urlencode(query)
            ),
        )
    }

    fn ping(&self) -> bool {
        ping(&self.client, &self.endpoint)
    }
}

/// Root reached over HTTP; what an end client talks to.
pub struct HttpRootClient {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl HttpRootClient {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self::with_timeout(endpoint, Duration::from_secs(30))
    }

    pub fn with_timeout(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            client: client(timeout),
        }
    }

    pub fn search(
        &self,
        query: &str,
        limit: usize,
        exhaustive: bool,
    ) -> Result<SearchResponse, TransportError> {
        get_json(
            &self.client,
            &format!(
                "{}/v1/search?q={}&limit={limit}&exhaustive={exhaustive}",
                self.endpoint,
                urlencode(query)
            ),
        )
    }

    pub fn sources(&self) -> Result<SourcesResponse, TransportError> {
        get_json(&self.client, &format!("{}/v1/sources", self.endpoint))
    }

    pub fn ping(&self) -> bool {
        ping(&self.client, &self.endpoint)
    }
}

fn urlencode(raw: &str) -> String {
    url::form_urlencoded::byte_serialize(raw.as_bytes()).collect()
}
