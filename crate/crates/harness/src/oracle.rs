//! Brute-force oracles recomputed straight from raw page bytes.
//!
//! Everything here is deliberately independent of the crawl/index/merge
//! pipeline: link scanning, text extraction, tokenization, the top-64 rule
//! and the grouping arithmetic are reimplemented by direct string scanning
//! over the corpus, so a pipeline bug cannot certify itself.
//!
//! The count of a URL is its in-link count at site granularity: one if its
//! home site is crawled and reaches it internally, plus one per distinct
//! other crawled site with an internally-reachable page linking to it.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use hiersearch_core::webcorpus::{Corpus, Site};

const KEYWORD_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleHit {
    pub url: String,
    pub total_score: u64,
    pub keyword_total: u64,
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_ascii_lowercase())
        .collect()
}

fn host_of(url: &str) -> Option<String> {
    url::Url::parse(url).ok()?.host_str().map(str::to_string)
}

fn links_of(base_url: &str, html: &[u8]) -> Vec<String> {
    let text = String::from_utf8_lossy(html);
    let Ok(base) = url::Url::parse(base_url) else {
        return Vec::new();
    };
    text.split("<a href=\"")
        .skip(1)
        .filter_map(|segment| segment.split('"').next())
        .filter_map(|href| base.join(href).ok())
        .map(|mut joined| {
            joined.set_fragment(None);
            joined.to_string()
        })
        .collect()
}

fn between<'a>(hay: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = hay.find(open)? + open.len();
    let end = hay[start..].find(close)? + start;
    Some(&hay[start..end])
}

fn strip_tags(html: &str) -> String {
    let mut out = String::new();
    let mut in_tag = false;
    for c in html.chars() {
        match c {
            '<' => {
                in_tag = true;
                out.push(' ');
            }
            '>' => in_tag = false,
            _ if !in_tag => out.push(c),
            _ => {}
        }
    }
    out
}

/// Keyword scores of one page recomputed from the fixed corpus layout:
/// 8 per title word, 4 per h1 word, 1 per body word (h1 and anchor text
/// included), top 64 by (score desc, term asc).
fn page_keywords(html: &[u8]) -> BTreeMap<String, u32> {
    let text = String::from_utf8_lossy(html);
    let title = between(&text, "<title>", "</title>").unwrap_or("");
    let mut h1_text = String::new();
    let mut rest: &str = &text;
    while let Some(inner) = between(rest, "<h1>", "</h1>") {
        h1_text.push_str(inner);
        h1_text.push(' ');
        let after = rest.find("</h1>").expect("just matched") + "</h1>".len();
        rest = &rest[after..];
    }
    let body = between(&text, "<body>", "</body>")
        .map(strip_tags)
        .unwrap_or_default();

    let mut scores: BTreeMap<String, u32> = BTreeMap::new();
    for word in words(title) {
        *scores.entry(word).or_insert(0) += 8;
    }
    for word in words(&h1_text) {
        *scores.entry(word).or_insert(0) += 4;
    }
    for word in words(&body) {
        *scores.entry(word).or_insert(0) += 1;
    }

    let mut ranked: Vec<(String, u32)> = scores.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(KEYWORD_CAP);
    ranked.into_iter().collect()
}

/// Pages of `site` reachable from its root over same-host links to pages
/// that actually exist.
fn internally_reachable(corpus: &Corpus, site: &Site) -> BTreeSet<String> {
    let mut reachable = BTreeSet::new();
    let mut queue = VecDeque::new();
    if corpus.pages.contains_key(&site.root_url) {
        reachable.insert(site.root_url.clone());
        queue.push_back(site.root_url.clone());
    }
    while let Some(url) = queue.pop_front() {
        let page = &corpus.pages[&url];
        for target in links_of(&url, &page.html_bytes) {
            if host_of(&target).as_deref() == Some(site.site_name.as_str())
                && corpus.pages.contains_key(&target)
                && reachable.insert(target.clone())
            {
                queue.push_back(target);
            }
        }
    }
    reachable
}

/// In-link counts over an explicit set of crawled sites.
pub fn oracle_overlap_sites(
    corpus: &Corpus,
    crawled_sites: &BTreeSet<String>,
) -> BTreeMap<String, u64> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut foreign_links: BTreeSet<(String, String)> = BTreeSet::new();

    for site in &corpus.sites {
        if !crawled_sites.contains(&site.site_name) {
            continue;
        }
        let reachable = internally_reachable(corpus, site);
        for url in &reachable {
            *counts.entry(url.clone()).or_insert(0) += 1;
        }
        for url in &reachable {
            for target in links_of(url, &corpus.pages[url].html_bytes) {
                let foreign = host_of(&target).as_deref() != Some(site.site_name.as_str());
                if foreign && corpus.pages.contains_key(&target) {
                    foreign_links.insert((target, site.site_name.clone()));
                }
            }
        }
    }
    for (url, _site) in foreign_links {
        *counts.entry(url).or_insert(0) += 1;
    }
    counts
}

/// In-link counts with every site of the given domains crawled.
pub fn oracle_overlap(corpus: &Corpus, crawled_domains: &[String]) -> BTreeMap<String, u64> {
    let sites: BTreeSet<String> = corpus
        .sites
        .iter()
        .filter(|s| crawled_domains.contains(&s.domain))
        .map(|s| s.site_name.clone())
        .collect();
    oracle_overlap_sites(corpus, &sites)
}

/// Precomputed direct-scan state for repeated oracle queries over one corpus
/// snapshot.
pub struct DirectScanIndex {
    counts: BTreeMap<String, u64>,
    keywords: BTreeMap<String, BTreeMap<String, u32>>,
}

impl DirectScanIndex {
    pub fn build(corpus: &Corpus, crawled_sites: &BTreeSet<String>) -> Self {
        let counts = oracle_overlap_sites(corpus, crawled_sites);
        let keywords = counts
            .keys()
            .map(|url| (url.clone(), page_keywords(&corpus.pages[url].html_bytes)))
            .collect();
        DirectScanIndex { counts, keywords }
    }

    /// Global ranking for a query: conjunctive over retained keywords,
    /// ordered (count desc, keyword total desc, url asc).
    pub fn search(&self, query: &str) -> Vec<OracleHit> {
        let terms: BTreeSet<String> = words(query).into_iter().collect();
        if terms.is_empty() {
            return Vec::new();
        }
        let mut hits: Vec<OracleHit> = Vec::new();
        'urls: for (url, count) in &self.counts {
            let keywords = &self.keywords[url];
            let mut keyword_total = 0u64;
            for term in &terms {
                match keywords.get(term) {
                    Some(score) => keyword_total += u64::from(*score),
                    None => continue 'urls,
                }
            }
            hits.push(OracleHit {
                url: url.clone(),
                total_score: *count,
                keyword_total,
            });
        }
        hits.sort_by(|a, b| {
            b.total_score
                .cmp(&a.total_score)
                .then_with(|| b.keyword_total.cmp(&a.keyword_total))
                .then_with(|| a.url.cmp(&b.url))
        });
        hits
    }
}

/// One-shot global ranking, recomputed from scratch.
pub fn oracle_global_search(
    corpus: &Corpus,
    crawled_sites: &BTreeSet<String>,
    query: &str,
) -> Vec<OracleHit> {
    DirectScanIndex::build(corpus, crawled_sites).search(query)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiny3;
    use hiersearch_core::webcorpus::CorpusSpec;

    fn all_sites(corpus: &Corpus) -> BTreeSet<String> {
        corpus.sites.iter().map(|s| s.site_name.clone()).collect()
    }

    #[test]
    fn tiny3_counts_match_hand_enumeration() {
        let corpus = tiny3::corpus();
        let counts = oracle_overlap(
            &corpus,
            &["edu.cn".to_string(), "edu.us".to_string()],
        );
        assert_eq!(counts, tiny3::expected_overlap());
    }

    #[test]
    fn restricting_to_one_domain_lowers_counts() {
        let corpus = tiny3::corpus();
        let counts = oracle_overlap(&corpus, &["edu.cn".to_string()]);
        assert_eq!(counts[tiny3::A_P1], 2);
        assert_eq!(counts[tiny3::B_P0], 2);
        assert_eq!(counts.get(tiny3::C_P0), None);
    }

    #[test]
    fn corpus_without_cross_links_counts_all_ones() {
        let spec = CorpusSpec {
            seed: 5,
            domains: vec![hiersearch_core::webcorpus::DomainSpec {
                name: "edu.cn".into(),
                sites: 3,
                pages_per_site: 4,
            }],
            intra_link_prob: 0.5,
            cross_site_link_prob: 0.0,
            cross_domain_link_prob: 0.0,
            vocab_size: 10,
            words_per_page: 5,
        };
        let corpus = hiersearch_core::webcorpus::generate_corpus(&spec).unwrap();
        let counts = oracle_overlap_sites(&corpus, &all_sites(&corpus));
        assert_eq!(counts.len(), 12);
        assert!(counts.values().all(|&c| c == 1));
    }

    #[test]
    fn empty_corpus_searches_empty() {
        let corpus = Corpus::from_parts(
            CorpusSpec {
                seed: 0,
                domains: vec![],
                intra_link_prob: 0.0,
                cross_site_link_prob: 0.0,
                cross_domain_link_prob: 0.0,
                vocab_size: 10,
                words_per_page: 1,
            },
            vec![],
            vec![],
        );
        assert!(oracle_global_search(&corpus, &BTreeSet::new(), "w1").is_empty());
    }

    #[test]
    fn tiny3_w5_ranking_is_the_pinned_one() {
        let corpus = tiny3::corpus();
        let hits = oracle_global_search(&corpus, &all_sites(&corpus), "w5");
        let ranked: Vec<(&str, u64)> = hits
            .iter()
            .map(|h| (h.url.as_str(), h.total_score))
            .collect();
        assert_eq!(
            ranked,
            vec![
                (tiny3::A_P1, 3),
                (tiny3::B_P0, 2),
                (tiny3::A_P0, 1),
                (tiny3::C_P0, 1),
            ]
        );
    }
}
