//! Pinned hand enumerations over the reference corpus: exact fetch orders,
//! record sets and scores, frozen here as plain assertions.

use std::sync::Arc;

use hiersearch_core::crawler::{crawl_domain, crawl_site, CorpusFetcher};
use hiersearch_core::indexer::{build_index, search_index};
use hiersearch_core::leafnode::{LeafConfig, LeafNode};
use hiersearch_core::webcorpus::serve_page;
use hiersearch_harness::tiny3;

#[test]
fn site_a_crawl_is_p0_p1_then_stop_copy_of_b() {
    let fetcher = CorpusFetcher::new(tiny3::corpus());
    let crawl = crawl_site(&fetcher, tiny3::A_P0, tiny3::SITE_A).unwrap();
    let got: Vec<(&str, bool)> = crawl
        .pages
        .iter()
        .map(|p| (p.url.as_str(), p.is_stop_url))
        .collect();
    assert_eq!(
        got,
        vec![
            (tiny3::A_P0, false),
            (tiny3::A_P1, false),
            (tiny3::B_P0, true),
        ]
    );
    assert!(crawl.dead_links.is_empty());
}

#[test]
fn domain_crawl_yields_the_five_enumerated_records() {
    let fetcher = CorpusFetcher::new(tiny3::corpus());
    let result = crawl_domain(
        &fetcher,
        "edu.cn",
        &[tiny3::A_P0.to_string(), tiny3::B_P0.to_string()],
    )
    .unwrap();
    let got: Vec<(&str, &str, bool)> = result
        .pages
        .iter()
        .map(|p| (p.url.as_str(), p.origin_site.as_str(), p.is_stop_url))
        .collect();
    assert_eq!(
        got,
        vec![
            (tiny3::A_P0, tiny3::SITE_A, false),
            (tiny3::A_P1, tiny3::SITE_A, false),
            (tiny3::B_P0, tiny3::SITE_A, true),
            (tiny3::B_P0, tiny3::SITE_B, false),
            (tiny3::A_P1, tiny3::SITE_B, true),
        ]
    );
    assert_eq!(result.stats.fetched, 5);
    assert_eq!(result.stats.stop_urls, 2);
}

#[test]
fn hust_index_has_three_records_and_w3_scores_nine() {
    let fetcher = CorpusFetcher::new(tiny3::corpus());
    let crawl = crawl_site(&fetcher, tiny3::A_P0, tiny3::SITE_A).unwrap();
    let index = build_index(&crawl.pages);

    assert_eq!(index.records.len(), 3);
    assert!(index
        .records
        .contains_key(&(tiny3::B_P0.to_string(), tiny3::SITE_A.to_string())));

    // w3 lives only on A/p1: once in the title, once in the body -> 8 + 1.
    let hits = search_index(&index, &["w3".into()], 10).unwrap();
    assert_eq!(hits.len(), 1);
    assert_eq!(hits[0].url, tiny3::A_P1);
    assert_eq!(hits[0].score, 9);
}

#[test]
fn hust_leaf_search_w3_returns_the_single_scored_hit() {
    let fetcher = Arc::new(CorpusFetcher::new(tiny3::corpus()));
    let leaf = LeafNode::new(
        LeafConfig {
            domain: tiny3::SITE_A.into(),
            site_roots: vec![tiny3::A_P0.into()],
            listen_address: "127.0.0.1:0".into(),
            export_page_size: 500,
        },
        fetcher,
    )
    .unwrap();
    leaf.refresh().unwrap();
    let response = leaf.handle_search("w3", 10).unwrap();
    assert_eq!(response.results.len(), 1);
    assert_eq!(response.results[0].url, tiny3::A_P1);
    assert_eq!(response.results[0].score, 9);
}

#[test]
fn serving_a_p1_returns_its_anchor_free_page() {
    let corpus = tiny3::corpus();
    let page = serve_page(&corpus, tiny3::A_P1).unwrap();
    let html = String::from_utf8(page.html_bytes.clone()).unwrap();
    assert!(!html.contains("<a "), "A/p1 has no out-links: {html}");
    assert!(html.contains("<title>w3 w8</title>"));

    let root = serve_page(&corpus, tiny3::A_P0).unwrap();
    assert_eq!(root.site_name, tiny3::SITE_A);
}
