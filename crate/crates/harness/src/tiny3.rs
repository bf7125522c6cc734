//! The fixed hand-enumerable reference corpus.
//!
//! Two domains, four pages, four links:
//!
//! ```text
//!   edu.cn:  A = hust.edu.cn { p0, p1 }   B = pku.edu.cn { p0 }
//!   edu.us:  C = mit.edu.us { p0 }
//!   links:   A/p0 -> A/p1   A/p0 -> B/p0   B/p0 -> A/p1   C/p0 -> A/p1
//! ```
//!
//! Every count below was worked out by hand from those links: A's crawl
//! fetches {A/p0, A/p1, B/p0*}, B's fetches {B/p0, A/p1*}, C's fetches
//! {C/p0, A/p1*} (* = stop copy), so grouping by URL gives in-link counts
//! A/p0: 1, A/p1: 3, B/p0: 2, C/p0: 1.

use std::collections::BTreeMap;

use hiersearch_core::webcorpus::{render_page, Corpus, CorpusSpec, PageSource, Site};

use crate::topology::{
    CorpusSource, Event, Expectation, RootSettings, ScriptedEvent, TopologyAggregator,
    TopologyLeaf, TopologySpec,
};

pub const SITE_A: &str = "hust.edu.cn";
pub const SITE_B: &str = "pku.edu.cn";
pub const SITE_C: &str = "mit.edu.us";

pub const A_P0: &str = "http://hust.edu.cn/p0.html";
pub const A_P1: &str = "http://hust.edu.cn/p1.html";
pub const B_P0: &str = "http://pku.edu.cn/p0.html";
pub const C_P0: &str = "http://mit.edu.us/p0.html";

/// Fixed page texts over the vocabulary {w0..w9}. A/p1 is the only page
/// containing w3 (once in its title, once in its body: keyword score 9).
pub fn corpus() -> Corpus {
    let page = |site: &str, title: &str, h1: &str, body: &str, links: &[(&str, &str)]| {
        let links: Vec<(String, String)> = links
            .iter()
            .map(|(href, text)| (href.to_string(), text.to_string()))
            .collect();
        PageSource {
            html_bytes: render_page(title, h1, body, &links).into_bytes(),
            site_name: site.to_string(),
        }
    };

    let sites = vec![
        Site {
            site_name: SITE_A.into(),
            domain: "edu.cn".into(),
            root_url: A_P0.into(),
        },
        Site {
            site_name: SITE_B.into(),
            domain: "edu.cn".into(),
            root_url: B_P0.into(),
        },
        Site {
            site_name: SITE_C.into(),
            domain: "edu.us".into(),
            root_url: C_P0.into(),
        },
    ];

    let pages = vec![
        (
            A_P0.to_string(),
            page(
                SITE_A,
                "w0 w1",
                "w2",
                "w0 w4 w5",
                &[("p1.html", "w6"), (B_P0, "w7")],
            ),
        ),
        (
            A_P1.to_string(),
            page(SITE_A, "w3 w8", "w2", "w3 w5 w9", &[]),
        ),
        (
            B_P0.to_string(),
            page(SITE_B, "w4 w5", "w6", "w0 w1", &[(A_P1, "w7")]),
        ),
        (
            C_P0.to_string(),
            page(SITE_C, "w8 w9", "w0", "w1 w2", &[(A_P1, "w5")]),
        ),
    ];

    Corpus::from_parts(
        CorpusSpec {
            seed: 0,
            domains: vec![],
            intra_link_prob: 0.0,
            cross_site_link_prob: 0.0,
            cross_domain_link_prob: 0.0,
            vocab_size: 10,
            words_per_page: 3,
        },
        sites,
        pages,
    )
}

/// Hand-enumerated in-link counts with every site crawled.
pub fn expected_overlap() -> BTreeMap<String, u64> {
    BTreeMap::from([
        (A_P0.to_string(), 1),
        (A_P1.to_string(), 3),
        (B_P0.to_string(), 2),
        (C_P0.to_string(), 1),
    ])
}

/// One leaf per site, one aggregator per domain, a root over both.
pub fn topology() -> TopologySpec {
    let leaf = |name: &str, domain: &str, root: &str| TopologyLeaf {
        name: name.into(),
        domain: domain.into(),
        site_roots: vec![root.into()],
        export_page_size: 500,
    };
    TopologySpec {
        corpus: CorpusSource::Tiny3,
        leaves: vec![
            leaf("hust", SITE_A, A_P0),
            leaf("pku", SITE_B, B_P0),
            leaf("mit", SITE_C, C_P0),
        ],
        aggregators: vec![
            TopologyAggregator {
                name: "edu.cn".into(),
                domain: "edu.cn".into(),
                leaves: vec!["hust".into(), "pku".into()],
            },
            TopologyAggregator {
                name: "edu.us".into(),
                domain: "edu.us".into(),
                leaves: vec!["mit".into()],
            },
        ],
        root: RootSettings::default(),
        events: standard_script(),
    }
}

/// Crawl, harvest, check overlap and ranking against the oracles, then pin
/// the full w5 ranking explicitly.
pub fn standard_script() -> Vec<ScriptedEvent> {
    vec![
        ScriptedEvent {
            step: 1,
            event: Event::Refresh { leaf: None },
        },
        ScriptedEvent {
            step: 2,
            event: Event::Harvest { aggregator: None },
        },
        ScriptedEvent {
            step: 3,
            event: Event::AssertOverlap,
        },
        ScriptedEvent {
            step: 4,
            event: Event::AssertSearchMatchesOracle { q: "w5".into() },
        },
        ScriptedEvent {
            step: 5,
            event: Event::Query {
                q: "w5".into(),
                limit: 10,
                exhaustive: true,
                expect: Some(Expectation {
                    partial: Some(false),
                    urls: Some(vec![
                        A_P1.into(),
                        B_P0.into(),
                        A_P0.into(),
                        C_P0.into(),
                    ]),
                    scores: Some(BTreeMap::from([
                        (A_P1.to_string(), 3),
                        (B_P0.to_string(), 2),
                        (A_P0.to_string(), 1),
                        (C_P0.to_string(), 1),
                    ])),
                    failed_sources: Some(vec![]),
                }),
            },
        },
    ]
}
