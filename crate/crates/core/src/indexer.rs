//! From fetched pages to scored-keyword metadata records and an inverted
//! index.
//!
//! A page is described by its keywords, each with an integer score weighted
//! by where the term appears: 8 per title occurrence, 4 per h1 occurrence,
//! 1 per body occurrence. h1 text is body text too (one rendered-text pass
//! plus field captures), so a term appearing once in an h1 scores 4 + 1.
//! Only the top [`MAX_KEYWORDS`] keywords are kept per record.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crawler::FetchedPage;

pub const MAX_KEYWORDS: usize = 64;

pub const TITLE_WEIGHT: u32 = 8;
pub const H1_WEIGHT: u32 = 4;
pub const BODY_WEIGHT: u32 = 1;

/// Identity of one record: the page URL plus the site whose crawl fetched it.
pub type RecordKey = (String, String);

/// Tokenized view of one page.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TokenizedDoc {
    pub url: String,
    pub title_terms: Vec<String>,
    pub h1_terms: Vec<String>,
    pub body_terms: Vec<String>,
    pub raw_title: String,
    pub encoding: String,
    pub abstract_text: String,
}

/// The harvestable description of one page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub url: String,
    pub title: String,
    pub encoding: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub origin_site: String,
    pub version: u64,
    pub deleted: bool,
    pub keywords: Vec<(String, u32)>,
}

impl MetadataRecord {
    pub fn key(&self) -> RecordKey {
        (self.url.clone(), self.origin_site.clone())
    }

    /// Equality of everything except the version; refresh uses this to
    /// decide whether a record needs re-versioning.
    pub fn same_content(&self, other: &MetadataRecord) -> bool {
        self.url == other.url
            && self.title == other.title
            && self.encoding == other.encoding
            && self.abstract_text == other.abstract_text
            && self.origin_site == other.origin_site
            && self.deleted == other.deleted
            && self.keywords == other.keywords
    }

    /// Deletion marker for a vanished record. Carries no content.
    pub fn tombstone(url: String, origin_site: String, version: u64) -> Self {
        MetadataRecord {
            url,
            title: String::new(),
            encoding: String::new(),
            abstract_text: String::new(),
            origin_site,
            version,
            deleted: true,
            keywords: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Posting {
    pub url: String,
    pub origin_site: String,
    pub score: u32,
}

/// Inverted index over the live records of one leaf.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LeafIndex {
    pub postings: BTreeMap<String, Vec<Posting>>,
    pub records: BTreeMap<RecordKey, MetadataRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("empty query")]
    EmptyQuery,
    #[error("invalid limit")]
    InvalidLimit,
}

/// One ranked answer from a leaf index. Near-duplicates of the same URL with
/// different origin sites are distinct hits at this level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchHit {
    pub url: String,
    pub origin_site: String,
    pub score: u64,
    pub title: String,
    pub abstract_text: String,
}

/// Lowercase maximal runs of ASCII letters and digits.
pub fn terms_of(text: &str) -> Vec<String> {
    let mut terms = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_ascii_alphanumeric() {
            current.push(c.to_ascii_lowercase());
        } else if !current.is_empty() {
            terms.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        terms.push(current);
    }
    terms
}

#[derive(Debug, Default)]
struct ExtractedText {
    title: String,
    h1: String,
    body: String,
    encoding: Option<String>,
}

/// Minimal scan of the corpus HTML subset. Tracks only `<head>`, `<title>`
/// and `<h1>`; every other tag is skipped with its text kept as body text.
/// Anything before the first tag is treated as a non-HTML preamble and
/// ignored, so plain garbage yields empty fields instead of failing.
fn extract_text(html: &[u8]) -> ExtractedText {
    let text = String::from_utf8_lossy(html);
    let mut out = ExtractedText::default();

    let Some(first_tag) = text.find('<') else {
        return out;
    };
    let mut rest = &text[first_tag..];
    let mut in_head = 0u32;
    let mut in_title = 0u32;
    let mut in_h1 = 0u32;

    loop {
        debug_assert!(rest.starts_with('<'));
        if let Some(comment) = rest.strip_prefix("<!--") {
            rest = match comment.find("-->") {
                Some(end) => &comment[end + 3..],
                None => "",
            };
        } else {
            let Some(close) = rest.find('>') else { break };
            let tag = &rest[1..close];
            rest = &rest[close + 1..];

            let closing = tag.starts_with('/');
            let name: String = tag
                .trim_start_matches('/')
                .chars()
                .take_while(|c| c.is_ascii_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect();
            let depth = match name.as_str() {
                "head" => Some(&mut in_head),
                "title" => Some(&mut in_title),
                "h1" => Some(&mut in_h1),
                _ => None,
            };
            if let Some(depth) = depth {
                if closing {
                    *depth = depth.saturating_sub(1);
                } else {
                    *depth += 1;
                }
            }
            if name == "meta" && out.encoding.is_none() {
                out.encoding = charset_of(tag);
            }
        }

        // Tag boundaries separate text nodes.
        if in_title > 0 {
            out.title.push(' ');
        } else if in_head == 0 {
            out.body.push(' ');
            if in_h1 > 0 {
                out.h1.push(' ');
            }
        }

        let chunk_end = rest.find('<').unwrap_or(rest.len());
        let chunk = &rest[..chunk_end];
        if in_title > 0 {
            out.title.push_str(chunk);
        } else if in_head == 0 {
            out.body.push_str(chunk);
            if in_h1 > 0 {
                out.h1.push_str(chunk);
            }
        }
        if chunk_end == rest.len() {
            break;
        }
        rest = &rest[chunk_end..];
    }
    out
}

fn charset_of(tag: &str) -> Option<String> {
    let lower = tag.to_ascii_lowercase();
    let at = lower.find("charset=")? + "charset=".len();
    let value = lower[at..].trim_start_matches(['"', '\'']);
    let end = value
        .find(|c: char| c == '"' || c == '\'' || c == ';' || c == '/' || c.is_whitespace())
        .unwrap_or(value.len());
    let charset = value[..end].trim();
    (!charset.is_empty()).then(|| charset.to_string())
}

fn collapse_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Tokenize one fetched page. Never fails; garbage input produces a doc with
/// empty fields.
pub fn tokenize(page: &FetchedPage) -> TokenizedDoc {
    let extracted = extract_text(&page.html_bytes);
    let body_text = collapse_ws(&extracted.body);
    TokenizedDoc {
        url: page.url.clone(),
        title_terms: terms_of(&extracted.title),
        h1_terms: terms_of(&extracted.h1),
        body_terms: terms_of(&extracted.body),
        raw_title: collapse_ws(&extracted.title),
        encoding: extracted.encoding.unwrap_or_else(|| "utf-8".to_string()),
        abstract_text: body_text.chars().take(160).collect(),
    }
}

/// Position-and-frequency keyword scores: 8·tf_title + 4·tf_h1 + 1·tf_body,
/// top 64 by (score desc, term asc), zero scores dropped.
pub fn score_keywords(doc: &TokenizedDoc) -> Vec<(String, u32)> {
    let mut scores: BTreeMap<&str, u32> = BTreeMap::new();
    for (terms, weight) in [
        (&doc.title_terms, TITLE_WEIGHT),
        (&doc.h1_terms, H1_WEIGHT),
        (&doc.body_terms, BODY_WEIGHT),
    ] {
        for term in terms {
            *scores.entry(term).or_insert(0) += weight;
        }
    }
    let mut keywords: Vec<(String, u32)> = scores
        .into_iter()
        .filter(|&(_, score)| score > 0)
        .map(|(term, score)| (term.to_string(), score))
        .collect();
    keywords.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    keywords.truncate(MAX_KEYWORDS);
    keywords
}

/// Metadata for one page, version left at 0 for the caller to assign.
pub fn record_content(page: &FetchedPage) -> MetadataRecord {
    let doc = tokenize(page);
    let keywords = score_keywords(&doc);
    MetadataRecord {
        url: page.url.clone(),
        title: doc.raw_title,
        encoding: doc.encoding,
        abstract_text: doc.abstract_text,
        origin_site: page.origin_site.clone(),
        version: 0,
        deleted: false,
        keywords,
    }
}

/// One unversioned record per (url, origin_site); on duplicates the later
/// page in the input wins.
pub fn records_from_pages(pages: &[FetchedPage]) -> BTreeMap<RecordKey, MetadataRecord> {
    let mut records = BTreeMap::new();
    for page in pages {
        let record = record_content(page);
        records.insert(record.key(), record);
    }
    records
}

impl LeafIndex {
    /// Build the postings side from a record set. Tombstones get no postings.
    pub fn from_records(records: BTreeMap<RecordKey, MetadataRecord>) -> LeafIndex {
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        for record in records.values() {
            if record.deleted {
                continue;
            }
            for (term, score) in &record.keywords {
                postings.entry(term.clone()).or_default().push(Posting {
                    url: record.url.clone(),
                    origin_site: record.origin_site.clone(),
                    score: *score,
                });
            }
        }
        for list in postings.values_mut() {
            list.sort_by(|a, b| {
                b.score
                    .cmp(&a.score)
                    .then_with(|| a.url.cmp(&b.url))
                    .then_with(|| a.origin_site.cmp(&b.origin_site))
            });
        }
        LeafIndex { postings, records }
    }

    pub fn live_record_count(&self) -> usize {
        self.records.values().filter(|r| !r.deleted).count()
    }
}

/// Index a batch of pages, assigning versions 1..n in record-key order.
pub fn build_index(pages: &[FetchedPage]) -> LeafIndex {
    let mut records = records_from_pages(pages);
    let mut version = 0;
    for record in records.values_mut() {
        version += 1;
        record.version = version;
    }
    LeafIndex::from_records(records)
}

/// Conjunctive search: a record qualifies iff every distinct query term is
/// among its keywords; its score is the sum of those keyword scores. Results
/// are ordered (score desc, url asc, origin asc) and both replicas of a URL
/// appear — deduplication is the caller's business.
pub fn search_index(
    index: &LeafIndex,
    query: &[String],
    limit: usize,
) -> Result<Vec<SearchHit>, QueryError> {
    if limit < 1 {
        return Err(QueryError::InvalidLimit);
    }
    // Distinct terms: repeating a query term neither changes the match set
    // nor double-counts its score.
    let terms: BTreeSet<String> = query.iter().flat_map(|t| terms_of(t)).collect();
    if terms.is_empty() {
        return Err(QueryError::EmptyQuery);
    }

    let mut lists: Vec<&[Posting]> = Vec::with_capacity(terms.len());
    for term in &terms {
        match index.postings.get(term) {
            Some(list) => lists.push(list),
            None => return Ok(Vec::new()),
        }
    }
    lists.sort_by_key(|l| l.len());

    let mut scores: HashMap<(&str, &str), u64> = lists[0]
        .iter()
        .map(|p| ((p.url.as_str(), p.origin_site.as_str()), u64::from(p.score)))
        .collect();
    for list in &lists[1..] {
        let term_scores: HashMap<(&str, &str), u64> = list
            .iter()
            .map(|p| ((p.url.as_str(), p.origin_site.as_str()), u64::from(p.score)))
            .collect();
        scores.retain(|key, _| term_scores.contains_key(key));
        if scores.is_empty() {
            return Ok(Vec::new());
        }
        for (key, score) in scores.iter_mut() {
            *score += term_scores[key];
        }
    }

    let mut hits: Vec<SearchHit> = scores
        .into_iter()
        .map(|((url, origin), score)| {
            let record = &index.records[&(url.to_string(), origin.to_string())];
            SearchHit {
                url: record.url.clone(),
                origin_site: record.origin_site.clone(),
                score,
                title: record.title.clone(),
                abstract_text: record.abstract_text.clone(),
            }
        })
        .collect();
    hits.sort_by(|a, b| {
        b.score
            .cmp(&a.score)
            .then_with(|| a.url.cmp(&b.url))
            .then_with(|| a.origin_site.cmp(&b.origin_site))
    });
    hits.truncate(limit);
    Ok(hits)
}

/// Persisted form: the records alone, in canonical key order. Postings are
/// derived state and get rebuilt on load, so a load/save cycle reproduces
/// the file byte for byte.
#[derive(Debug, Serialize, Deserialize)]
struct IndexFile {
    records: Vec<MetadataRecord>,
}

#[derive(Debug, Error)]
pub enum IndexIoError {
    #[error("index io: {0}")]
    Io(#[from] std::io::Error),
    #[error("index json: {0}")]
    Json(#[from] serde_json::Error),
}

pub fn save_index(index: &LeafIndex, path: &Path) -> Result<(), IndexIoError> {
    let file = IndexFile {
        records: index.records.values().cloned().collect(),
    };
    fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<LeafIndex, IndexIoError> {
    let file: IndexFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    let records = file.records.into_iter().map(|r| (r.key(), r)).collect();
    Ok(LeafIndex::from_records(records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn page(url: &str, origin: &str, html: &str) -> FetchedPage {
        FetchedPage {
            url: url.to_string(),
            html_bytes: html.as_bytes().to_vec(),
            origin_site: origin.to_string(),
            is_stop_url: false,
            fetch_seq: 0,
        }
    }

    fn doc(html: &str) -> TokenizedDoc {
        tokenize(&page("http://a.edu.cn/p0.html", "a.edu.cn", html))
    }

    #[test]
    fn tokenize_splits_fields_and_keeps_h1_in_body() {
        let d = doc("<title>Rust Lab</title><body><h1>News</h1><p>hello world</p></body>");
        assert_eq!(d.title_terms, vec!["rust", "lab"]);
        assert_eq!(d.h1_terms, vec!["news"]);
        assert_eq!(d.body_terms, vec!["news", "hello", "world"]);
        assert_eq!(d.raw_title, "Rust Lab");
        assert_eq!(d.encoding, "utf-8");
        assert_eq!(d.abstract_text, "News hello world");
    }

    #[test]
    fn tokenize_empty_and_garbage_yield_empty_fields() {
        for bytes in ["", "no markup at all", "\u{fffd}\u{fffd}"] {
            let d = doc(bytes);
            assert!(d.title_terms.is_empty());
            assert!(d.body_terms.is_empty());
            assert_eq!(d.abstract_text, "");
        }
    }

    #[test]
    fn tokenize_reads_declared_charset() {
        let d = doc("<html><head><meta charset=\"gbk\"><title>t</title></head><body>x</body></html>");
        assert_eq!(d.encoding, "gbk");
        let d = doc(
            "<head><meta http-equiv=\"Content-Type\" content=\"text/html; charset=GB2312\"></head><body>x</body>",
        );
        assert_eq!(d.encoding, "gb2312");
    }

    #[test]
    fn tokenize_abstract_is_first_160_chars() {
        let long_body: String = (0..100).map(|i| format!("w{i} ")).collect();
        let d = doc(&format!("<body><p>{long_body}</p></body>"));
        assert_eq!(d.abstract_text.chars().count(), 160);
        assert!(collapse_ws(&long_body).starts_with(&d.abstract_text));
    }

    #[test]
    fn score_title_only_term_is_8() {
        let d = doc("<title>alpha</title><body><p>other words</p></body>");
        let scores = score_keywords(&d);
        assert!(scores.contains(&("alpha".to_string(), 8)));
    }

    #[test]
    fn score_h1_term_is_5_via_body_overlap() {
        let d = doc("<title>t</title><body><h1>alpha</h1></body>");
        let scores = score_keywords(&d);
        assert!(scores.contains(&("alpha".to_string(), H1_WEIGHT + BODY_WEIGHT)));
    }

    #[test]
    fn score_keeps_lexicographically_smallest_64_on_uniform_tie() {
        let body: String = (10..80).map(|i| format!("t{i} ")).collect();
        let d = doc(&format!("<body><p>{body}</p></body>"));
        let scores = score_keywords(&d);
        assert_eq!(scores.len(), MAX_KEYWORDS);
        // Oracle: enumerate all 70 distinct terms, sort by the stated
        // tie-break, keep 64.
        let mut expected: Vec<String> = (10..80).map(|i| format!("t{i}")).collect();
        expected.sort();
        expected.truncate(MAX_KEYWORDS);
        let got: Vec<String> = scores.iter().map(|(t, _)| t.clone()).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn build_index_postings_match_records() {
        let pages = vec![
            page("http://a.edu.cn/p0.html", "a.edu.cn", "<title>x y</title><body><p>z</p></body>"),
            page("http://a.edu.cn/p1.html", "a.edu.cn", "<title>y</title><body><p>x x</p></body>"),
        ];
        let index = build_index(&pages);
        assert_eq!(index.records.len(), 2);
        for record in index.records.values() {
            for (term, score) in &record.keywords {
                let list = &index.postings[term];
                assert!(list
                    .iter()
                    .any(|p| p.url == record.url && p.origin_site == record.origin_site && p.score == *score));
            }
        }
        for (term, list) in &index.postings {
            for posting in list {
                let record = &index.records[&(posting.url.clone(), posting.origin_site.clone())];
                assert!(record.keywords.iter().any(|(t, s)| t == term && *s == posting.score));
            }
        }
    }

    #[test]
    fn build_index_empty_input_and_last_writer_rule() {
        assert!(build_index(&[]).records.is_empty());

        let mut first = page("http://a.edu.cn/p0.html", "a.edu.cn", "<title>old</title><body><p>x</p></body>");
        first.fetch_seq = 0;
        let mut second = page("http://a.edu.cn/p0.html", "a.edu.cn", "<title>new</title><body><p>x</p></body>");
        second.fetch_seq = 1;
        let index = build_index(&[first, second]);
        assert_eq!(index.records.len(), 1);
        assert_eq!(index.records.values().next().unwrap().title, "new");
    }

    #[test]
    fn search_is_conjunctive_with_stated_order() {
        let pages = vec![
            page("http://a.edu.cn/p0.html", "a.edu.cn", "<title>w3</title><body><p>w5</p></body>"),
            page("http://a.edu.cn/p1.html", "a.edu.cn", "<title>w3 w5</title><body><p></p></body>"),
            page("http://a.edu.cn/p2.html", "a.edu.cn", "<title></title><body><p>w5</p></body>"),
        ];
        let index = build_index(&pages);

        let hits = search_index(&index, &["w3".into(), "w5".into()], 10).unwrap();
        assert_eq!(
            hits.iter().map(|h| h.url.as_str()).collect::<Vec<_>>(),
            vec!["http://a.edu.cn/p1.html", "http://a.edu.cn/p0.html"]
        );
        assert_eq!(hits[0].score, 16);
        assert_eq!(hits[1].score, 9);

        // Conjunctive: a term matching nothing empties the result.
        assert!(search_index(&index, &["w3".into(), "zzz".into()], 10).unwrap().is_empty());

        // Equal scores order url-asc.
        let hits = search_index(&index, &["w5".into()], 10).unwrap();
        assert_eq!(hits[1].url, "http://a.edu.cn/p0.html");
        assert_eq!(hits[2].url, "http://a.edu.cn/p2.html");
        assert_eq!(hits[1].score, hits[2].score);
    }

    #[test]
    fn search_rejects_empty_query_and_bad_limit() {
        let index = build_index(&[]);
        assert_eq!(search_index(&index, &[], 5), Err(QueryError::EmptyQuery));
        assert_eq!(
            search_index(&index, &["???".into()], 5),
            Err(QueryError::EmptyQuery)
        );
        assert_eq!(
            search_index(&index, &["x".into()], 0),
            Err(QueryError::InvalidLimit)
        );
    }

    #[test]
    fn duplicate_query_terms_count_once() {
        let pages = vec![page(
            "http://a.edu.cn/p0.html",
            "a.edu.cn",
            "<title>w3</title><body><p>w3</p></body>",
        )];
        let index = build_index(&pages);
        let once = search_index(&index, &["w3".into()], 10).unwrap();
        let twice = search_index(&index, &["w3".into(), "w3".into()], 10).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once[0].score, 9);
    }

    #[test]
    fn index_file_round_trips_byte_identically() {
        let pages = vec![
            page("http://a.edu.cn/p0.html", "a.edu.cn", "<title>x</title><body><p>y z</p></body>"),
            page("http://b.edu.cn/p0.html", "b.edu.cn", "<title>q</title><body><p>r</p></body>"),
        ];
        let index = build_index(&pages);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.json");
        save_index(&index, &path).unwrap();
        let bytes_first = fs::read(&path).unwrap();

        let loaded = load_index(&path).unwrap();
        assert_eq!(loaded, index);
        save_index(&loaded, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), bytes_first);
    }

    #[test]
    fn record_json_keys_are_stable() {
        let record = MetadataRecord {
            url: "http://a.edu.cn/p0.html".into(),
            title: "t".into(),
            encoding: "utf-8".into(),
            abstract_text: "a".into(),
            origin_site: "a.edu.cn".into(),
            version: 3,
            deleted: false,
            keywords: vec![("w1".into(), 9)],
        };
        let json = serde_json::to_string(&record).unwrap();
        assert_eq!(
            json,
            "{\"url\":\"http://a.edu.cn/p0.html\",\"title\":\"t\",\"encoding\":\"utf-8\",\
             \"abstract\":\"a\",\"origin_site\":\"a.edu.cn\",\"version\":3,\"deleted\":false,\
             \"keywords\":[[\"w1\",9]]}"
        );
    }
}
