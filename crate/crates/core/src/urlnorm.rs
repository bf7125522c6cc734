//! URL identity used across the whole stack.
//!
//! A page has exactly one normalized URL: lowercase host, no fragment,
//! relative hrefs resolved against the page they appear on. Overlap counting
//! depends on every layer agreeing on this identity.

use url::Url;

/// Normalize an absolute URL string. Lowercases the host (done by the parser)
/// and strips any fragment.
pub fn normalize(raw: &str) -> Result<String, url::ParseError> {
    let mut parsed = Url::parse(raw)?;
    parsed.set_fragment(None);
    Ok(parsed.to_string())
}

/// Resolve `href` against the page URL `base`, then normalize.
pub fn resolve(base: &str, href: &str) -> Result<String, url::ParseError> {
    let base = Url::parse(base)?;
    let mut joined = base.join(href)?;
    joined.set_fragment(None);
    Ok(joined.to_string())
}

/// Host component of a normalized URL, if any.
pub fn host_of(url: &str) -> Option<String> {
    Url::parse(url).ok()?.host_str().map(str::to_string)
}
