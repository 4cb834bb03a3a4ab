//! In-process fetchers for aggregator tests: sources are plain feeds, and a
//! pushed `q` parameter is honored the way a real provider would honor it.

use std::cell::Cell;

use feedql::aggregate::{FetchError, Fetcher};
use feedql::atom::Feed;
use feedql::eval::{filter_feed, EvalContext};
use feedql::query::parse_filter;

/// Serves fixed feeds keyed by origin. An empty parameter list is a plain
/// fetch; a `q` parameter is parsed and applied as a filter.
pub struct StaticFetcher {
    pub sources: Vec<(String, Feed)>,
}

impl StaticFetcher {
    pub fn new(sources: Vec<(String, Feed)>) -> Self {
        StaticFetcher { sources }
    }
}

impl Fetcher for StaticFetcher {
    fn fetch(&self, origin: &str, params: &[(String, String)]) -> Result<Feed, FetchError> {
        let feed = self
            .sources
            .iter()
            .find(|(o, _)| o == origin)
            .map(|(_, f)| f)
            .ok_or_else(|| FetchError(format!("unknown origin {origin}")))?;
        let q = params.iter().find(|(k, _)| k == "q").map(|(_, v)| v.as_str());
        match q {
            Some(text) => {
                let filter =
                    parse_filter(text).map_err(|e| FetchError(format!("bad pushed filter: {e}")))?;
                Ok(filter_feed(&filter, feed, &EvalContext::new()))
            }
            None => Ok(feed.clone()),
        }
    }
}

/// Counts entries transferred by the wrapped fetcher.
pub struct CountingFetcher<'a> {
    pub inner: &'a dyn Fetcher,
    pub transferred: Cell<usize>,
    pub fetches: Cell<usize>,
}

impl<'a> CountingFetcher<'a> {
    pub fn new(inner: &'a dyn Fetcher) -> Self {
        CountingFetcher { inner, transferred: Cell::new(0), fetches: Cell::new(0) }
    }
}

impl Fetcher for CountingFetcher<'_> {
    fn fetch(&self, origin: &str, params: &[(String, String)]) -> Result<Feed, FetchError> {
        let feed = self.inner.fetch(origin, params)?;
        self.transferred.set(self.transferred.get() + feed.entries.len());
        self.fetches.set(self.fetches.get() + 1);
        Ok(feed)
    }
}

/// Fails fetches for the listed origins, delegating the rest.
pub struct FailingFetcher<'a> {
    pub inner: &'a dyn Fetcher,
    pub dead: Vec<String>,
}

impl Fetcher for FailingFetcher<'_> {
    fn fetch(&self, origin: &str, params: &[(String, String)]) -> Result<Feed, FetchError> {
        if self.dead.iter().any(|o| o == origin) {
            return Err(FetchError("connection refused".into()));
        }
        self.inner.fetch(origin, params)
    }
}
