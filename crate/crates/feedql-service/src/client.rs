//! Blocking HTTP client: plain GETs, feed and capability fetching, and the
//! [`Fetcher`] implementation the aggregating endpoints and the CLI use.

use feedql::aggregate::{FetchError, Fetcher};
use feedql::atom::{parse_feed, AtomError, Feed};
use feedql::capabilities::{discover_from_feed, parse_capabilities, Capabilities, CapsError};
use thiserror::Error;
use url::Url;

use crate::KEY_HEADER;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}")]
    Status { status: u16, body: String },
    #[error(transparent)]
    Atom(#[from] AtomError),
    #[error(transparent)]
    Caps(#[from] CapsError),
    #[error("bad URL: {0}")]
    Url(String),
}

pub struct HttpResponse {
    pub status: u16,
    pub body: String,
    pub etag: Option<String>,
    pub cache_control: Option<String>,
}

/// A blocking client. When a key is set it is sent on every request; open
/// endpoints ignore it.
pub struct HttpClient {
    inner: reqwest::blocking::Client,
    key: Option<String>,
}

impl HttpClient {
    pub fn new(key: Option<String>) -> Self {
        let inner = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(15))
            .build()
            .expect("client construction cannot fail with these options");
        HttpClient { inner, key }
    }

    pub fn get(&self, url: &str) -> Result<HttpResponse, ClientError> {
        self.get_with_etag(url, None)
    }

    pub fn get_with_etag(&self, url: &str, if_none_match: Option<&str>) -> Result<HttpResponse, ClientError> {
        let mut request = self.inner.get(url);
        if let Some(key) = &self.key {
            request = request.header(KEY_HEADER, key);
        }
        if let Some(etag) = if_none_match {
            request = request.header("if-none-match", etag);
        }
        let response = request.send().map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let header = |name: &str| {
            response.headers().get(name).and_then(|v| v.to_str().ok()).map(str::to_string)
        };
        let etag = header("etag");
        let cache_control = header("cache-control");
        let body = response.text().map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(HttpResponse { status, body, etag, cache_control })
    }

    /// GET a URL and parse the body as an Atom feed. Non-2xx is an error.
    pub fn fetch_feed(&self, url: &str) -> Result<Feed, ClientError> {
        let response = self.get(url)?;
        if !(200..300).contains(&response.status) {
            return Err(ClientError::Status { status: response.status, body: response.body });
        }
        Ok(parse_feed(&response.body)?)
    }

    /// Follows a feed's capability link, if present, and parses the
    /// document. Relative link hrefs resolve against the feed's URL.
    pub fn fetch_capabilities(
        &self,
        feed_url: &str,
        feed: &Feed,
    ) -> Result<Option<(String, Capabilities)>, ClientError> {
        let Some(href) = discover_from_feed(feed) else {
            return Ok(None);
        };
        let caps_url = resolve(feed_url, href)?;
        let response = self.get(&caps_url)?;
        if !(200..300).contains(&response.status) {
            return Err(ClientError::Status { status: response.status, body: response.body });
        }
        Ok(Some((caps_url, parse_capabilities(&response.body)?)))
    }
}

/// Resolves a possibly relative href against a base URL.
pub fn resolve(base: &str, href: &str) -> Result<String, ClientError> {
    let base = Url::parse(base).map_err(|e| ClientError::Url(format!("{base:?}: {e}")))?;
    let joined = base.join(href).map_err(|e| ClientError::Url(format!("{href:?}: {e}")))?;
    Ok(joined.to_string())
}

/// Builds the query-endpoint URL for an origin feed URL.
pub fn query_url(origin: &str, params: &[(String, String)]) -> String {
    let mut serializer = url::form_urlencoded::Serializer::new(String::new());
    for (name, value) in params {
        serializer.append_pair(name, value);
    }
    format!("{origin}/query?{}", serializer.finish())
}

impl Fetcher for HttpClient {
    fn fetch(&self, origin: &str, params: &[(String, String)]) -> Result<Feed, FetchError> {
        let url = if params.is_empty() { origin.to_string() } else { query_url(origin, params) };
        self.fetch_feed(&url).map_err(|e| FetchError(e.to_string()))
    }
}
