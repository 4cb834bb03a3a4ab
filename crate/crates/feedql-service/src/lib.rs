//! The feedql HTTP service and its blocking client.
//!
//! The service realizes a two-tier access scheme: plain feeds (current,
//! paged, archived) are publicly cacheable with strong ETags and honor no
//! query parameters, while the per-collection query endpoint and the
//! feedset endpoint are optionally API-keyed and marked private. Capability
//! documents are served per collection and linked from every feed.
//!
//! Routes:
//!
//! ```text
//! GET /feeds/{name}               plain feed, ?page=N for RFC 5005 pages
//! GET /feeds/{name}/archive/{i}   archived feed i
//! GET /feeds/{name}/query         query endpoint (q, xq, sort-by, ...)
//! GET /feeds/{name}/capabilities  capability document
//! GET /feedsets/{name}/query      aggregating query endpoint
//! ```

pub mod client;
pub mod config;
mod service;

pub use service::{router, RunningService, ServiceError, ServiceState};

/// Header carrying the API key for keyed tiers.
pub const KEY_HEADER: &str = "x-feedql-key";
