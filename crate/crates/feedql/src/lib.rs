//! feedql — a query-enabled Atom feed engine.
//!
//! Feeds are treated as serializations of query results over a collection.
//! This crate provides the pieces needed to build providers, intermediaries,
//! and consumers around that idea:
//!
//! - [`atom`]: parse, validate, and serialize Atom feeds including GeoRSS
//!   Simple shapes and feedset origin annotations.
//! - [`query`]: the FIQL-style filter language, cross-entry functions,
//!   shaping parameters, and capability validation.
//! - [`eval`]: single-feed query evaluation (filter, window, cluster, shaping).
//! - [`collection`]: collection storage with paged and archived feeds and
//!   collection-scoped (hidden field) queries.
//! - [`aggregate`]: feedsets with per-entry origins, query pushdown planning,
//!   and cross-feed co-occurrence joins.
//! - [`capabilities`]: capability documents and in-feed discovery links.

pub mod aggregate;
pub mod atom;
pub mod capabilities;
pub mod collection;
pub mod eval;
pub mod geo;
pub mod query;
