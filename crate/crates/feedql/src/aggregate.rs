//! Feedsets and distributed query execution. An aggregated feed (feedset)
//! annotates every entry with its origin; queries against a feedset are
//! planned so that entry-scoped filter conjuncts run as far upstream as the
//! source's capabilities allow, while the aggregator re-applies the complete
//! filter and evaluates everything a single source cannot: cross-feed
//! cooccur joins, cross-entry functions over the merged set, and shaping.
//!
//! Because the residual re-applies the full filter, correctness never
//! depends on a source honoring (or even understanding) its pushed filter;
//! pushdown only reduces transfer volume.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::atom::{Entry, Feed, Timestamp};
use crate::capabilities::Capabilities;
use crate::eval::{self, entry_timestamp, EvalContext};
use crate::geo::haversine_km;
use crate::query::{self, CrossEntryFn, FilterExpr, Query};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AggregateError {
    #[error("duplicate origin {0}")]
    DuplicateOrigin(String),
    #[error("source {origin} unavailable: {reason}")]
    SourceUnavailable { origin: String, reason: String },
    #[error("unknown origin {0}")]
    UnknownOrigin(String),
}

/// A feed aggregated from several sources; every entry carries its origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Feedset {
    pub feed: Feed,
    pub sources: Vec<(String, Option<Capabilities>)>,
}

impl Feedset {
    pub fn has_origin(&self, origin: &str) -> bool {
        self.sources.iter().any(|(o, _)| o == origin)
    }
}

/// Base URI under which feedset ids are minted.
pub const FEEDSET_ID_BASE: &str = "http://ns.feedql.dev/feedset/";

/// Merges source feeds into a feedset. Within one origin, duplicate entry
/// ids keep the larger updated (first encountered on a tie); across origins
/// the same id is kept separately per origin. Output order is sources order,
/// then source-internal order.
pub fn aggregate(sources: &[(String, Feed)]) -> Result<Feedset, AggregateError> {
    for (i, (origin, _)) in sources.iter().enumerate() {
        if sources[..i].iter().any(|(o, _)| o == origin) {
            return Err(AggregateError::DuplicateOrigin(origin.clone()));
        }
    }

    let mut entries: Vec<Entry> = Vec::new();
    for (origin, feed) in sources {
        let start = entries.len();
        for entry in &feed.entries {
            let mut entry = entry.clone();
            entry.origin = Some(origin.clone());
            match entries[start..].iter().position(|e| e.id == entry.id) {
                Some(offset) => {
                    let slot = &mut entries[start + offset];
                    if entry.updated > slot.updated {
                        *slot = entry;
                    }
                }
                None => entries.push(entry),
            }
        }
    }

    let updated = entries.iter().map(|e| e.updated).max().unwrap_or_else(Timestamp::epoch);
    let mut feed = Feed::new(
        feedset_id(sources.iter().map(|(o, _)| o.as_str())),
        format!("Feedset of {} sources", sources.len()),
        updated,
    );
    feed.entries = entries;
    Ok(Feedset {
        feed,
        sources: sources.iter().map(|(o, _)| (o.clone(), None)).collect(),
    })
}

/// A deterministic feedset id: base URI plus a digest of the sorted origins.
pub fn feedset_id<'a>(origins: impl Iterator<Item = &'a str>) -> String {
    let mut sorted: Vec<&str> = origins.collect();
    sorted.sort_unstable();
    let digest = Sha256::digest(sorted.join("\n").as_bytes());
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    format!("{FEEDSET_ID_BASE}{hex}")
}

/// One source's share of a plan: the filter fragment pushed upstream, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedSource {
    pub origin: String,
    pub pushed: Option<FilterExpr>,
}

impl PlannedSource {
    /// The query parameters sent to this source; empty means a plain fetch.
    pub fn params(&self) -> Vec<(String, String)> {
        match &self.pushed {
            Some(filter) => {
                vec![("q".to_string(), query::serialize_query(&Query {
                    filter: Some(filter.clone()),
                    ..Query::default()
                })[0].1.clone())]
            }
            None => Vec::new(),
        }
    }
}

/// A distributed execution plan: per-source pushed filters plus the residual
/// query the aggregator evaluates over the merged feedset. The residual
/// always contains the complete original query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryPlan {
    pub per_source: Vec<PlannedSource>,
    pub residual: Query,
}

impl QueryPlan {
    pub fn pushed_conjunct_count(&self) -> usize {
        self.per_source
            .iter()
            .map(|s| match &s.pushed {
                Some(FilterExpr::And(children)) => children.len(),
                Some(_) => 1,
                None => 0,
            })
            .sum()
    }
}

/// Decides what each source can evaluate. The filter's top-level conjunction
/// is decomposed; a conjunct goes to a source iff every selector and
/// operator in it (including inside disjunctions — an Or pushes only whole)
/// is within that source's capabilities. Sources with unknown capabilities
/// receive nothing. Cross-entry and cross-feed functions and shaping never
/// push: they are defined over the aggregated, filtered set.
pub fn plan_query(query: &Query, sources: &[(String, Option<Capabilities>)]) -> QueryPlan {
    let conjuncts: Vec<&FilterExpr> = match &query.filter {
        Some(FilterExpr::And(children)) => children.iter().collect(),
        Some(other) => vec![other],
        None => Vec::new(),
    };

    let per_source = sources
        .iter()
        .map(|(origin, caps)| {
            let pushed = caps.as_ref().and_then(|caps| {
                let supported: Vec<FilterExpr> = conjuncts
                    .iter()
                    .filter(|c| conjunct_supported(c, caps))
                    .map(|c| (*c).clone())
                    .collect();
                match supported.len() {
                    0 => None,
                    1 => Some(supported.into_iter().next().unwrap()),
                    _ => Some(FilterExpr::And(supported)),
                }
            });
            PlannedSource { origin: origin.clone(), pushed }
        })
        .collect();

    QueryPlan { per_source, residual: query.clone() }
}

fn conjunct_supported(conjunct: &FilterExpr, caps: &Capabilities) -> bool {
    conjunct.predicates().iter().all(|p| {
        caps.supports_selector(&p.selector.capability_name()) && caps.supports_operator(p.op.name())
    })
}

/// How a plan reaches its sources. `params` is the serialized pushed filter;
/// empty means a plain fetch of the origin.
pub trait Fetcher {
    fn fetch(&self, origin: &str, params: &[(String, String)]) -> Result<Feed, FetchError>;
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{0}")]
pub struct FetchError(pub String);

/// Fetches every planned source and evaluates the residual. Any fetch
/// failure fails the whole query: a feedset query has join semantics, and a
/// silent partial answer would be a wrong answer.
pub fn execute_plan(
    plan: &QueryPlan,
    fetcher: &dyn Fetcher,
    ctx: &EvalContext,
) -> Result<Feed, AggregateError> {
    let fetched = fetch_sources(plan, fetcher)?;
    evaluate_residual(&plan.residual, &fetched, ctx)
}

/// The fetch phase of [`execute_plan`], separated so callers can implement
/// their own failure policy (the CLI's `--partial` mode drops dead sources).
pub fn fetch_sources(
    plan: &QueryPlan,
    fetcher: &dyn Fetcher,
) -> Result<Vec<(String, Feed)>, AggregateError> {
    plan.per_source
        .iter()
        .map(|source| {
            fetcher
                .fetch(&source.origin, &source.params())
                .map(|feed| (source.origin.clone(), feed))
                .map_err(|e| AggregateError::SourceUnavailable {
                    origin: source.origin.clone(),
                    reason: e.0,
                })
        })
        .collect()
}

/// Aggregates fetched feeds and runs the residual query over the feedset:
/// the complete filter, then each cross-entry/cross-feed function in order,
/// then shaping. Origin annotations are preserved in the output.
pub fn evaluate_residual(
    residual: &Query,
    fetched: &[(String, Feed)],
    ctx: &EvalContext,
) -> Result<Feed, AggregateError> {
    let feedset = aggregate(fetched)?;
    let mut current = match &residual.filter {
        Some(filter) => eval::filter_feed(filter, &feedset.feed, ctx),
        None => feedset.feed.clone(),
    };
    for call in &residual.cross_entry {
        current = match call {
            CrossEntryFn::Window { duration_s, min_count } => {
                eval::eval_window(*duration_s, *min_count, &current)
            }
            CrossEntryFn::Cluster { radius_km, min_count } => {
                eval::eval_cluster(*radius_km, *min_count, &current)
            }
            CrossEntryFn::Cooccur { origin_a, origin_b, radius_km, duration_s } => {
                let working = Feedset { feed: current, sources: feedset.sources.clone() };
                cooccur_join(&working, origin_a, origin_b, *radius_km, *duration_s)?
            }
        };
    }
    Ok(eval::apply_shaping(&residual.shaping, &current))
}

/// Cross-feed spatial (and optionally temporal) join: keeps the origin-a
/// entries for which some origin-b entry lies within `radius_km` (and, when
/// `duration_s` is given, within that many seconds). Entries without geo
/// never match. Order is preserved; only a-side entries are returned.
pub fn cooccur_join(
    feedset: &Feedset,
    origin_a: &str,
    origin_b: &str,
    radius_km: f64,
    duration_s: Option<i64>,
) -> Result<Feed, AggregateError> {
    for origin in [origin_a, origin_b] {
        if !feedset.has_origin(origin) {
            return Err(AggregateError::UnknownOrigin(origin.to_string()));
        }
    }

    let b_side: Vec<&Entry> = feedset
        .feed
        .entries
        .iter()
        .filter(|e| e.origin.as_deref() == Some(origin_b) && e.geo.is_some())
        .collect();

    let entries: Vec<Entry> = feedset
        .feed
        .entries
        .iter()
        .filter(|e| {
            if e.origin.as_deref() != Some(origin_a) {
                return false;
            }
            let Some(shape) = &e.geo else { return false };
            let point = shape.representative_point();
            let time = entry_timestamp(e).unix_millis();
            b_side.iter().any(|other| {
                let other_point = other.geo.as_ref().expect("filtered to geo").representative_point();
                if haversine_km(point, other_point) > radius_km {
                    return false;
                }
                match duration_s {
                    Some(window) => {
                        let gap = (time - entry_timestamp(other).unix_millis()).abs();
                        gap <= window.saturating_mul(1000)
                    }
                    None => true,
                }
            })
        })
        .cloned()
        .collect();

    Ok(eval::with_entries(&feedset.feed, entries))
}
