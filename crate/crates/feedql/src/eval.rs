//! Single-feed query evaluation: per-entry filtering, cross-entry window and
//! cluster functions, and result shaping.
//!
//! Absence semantics: a predicate over a field the entry does not carry is
//! false for eq, range, and within, and true for ne. Multi-valued selectors
//! (category, author fields, link hrefs) match existentially for eq and
//! universally-negated for ne. All passes preserve the relative order of the
//! entries they keep, and all sorts are stable.

use std::borrow::Cow;
use std::collections::BTreeMap;

use thiserror::Error;

use crate::atom::{Entry, Feed, Timestamp};
use crate::geo::{haversine_km, GeoPoint};
use crate::query::{
    AtomField, CrossEntryFn, FilterExpr, Operator, Predicate, Query, Selector, Shaping, SortKey,
    SortOrder, Value,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    /// The query contains a cross-feed function; route it through the
    /// aggregator, this engine only has single-feed semantics.
    #[error("cooccur is a cross-feed function; evaluate it at an aggregator")]
    CrossFeedFnHere,
}

#[derive(Debug, Clone)]
pub struct EvalContext {
    pub now: Timestamp,
    /// When true (the default), entries without geo fail `within`
    /// predicates; when false they pass them.
    pub strict_geo: bool,
}

impl EvalContext {
    pub fn new() -> Self {
        EvalContext { now: Timestamp::now(), strict_geo: true }
    }

    pub fn fixed(now: Timestamp) -> Self {
        EvalContext { now, strict_geo: true }
    }
}

impl Default for EvalContext {
    fn default() -> Self {
        EvalContext::new()
    }
}

/// The instant cross-entry functions use: published, falling back to updated.
pub fn entry_timestamp(entry: &Entry) -> Timestamp {
    entry.published.unwrap_or(entry.updated)
}

/// Evaluates a filter against one entry.
pub fn match_entry(filter: &FilterExpr, entry: &Entry, ctx: &EvalContext) -> bool {
    match_with_hidden(filter, entry, None, ctx)
}

/// Like [`match_entry`] but with a hidden-field map for `x:` selectors;
/// used by the collection backend.
pub fn match_with_hidden(
    filter: &FilterExpr,
    entry: &Entry,
    hidden: Option<&BTreeMap<String, String>>,
    ctx: &EvalContext,
) -> bool {
    match filter {
        FilterExpr::And(children) => children.iter().all(|c| match_with_hidden(c, entry, hidden, ctx)),
        FilterExpr::Or(children) => children.iter().any(|c| match_with_hidden(c, entry, hidden, ctx)),
        FilterExpr::Predicate(p) => match_predicate(p, entry, hidden, ctx),
    }
}

fn match_predicate(
    p: &Predicate,
    entry: &Entry,
    hidden: Option<&BTreeMap<String, String>>,
    ctx: &EvalContext,
) -> bool {
    match (p.op, &p.value) {
        (Operator::Eq, Value::Text(pattern)) => {
            text_values(entry, &p.selector, hidden).iter().any(|v| pattern.matches(v))
        }
        (Operator::Ne, Value::Text(pattern)) => {
            !text_values(entry, &p.selector, hidden).iter().any(|v| pattern.matches(v))
        }
        (Operator::Lt | Operator::Le | Operator::Gt | Operator::Ge, Value::Time(bound)) => {
            match time_value(entry, &p.selector, hidden) {
                Some(instant) => match p.op {
                    Operator::Lt => instant < *bound,
                    Operator::Le => instant <= *bound,
                    Operator::Gt => instant > *bound,
                    Operator::Ge => instant >= *bound,
                    _ => unreachable!(),
                },
                None => false,
            }
        }
        (Operator::Within, Value::Region(region)) => match &entry.geo {
            Some(shape) => region.contains(shape.representative_point()),
            None => !ctx.strict_geo,
        },
        // Ill-typed combinations cannot be produced by the parser; treat a
        // hand-built one as not matching rather than panicking.
        _ => false,
    }
}

fn text_values<'a>(
    entry: &'a Entry,
    selector: &Selector,
    hidden: Option<&'a BTreeMap<String, String>>,
) -> Vec<Cow<'a, str>> {
    match selector {
        Selector::Atom(AtomField::Id) => vec![Cow::from(entry.id.as_str())],
        Selector::Atom(AtomField::Title) => vec![Cow::from(entry.title.as_str())],
        Selector::Atom(AtomField::Summary) => {
            entry.summary.iter().map(|s| Cow::from(s.as_str())).collect()
        }
        Selector::Atom(AtomField::Updated) => vec![Cow::from(entry.updated.to_rfc3339())],
        Selector::Atom(AtomField::Published) => {
            entry.published.iter().map(|t| Cow::from(t.to_rfc3339())).collect()
        }
        Selector::Atom(AtomField::AuthorName) => {
            entry.authors.iter().map(|a| Cow::from(a.name.as_str())).collect()
        }
        Selector::Atom(AtomField::AuthorEmail) => entry
            .authors
            .iter()
            .filter_map(|a| a.email.as_deref())
            .map(Cow::from)
            .collect(),
        Selector::Atom(AtomField::AuthorUri) => entry
            .authors
            .iter()
            .filter_map(|a| a.uri.as_deref())
            .map(Cow::from)
            .collect(),
        Selector::Atom(AtomField::Category) => {
            entry.categories.iter().map(|c| Cow::from(c.term.as_str())).collect()
        }
        Selector::LinkHref { rel } => entry
            .links
            .iter()
            .filter(|l| &l.rel == rel)
            .map(|l| Cow::from(l.href.as_str()))
            .collect(),
        Selector::GeoPosition => Vec::new(),
        Selector::Hidden(field) => match hidden.and_then(|h| h.get(field)) {
            Some(value) => vec![Cow::from(value.as_str())],
            None => Vec::new(),
        },
    }
}

fn time_value(
    entry: &Entry,
    selector: &Selector,
    hidden: Option<&BTreeMap<String, String>>,
) -> Option<Timestamp> {
    match selector {
        Selector::Atom(AtomField::Updated) => Some(entry.updated),
        Selector::Atom(AtomField::Published) => entry.published,
        Selector::Hidden(field) => {
            hidden.and_then(|h| h.get(field)).and_then(|v| Timestamp::parse(v).ok())
        }
        _ => None,
    }
}

/// Keeps exactly the entries matching the filter, in their original order.
/// The result feed's updated is the newest kept entry's updated (or the
/// input feed's updated when nothing is kept).
pub fn filter_feed(filter: &FilterExpr, feed: &Feed, ctx: &EvalContext) -> Feed {
    let entries: Vec<Entry> =
        feed.entries.iter().filter(|e| match_entry(filter, e, ctx)).cloned().collect();
    with_entries(feed, entries)
}

pub(crate) fn with_entries(feed: &Feed, entries: Vec<Entry>) -> Feed {
    let updated = entries.iter().map(|e| e.updated).max().unwrap_or(feed.updated);
    Feed {
        id: feed.id.clone(),
        title: feed.title.clone(),
        updated,
        links: feed.links.clone(),
        authors: feed.authors.clone(),
        entries,
        extensions: feed.extensions.clone(),
    }
}

/// Temporal self-join: an entry survives iff some closed interval of
/// `duration_s` seconds contains its timestamp together with at least
/// `min_count` entry timestamps (counting its own). Only intervals starting
/// at an entry timestamp need to be considered: any qualifying interval can
/// slide right until its left endpoint hits the earliest contained timestamp
/// without losing members.
pub fn eval_window(duration_s: i64, min_count: usize, feed: &Feed) -> Feed {
    debug_assert!(duration_s > 0 && min_count >= 1);
    let times: Vec<i64> = feed.entries.iter().map(|e| entry_timestamp(e).unix_millis()).collect();
    let duration_ms = duration_s.saturating_mul(1000);

    let mut anchors: Vec<i64> = times.clone();
    anchors.sort_unstable();
    anchors.dedup();

    let mut keep = vec![false; times.len()];
    for &start in &anchors {
        let end = start.saturating_add(duration_ms);
        let inside = times.iter().filter(|&&t| t >= start && t <= end).count();
        if inside >= min_count {
            for (i, &t) in times.iter().enumerate() {
                if t >= start && t <= end {
                    keep[i] = true;
                }
            }
        }
    }

    let entries: Vec<Entry> = feed
        .entries
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(e, _)| e.clone())
        .collect();
    with_entries(feed, entries)
}

/// Spatial self-join: an entry with geo survives iff at least `min_count`
/// entries (counting itself) have representative points within `radius_km`
/// of its own. Entries without geo are dropped.
pub fn eval_cluster(radius_km: f64, min_count: usize, feed: &Feed) -> Feed {
    debug_assert!(radius_km > 0.0 && min_count >= 1);
    let points: Vec<Option<GeoPoint>> =
        feed.entries.iter().map(|e| e.geo.as_ref().map(|g| g.representative_point())).collect();

    let entries: Vec<Entry> = feed
        .entries
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let Some(center) = points[*i] else { return false };
            let neighbors = points
                .iter()
                .filter(|p| matches!(p, Some(q) if haversine_km(center, *q) <= radius_km))
                .count();
            neighbors >= min_count
        })
        .map(|(_, e)| e.clone())
        .collect();
    with_entries(feed, entries)
}

/// Shaping pipeline: group-by (stable sort by group key, missing keys last,
/// plus an `fs:group` annotation), then sort-by (stable, missing keys last),
/// then start-index, then max-results.
pub fn apply_shaping(shaping: &Shaping, feed: &Feed) -> Feed {
    let mut entries: Vec<Entry> = feed.entries.clone();

    if let Some(selector) = &shaping.group_by {
        let keys: Vec<Option<String>> = entries
            .iter()
            .map(|e| text_values(e, selector, None).first().map(|v| v.to_string()))
            .collect();
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_by(|&a, &b| match (&keys[a], &keys[b]) {
            (Some(ka), Some(kb)) => ka.cmp(kb),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        });
        entries = order
            .into_iter()
            .map(|i| {
                let mut entry = entries[i].clone();
                if let Some(key) = &keys[i] {
                    entry.set_group(key);
                }
                entry
            })
            .collect();
    }

    if let Some(key) = &shaping.sort_by {
        let direction = shaping.effective_order().unwrap_or(SortOrder::Asc);
        let ranks: Vec<Option<RankKey>> = entries.iter().map(|e| rank_key(key, e)).collect();
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_by(|&a, &b| compare_ranked(&ranks[a], &ranks[b], direction));
        entries = order.into_iter().map(|i| entries[i].clone()).collect();
    }

    if let Some(start) = shaping.start_index {
        entries.drain(..(start - 1).min(entries.len()));
    }
    if let Some(max) = shaping.max_results {
        entries.truncate(max);
    }

    with_entries(feed, entries)
}

enum RankKey {
    Time(Timestamp),
    Text(String),
    Distance(f64),
}

fn rank_key(key: &SortKey, entry: &Entry) -> Option<RankKey> {
    match key {
        SortKey::Updated => Some(RankKey::Time(entry.updated)),
        SortKey::Published => entry.published.map(RankKey::Time),
        SortKey::Title => Some(RankKey::Text(entry.title.clone())),
        SortKey::GeoDistance(from) => entry
            .geo
            .as_ref()
            .map(|g| RankKey::Distance(haversine_km(*from, g.representative_point()))),
    }
}

/// Entries without a key always sort last; present keys follow the direction.
fn compare_ranked(a: &Option<RankKey>, b: &Option<RankKey>, direction: SortOrder) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Greater,
        (Some(_), None) => Ordering::Less,
        (Some(x), Some(y)) => {
            let ascending = match (x, y) {
                (RankKey::Time(tx), RankKey::Time(ty)) => tx.cmp(ty),
                (RankKey::Text(sx), RankKey::Text(sy)) => sx.cmp(sy),
                (RankKey::Distance(dx), RankKey::Distance(dy)) => {
                    dx.partial_cmp(dy).unwrap_or(Ordering::Equal)
                }
                _ => Ordering::Equal,
            };
            match direction {
                SortOrder::Asc => ascending,
                SortOrder::Desc => ascending.reverse(),
            }
        }
    }
}

/// Full single-feed evaluation: filter, then each cross-entry function left
/// to right (so they operate on the filtered set), then shaping. A query
/// containing cooccur is refused: that is the aggregator's job.
pub fn eval_query(query: &Query, feed: &Feed, ctx: &EvalContext) -> Result<Feed, EvalError> {
    if query.has_cooccur() {
        return Err(EvalError::CrossFeedFnHere);
    }
    let mut current = match &query.filter {
        Some(filter) => filter_feed(filter, feed, ctx),
        None => feed.clone(),
    };
    for call in &query.cross_entry {
        current = match call {
            CrossEntryFn::Window { duration_s, min_count } => {
                eval_window(*duration_s, *min_count, &current)
            }
            CrossEntryFn::Cluster { radius_km, min_count } => {
                eval_cluster(*radius_km, *min_count, &current)
            }
            CrossEntryFn::Cooccur { .. } => unreachable!("checked above"),
        };
    }
    Ok(apply_shaping(&query.shaping, &current))
}
