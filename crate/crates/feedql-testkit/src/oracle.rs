//! A naive reference evaluator. Everything here is written from the query
//! semantics directly — recursive backtracking for wildcards, the atan2
//! form of the great-circle distance, quadratic double loops for window and
//! cluster, index sorts for shaping — and shares no code path with the
//! engine under test.

use std::collections::BTreeMap;

use feedql::atom::{Entry, Feed};
use feedql::geo::{GeoPoint, GeoRegion, GeoShape};
use feedql::query::{
    AtomField, CrossEntryFn, FilterExpr, Operator, Predicate, Query, Selector, SortKey, SortOrder,
    Value,
};

/// Great-circle distance via atan2 (the engine uses the asin form).
pub fn naive_distance_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let radius = 6371.0088;
    let (lat1, lon1) = (a.lat.to_radians(), a.lon.to_radians());
    let (lat2, lon2) = (b.lat.to_radians(), b.lon.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    let c = 2.0 * h.sqrt().atan2((1.0 - h).sqrt());
    radius * c
}

/// Recursive backtracking glob: `*` matches any run of characters.
pub fn naive_glob(pattern: &str, text: &str) -> bool {
    fn go(p: &[char], t: &[char]) -> bool {
        match p.split_first() {
            None => t.is_empty(),
            Some(('*', rest)) => (0..=t.len()).any(|k| go(rest, &t[k..])),
            Some((c, rest)) => t.first() == Some(c) && go(rest, &t[1..]),
        }
    }
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    go(&p, &t)
}

fn rep_point(shape: &GeoShape) -> GeoPoint {
    match shape {
        GeoShape::Point(p) => *p,
        GeoShape::Box { sw, ne } => GeoPoint { lat: (sw.lat + ne.lat) / 2.0, lon: (sw.lon + ne.lon) / 2.0 },
        GeoShape::Line(ps) | GeoShape::Polygon(ps) => {
            let n = ps.len() as f64;
            GeoPoint {
                lat: ps.iter().map(|p| p.lat).sum::<f64>() / n,
                lon: ps.iter().map(|p| p.lon).sum::<f64>() / n,
            }
        }
    }
}

fn values_of(entry: &Entry, selector: &Selector, hidden: Option<&BTreeMap<String, String>>) -> Vec<String> {
    match selector {
        Selector::Atom(AtomField::Id) => vec![entry.id.clone()],
        Selector::Atom(AtomField::Title) => vec![entry.title.clone()],
        Selector::Atom(AtomField::Summary) => entry.summary.clone().into_iter().collect(),
        Selector::Atom(AtomField::Updated) => vec![entry.updated.to_rfc3339()],
        Selector::Atom(AtomField::Published) => {
            entry.published.map(|t| t.to_rfc3339()).into_iter().collect()
        }
        Selector::Atom(AtomField::AuthorName) => entry.authors.iter().map(|a| a.name.clone()).collect(),
        Selector::Atom(AtomField::AuthorEmail) => {
            entry.authors.iter().filter_map(|a| a.email.clone()).collect()
        }
        Selector::Atom(AtomField::AuthorUri) => {
            entry.authors.iter().filter_map(|a| a.uri.clone()).collect()
        }
        Selector::Atom(AtomField::Category) => {
            entry.categories.iter().map(|c| c.term.clone()).collect()
        }
        Selector::LinkHref { rel } => entry
            .links
            .iter()
            .filter(|l| &l.rel == rel)
            .map(|l| l.href.clone())
            .collect(),
        Selector::GeoPosition => Vec::new(),
        Selector::Hidden(field) => match hidden.and_then(|h| h.get(field)) {
            Some(v) => vec![v.clone()],
            None => Vec::new(),
        },
    }
}

fn time_of(
    entry: &Entry,
    selector: &Selector,
    hidden: Option<&BTreeMap<String, String>>,
) -> Option<i64> {
    match selector {
        Selector::Atom(AtomField::Updated) => Some(entry.updated.unix_millis()),
        Selector::Atom(AtomField::Published) => entry.published.map(|t| t.unix_millis()),
        Selector::Hidden(field) => hidden
            .and_then(|h| h.get(field))
            .and_then(|v| feedql::atom::Timestamp::parse(v).ok())
            .map(|t| t.unix_millis()),
        _ => None,
    }
}

pub fn naive_match(
    filter: &FilterExpr,
    entry: &Entry,
    hidden: Option<&BTreeMap<String, String>>,
    strict_geo: bool,
) -> bool {
    match filter {
        FilterExpr::And(children) => children.iter().all(|c| naive_match(c, entry, hidden, strict_geo)),
        FilterExpr::Or(children) => children.iter().any(|c| naive_match(c, entry, hidden, strict_geo)),
        FilterExpr::Predicate(p) => naive_predicate(p, entry, hidden, strict_geo),
    }
}

fn naive_predicate(
    p: &Predicate,
    entry: &Entry,
    hidden: Option<&BTreeMap<String, String>>,
    strict_geo: bool,
) -> bool {
    match (&p.op, &p.value) {
        (Operator::Eq, Value::Text(pattern)) => values_of(entry, &p.selector, hidden)
            .iter()
            .any(|v| naive_glob(pattern.raw(), v)),
        (Operator::Ne, Value::Text(pattern)) => !values_of(entry, &p.selector, hidden)
            .iter()
            .any(|v| naive_glob(pattern.raw(), v)),
        (Operator::Lt, Value::Time(bound)) => {
            time_of(entry, &p.selector, hidden).is_some_and(|t| t < bound.unix_millis())
        }
        (Operator::Le, Value::Time(bound)) => {
            time_of(entry, &p.selector, hidden).is_some_and(|t| t <= bound.unix_millis())
        }
        (Operator::Gt, Value::Time(bound)) => {
            time_of(entry, &p.selector, hidden).is_some_and(|t| t > bound.unix_millis())
        }
        (Operator::Ge, Value::Time(bound)) => {
            time_of(entry, &p.selector, hidden).is_some_and(|t| t >= bound.unix_millis())
        }
        (Operator::Within, Value::Region(region)) => match &entry.geo {
            Some(shape) => {
                let point = rep_point(shape);
                match region {
                    GeoRegion::Radius { center, km } => naive_distance_km(*center, point) <= *km,
                    GeoRegion::Box { sw, ne } => {
                        point.lat >= sw.lat
                            && point.lat <= ne.lat
                            && point.lon >= sw.lon
                            && point.lon <= ne.lon
                    }
                }
            }
            None => !strict_geo,
        },
        _ => false,
    }
}

fn naive_time(entry: &Entry) -> i64 {
    entry.published.unwrap_or(entry.updated).unix_millis()
}

/// Brute force over all candidate intervals anchored at entry timestamps.
pub fn naive_window(duration_s: i64, min_count: usize, entries: &[Entry]) -> Vec<Entry> {
    let mut kept = Vec::new();
    for e in entries {
        let t = naive_time(e);
        let qualifies = entries.iter().any(|anchor| {
            let start = naive_time(anchor);
            let end = start + duration_s * 1000;
            if t < start || t > end {
                return false;
            }
            let count = entries.iter().filter(|x| {
                let tx = naive_time(x);
                tx >= start && tx <= end
            });
            count.count() >= min_count
        });
        if qualifies {
            kept.push(e.clone());
        }
    }
    kept
}

/// Brute-force neighbor counting with the oracle's own distance.
pub fn naive_cluster(radius_km: f64, min_count: usize, entries: &[Entry]) -> Vec<Entry> {
    let mut kept = Vec::new();
    for e in entries {
        let Some(shape) = &e.geo else { continue };
        let center = rep_point(shape);
        let neighbors = entries
            .iter()
            .filter(|x| match &x.geo {
                Some(other) => naive_distance_km(center, rep_point(other)) <= radius_km,
                None => false,
            })
            .count();
        if neighbors >= min_count {
            kept.push(e.clone());
        }
    }
    kept
}

pub fn naive_shape(query: &Query, mut entries: Vec<Entry>) -> Vec<Entry> {
    let shaping = &query.shaping;

    if let Some(selector) = &shaping.group_by {
        let keys: Vec<Option<String>> = entries
            .iter()
            .map(|e| values_of(e, selector, None).first().cloned())
            .collect();
        let mut index: Vec<usize> = (0..entries.len()).collect();
        index.sort_by(|&a, &b| match (&keys[a], &keys[b]) {
            (Some(x), Some(y)) => x.cmp(y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        });
        entries = index
            .into_iter()
            .map(|i| {
                let mut e = entries[i].clone();
                if let Some(key) = &keys[i] {
                    e.set_group(key);
                }
                e
            })
            .collect();
    }

    if let Some(key) = &shaping.sort_by {
        let desc = match shaping.order {
            Some(SortOrder::Desc) => true,
            Some(SortOrder::Asc) => false,
            None => matches!(key, SortKey::Updated | SortKey::Published),
        };
        enum K {
            T(i64),
            S(String),
            D(f64),
        }
        let keys: Vec<Option<K>> = entries
            .iter()
            .map(|e| match key {
                SortKey::Updated => Some(K::T(e.updated.unix_millis())),
                SortKey::Published => e.published.map(|t| K::T(t.unix_millis())),
                SortKey::Title => Some(K::S(e.title.clone())),
                SortKey::GeoDistance(from) => e
                    .geo
                    .as_ref()
                    .map(|g| K::D(naive_distance_km(*from, rep_point(g)))),
            })
            .collect();
        let mut index: Vec<usize> = (0..entries.len()).collect();
        index.sort_by(|&a, &b| {
            use std::cmp::Ordering;
            let base = match (&keys[a], &keys[b]) {
                (None, None) => return Ordering::Equal,
                (None, Some(_)) => return Ordering::Greater,
                (Some(_), None) => return Ordering::Less,
                (Some(K::T(x)), Some(K::T(y))) => x.cmp(y),
                (Some(K::S(x)), Some(K::S(y))) => x.cmp(y),
                (Some(K::D(x)), Some(K::D(y))) => x.partial_cmp(y).unwrap_or(Ordering::Equal),
                _ => Ordering::Equal,
            };
            if desc {
                base.reverse()
            } else {
                base
            }
        });
        entries = index.into_iter().map(|i| entries[i].clone()).collect();
    }

    if let Some(start) = shaping.start_index {
        let skip = (start - 1).min(entries.len());
        entries = entries.split_off(skip);
    }
    if let Some(max) = shaping.max_results {
        entries.truncate(max);
    }
    entries
}

/// The full naive single-feed pipeline. Panics on cooccur: single-feed
/// oracles never see cross-feed functions.
pub fn naive_eval_query(query: &Query, feed: &Feed, strict_geo: bool) -> Vec<Entry> {
    let mut entries: Vec<Entry> = match &query.filter {
        Some(filter) => feed
            .entries
            .iter()
            .filter(|e| naive_match(filter, e, None, strict_geo))
            .cloned()
            .collect(),
        None => feed.entries.clone(),
    };
    for call in &query.cross_entry {
        entries = match call {
            CrossEntryFn::Window { duration_s, min_count } => {
                naive_window(*duration_s, *min_count, &entries)
            }
            CrossEntryFn::Cluster { radius_km, min_count } => {
                naive_cluster(*radius_km, *min_count, &entries)
            }
            CrossEntryFn::Cooccur { .. } => panic!("cooccur has no single-feed semantics"),
        };
    }
    naive_shape(query, entries)
}

pub fn ids(entries: &[Entry]) -> Vec<String> {
    entries.iter().map(|e| e.id.clone()).collect()
}

pub fn origin_ids(entries: &[Entry]) -> Vec<(String, String)> {
    entries
        .iter()
        .map(|e| (e.origin.clone().unwrap_or_default(), e.id.clone()))
        .collect()
}
