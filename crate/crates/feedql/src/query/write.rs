//! Canonical query serialization. `parse_uri_params(serialize_query(q))` is
//! semantically equal to `q`; And/Or children are emitted in sorted order so
//! equal queries serialize identically.

use super::{CrossEntryFn, FilterExpr, Predicate, Query, SortKey, Value};
use crate::geo::GeoRegion;

/// Serializes a query to its URI parameters, canonical form.
pub fn serialize_query(query: &Query) -> Vec<(String, String)> {
    let query = query.canonicalized();
    let mut out = Vec::new();
    if let Some(filter) = &query.filter {
        out.push(("q".to_string(), render_filter(filter)));
    }
    if !query.cross_entry.is_empty() {
        let calls: Vec<String> = query.cross_entry.iter().map(render_fn).collect();
        out.push(("xq".to_string(), calls.join(",")));
    }
    if let Some(key) = &query.shaping.sort_by {
        out.push(("sort-by".to_string(), render_sort_key(key)));
    }
    if let Some(order) = query.shaping.order {
        out.push(("order".to_string(), order.as_str().to_string()));
    }
    if let Some(selector) = &query.shaping.group_by {
        out.push(("group-by".to_string(), selector.to_string()));
    }
    if let Some(n) = query.shaping.max_results {
        out.push(("max-results".to_string(), n.to_string()));
    }
    if let Some(n) = query.shaping.start_index {
        out.push(("start-index".to_string(), n.to_string()));
    }
    out
}

/// Renders a filter in the concrete grammar. An Or nested under an And is
/// parenthesized; everything else needs no brackets.
pub fn render_filter(expr: &FilterExpr) -> String {
    match expr {
        FilterExpr::Predicate(p) => render_predicate(p),
        FilterExpr::And(children) => children
            .iter()
            .map(|child| match child {
                FilterExpr::Or(_) => format!("({})", render_filter(child)),
                _ => render_filter(child),
            })
            .collect::<Vec<_>>()
            .join(";"),
        FilterExpr::Or(children) => children
            .iter()
            .map(render_filter)
            .collect::<Vec<_>>()
            .join(","),
    }
}

fn render_predicate(p: &Predicate) -> String {
    format!("{}{}{}", p.selector, p.op.token(), render_value(&p.value))
}

fn render_value(value: &Value) -> String {
    match value {
        Value::Text(pattern) => quote_if_needed(pattern.raw()),
        Value::Time(instant) => instant.to_rfc3339(),
        Value::Region(GeoRegion::Radius { center, km }) => {
            format!("radius({},{},{})", center.lat, center.lon, km)
        }
        Value::Region(GeoRegion::Box { sw, ne }) => {
            format!("box({},{},{},{})", sw.lat, sw.lon, ne.lat, ne.lon)
        }
    }
}

fn quote_if_needed(raw: &str) -> String {
    let reserved =
        raw.is_empty() || raw.chars().any(|c| matches!(c, ';' | ',' | '(' | ')' | '"' | '\\') || c.is_whitespace());
    if !reserved {
        return raw.to_string();
    }
    let mut out = String::with_capacity(raw.len() + 2);
    out.push('"');
    for c in raw.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn render_fn(call: &CrossEntryFn) -> String {
    match call {
        CrossEntryFn::Window { duration_s, min_count } => format!("window({duration_s},{min_count})"),
        CrossEntryFn::Cluster { radius_km, min_count } => format!("cluster({radius_km},{min_count})"),
        CrossEntryFn::Cooccur { origin_a, origin_b, radius_km, duration_s } => match duration_s {
            Some(d) => format!("cooccur({origin_a},{origin_b},{radius_km},{d})"),
            None => format!("cooccur({origin_a},{origin_b},{radius_km})"),
        },
    }
}

fn render_sort_key(key: &SortKey) -> String {
    match key {
        SortKey::Updated => "updated".to_string(),
        SortKey::Published => "published".to_string(),
        SortKey::Title => "title".to_string(),
        SortKey::GeoDistance(p) => format!("geo-distance({},{})", p.lat, p.lon),
    }
}
