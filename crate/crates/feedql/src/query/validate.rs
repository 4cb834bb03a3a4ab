//! Checks a query against a capability document, producing one descriptor
//! per unsupported feature. Clients run the same check locally that servers
//! run before evaluation, so both sides reject with identical descriptors.

use super::Query;
use crate::capabilities::Capabilities;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FeatureKind {
    Selector,
    Operator,
    Function,
    Shaping,
}

impl FeatureKind {
    pub fn label(self) -> &'static str {
        match self {
            FeatureKind::Selector => "selector",
            FeatureKind::Operator => "operator",
            FeatureKind::Function => "function",
            FeatureKind::Shaping => "shaping",
        }
    }
}

/// A feature used by a query but not advertised by the capability document.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct UnsupportedFeature {
    pub kind: FeatureKind,
    pub feature: String,
}

impl std::fmt::Display for UnsupportedFeature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}", self.kind.label(), self.feature)
    }
}

/// Returns an empty list iff every selector, operator, function, and shaping
/// feature the query uses appears in the capabilities. Collection-scoped
/// (`x:`) selectors count as supported only when advertised with collection
/// scope. Output is sorted and duplicate-free.
pub fn validate_against_capabilities(query: &Query, caps: &Capabilities) -> Vec<UnsupportedFeature> {
    let mut out: Vec<UnsupportedFeature> = Vec::new();
    let note = |kind: FeatureKind, feature: String, out: &mut Vec<UnsupportedFeature>| {
        let item = UnsupportedFeature { kind, feature };
        if !out.contains(&item) {
            out.push(item);
        }
    };

    if let Some(filter) = &query.filter {
        for predicate in filter.predicates() {
            let name = predicate.selector.capability_name();
            if !caps.supports_selector(&name) {
                note(FeatureKind::Selector, name, &mut out);
            }
            if !caps.supports_operator(predicate.op.name()) {
                note(FeatureKind::Operator, predicate.op.name().to_string(), &mut out);
            }
        }
    }

    for call in &query.cross_entry {
        if !caps.supports_function(call.name(), call.arity()) {
            note(FeatureKind::Function, call.name().to_string(), &mut out);
        }
    }

    let shaping = &query.shaping;
    if shaping.sort_by.is_some() && !caps.supports_shaping("sort-by") {
        note(FeatureKind::Shaping, "sort-by".to_string(), &mut out);
    }
    if shaping.order.is_some() && !caps.supports_shaping("order") {
        note(FeatureKind::Shaping, "order".to_string(), &mut out);
    }
    if let Some(selector) = &shaping.group_by {
        if !caps.supports_shaping("group-by") {
            note(FeatureKind::Shaping, "group-by".to_string(), &mut out);
        }
        let name = selector.capability_name();
        if !caps.supports_selector(&name) {
            note(FeatureKind::Selector, name, &mut out);
        }
    }
    if shaping.max_results.is_some() && !caps.supports_shaping("max-results") {
        note(FeatureKind::Shaping, "max-results".to_string(), &mut out);
    }
    if shaping.start_index.is_some() && !caps.supports_shaping("start-index") {
        note(FeatureKind::Shaping, "start-index".to_string(), &mut out);
    }

    out.sort();
    out
}
