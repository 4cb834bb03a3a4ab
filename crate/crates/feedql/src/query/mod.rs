//! The feed query language: an entry-scoped FIQL-style filter, an ordered
//! list of cross-entry functions, and shaping parameters.
//!
//! Filter syntax: `;` joins conjuncts, `,` joins disjuncts, and `;` binds
//! tighter, so `a;b,c;d` means `(a AND b) OR (c AND d)`. Operators are
//! `==`, `!=`, `=lt=`, `=le=`, `=gt=`, `=ge=`, and `=within=`. Text values
//! may use `*` wildcards; range operators take RFC 3339 timestamps;
//! `=within=` takes `radius(lat,lon,km)` or `box(swlat,swlon,nelat,nelon)`.
//!
//! Every predicate is evaluated against a single entry. Anything relating
//! entries to each other lives in the separate cross-entry function list
//! (`xq` parameter): `window(seconds,min-count)`, `cluster(km,min-count)`,
//! and the cross-feed `cooccur(origin-a,origin-b,km[,seconds])`.

mod parse;
mod validate;
mod write;

pub use parse::{parse_filter, parse_uri_params};
pub use validate::{validate_against_capabilities, FeatureKind, UnsupportedFeature};
pub use write::serialize_query;

use thiserror::Error;

use crate::atom::Timestamp;
use crate::geo::{GeoPoint, GeoRegion};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QueryError {
    #[error("syntax error at {pos}: expected {expected}")]
    Syntax { pos: usize, expected: String },
    #[error("unknown operator {op:?} at {pos}")]
    UnknownOperator { pos: usize, op: String },
    #[error("type mismatch at {pos}: {message}")]
    TypeMismatch { pos: usize, message: String },
    #[error("bad parameter {param:?}: {message}")]
    BadParam { param: String, message: String },
}

/// Atom fields addressable by the query language.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomField {
    Id,
    Title,
    Summary,
    Updated,
    Published,
    AuthorName,
    AuthorEmail,
    AuthorUri,
    Category,
}

impl AtomField {
    pub fn path(self) -> &'static str {
        match self {
            AtomField::Id => "id",
            AtomField::Title => "title",
            AtomField::Summary => "summary",
            AtomField::Updated => "updated",
            AtomField::Published => "published",
            AtomField::AuthorName => "author.name",
            AtomField::AuthorEmail => "author.email",
            AtomField::AuthorUri => "author.uri",
            AtomField::Category => "category",
        }
    }

    pub fn from_path(path: &str) -> Option<Self> {
        Some(match path {
            "id" => AtomField::Id,
            "title" => AtomField::Title,
            "summary" => AtomField::Summary,
            "updated" => AtomField::Updated,
            "published" => AtomField::Published,
            "author.name" => AtomField::AuthorName,
            "author.email" => AtomField::AuthorEmail,
            "author.uri" => AtomField::AuthorUri,
            "category" => AtomField::Category,
            _ => return None,
        })
    }

    pub fn is_timestamp(self) -> bool {
        matches!(self, AtomField::Updated | AtomField::Published)
    }
}

/// What a predicate selects on an entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    Atom(AtomField),
    /// `geo:position` — the entry's representative point.
    GeoPosition,
    /// `link(rel).href` — hrefs of links carrying the given relation.
    LinkHref { rel: String },
    /// `x:<field>` — a backend field invisible at the feed level;
    /// collection scope only.
    Hidden(String),
}

impl Selector {
    /// The name this selector is advertised under in a capability document.
    /// All `link(rel).href` selectors share the capability name `link`.
    pub fn capability_name(&self) -> String {
        match self {
            Selector::Atom(field) => field.path().to_string(),
            Selector::GeoPosition => "geo:position".to_string(),
            Selector::LinkHref { .. } => "link".to_string(),
            Selector::Hidden(field) => format!("x:{field}"),
        }
    }

    pub fn is_collection_scoped(&self) -> bool {
        matches!(self, Selector::Hidden(_))
    }
}

impl std::fmt::Display for Selector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Selector::Atom(field) => f.write_str(field.path()),
            Selector::GeoPosition => f.write_str("geo:position"),
            Selector::LinkHref { rel } => write!(f, "link({rel}).href"),
            Selector::Hidden(field) => write!(f, "x:{field}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Within,
}

impl Operator {
    pub fn token(self) -> &'static str {
        match self {
            Operator::Eq => "==",
            Operator::Ne => "!=",
            Operator::Lt => "=lt=",
            Operator::Le => "=le=",
            Operator::Gt => "=gt=",
            Operator::Ge => "=ge=",
            Operator::Within => "=within=",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Operator::Eq => "eq",
            Operator::Ne => "ne",
            Operator::Lt => "lt",
            Operator::Le => "le",
            Operator::Gt => "gt",
            Operator::Ge => "ge",
            Operator::Within => "within",
        }
    }
}

/// A text literal with optional `*` wildcards. Matching is case-sensitive;
/// `*` matches any (possibly empty) run of characters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextPattern {
    raw: String,
}

impl TextPattern {
    pub fn new(raw: impl Into<String>) -> Self {
        TextPattern { raw: raw.into() }
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn matches(&self, text: &str) -> bool {
        let pattern = self.raw.as_str();
        if !pattern.contains('*') {
            return pattern == text;
        }
        let parts: Vec<&str> = pattern.split('*').collect();
        if !text.starts_with(parts[0]) {
            return false;
        }
        let mut pos = parts[0].len();
        for part in &parts[1..parts.len() - 1] {
            if part.is_empty() {
                continue;
            }
            match text[pos..].find(part) {
                Some(found) => pos += found + part.len(),
                None => return false,
            }
        }
        let last = parts[parts.len() - 1];
        last.is_empty() || text[pos..].ends_with(last)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Text(TextPattern),
    Time(Timestamp),
    Region(GeoRegion),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub selector: Selector,
    pub op: Operator,
    pub value: Value,
}

/// A per-entry filter: a tree of conjunctions, disjunctions, and predicates.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterExpr {
    And(Vec<FilterExpr>),
    Or(Vec<FilterExpr>),
    Predicate(Predicate),
}

impl FilterExpr {
    /// All predicates in the tree, depth-first.
    pub fn predicates(&self) -> Vec<&Predicate> {
        let mut out = Vec::new();
        self.collect_predicates(&mut out);
        out
    }

    fn collect_predicates<'a>(&'a self, out: &mut Vec<&'a Predicate>) {
        match self {
            FilterExpr::Predicate(p) => out.push(p),
            FilterExpr::And(children) | FilterExpr::Or(children) => {
                for child in children {
                    child.collect_predicates(out);
                }
            }
        }
    }

    /// Canonical form: nested same-operator nodes are flattened and children
    /// are sorted by their serialized text. Two filters are semantically
    /// equal (modulo And/Or child order) iff their canonical forms are equal.
    pub fn canonicalized(&self) -> FilterExpr {
        match self {
            FilterExpr::Predicate(p) => FilterExpr::Predicate(p.clone()),
            FilterExpr::And(children) => {
                let mut flat = Vec::new();
                for child in children {
                    match child.canonicalized() {
                        FilterExpr::And(inner) => flat.extend(inner),
                        other => flat.push(other),
                    }
                }
                flat.sort_by_key(|c| write::render_filter(c));
                if flat.len() == 1 {
                    flat.pop().unwrap()
                } else {
                    FilterExpr::And(flat)
                }
            }
            FilterExpr::Or(children) => {
                let mut flat = Vec::new();
                for child in children {
                    match child.canonicalized() {
                        FilterExpr::Or(inner) => flat.extend(inner),
                        other => flat.push(other),
                    }
                }
                flat.sort_by_key(|c| write::render_filter(c));
                if flat.len() == 1 {
                    flat.pop().unwrap()
                } else {
                    FilterExpr::Or(flat)
                }
            }
        }
    }
}

/// A cross-entry (or, for cooccur, cross-feed) function call.
#[derive(Debug, Clone, PartialEq)]
pub enum CrossEntryFn {
    /// Keep entries that fall in some window of the given length (seconds)
    /// together with at least `min_count` entries (counting themselves).
    Window { duration_s: i64, min_count: usize },
    /// Keep entries with at least `min_count` entries (counting themselves)
    /// within `radius_km` of their representative point.
    Cluster { radius_km: f64, min_count: usize },
    /// Keep origin-a entries that co-occur with some origin-b entry within
    /// `radius_km` (and optionally within `duration_s` seconds).
    Cooccur {
        origin_a: String,
        origin_b: String,
        radius_km: f64,
        duration_s: Option<i64>,
    },
}

impl CrossEntryFn {
    pub fn name(&self) -> &'static str {
        match self {
            CrossEntryFn::Window { .. } => "window",
            CrossEntryFn::Cluster { .. } => "cluster",
            CrossEntryFn::Cooccur { .. } => "cooccur",
        }
    }

    pub fn arity(&self) -> u32 {
        match self {
            CrossEntryFn::Window { .. } | CrossEntryFn::Cluster { .. } => 2,
            CrossEntryFn::Cooccur { duration_s: Some(_), .. } => 4,
            CrossEntryFn::Cooccur { duration_s: None, .. } => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SortKey {
    Updated,
    Published,
    Title,
    /// Ascending means nearest-first to the given point.
    GeoDistance(GeoPoint),
}

impl SortKey {
    /// Timestamps default to newest-first; everything else ascends.
    pub fn default_order(&self) -> SortOrder {
        match self {
            SortKey::Updated | SortKey::Published => SortOrder::Desc,
            SortKey::Title | SortKey::GeoDistance(_) => SortOrder::Asc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortOrder {
    Asc,
    Desc,
}

impl SortOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            SortOrder::Asc => "asc",
            SortOrder::Desc => "desc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Shaping {
    pub sort_by: Option<SortKey>,
    /// Explicit direction; when absent the sort key's default applies.
    pub order: Option<SortOrder>,
    pub group_by: Option<Selector>,
    pub max_results: Option<usize>,
    /// 1-based index of the first entry to return.
    pub start_index: Option<usize>,
}

impl Shaping {
    pub fn is_identity(&self) -> bool {
        self.sort_by.is_none()
            && self.order.is_none()
            && self.group_by.is_none()
            && self.max_results.is_none()
            && self.start_index.is_none()
    }

    pub fn effective_order(&self) -> Option<SortOrder> {
        self.sort_by.as_ref().map(|key| self.order.unwrap_or_else(|| key.default_order()))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Query {
    pub filter: Option<FilterExpr>,
    pub cross_entry: Vec<CrossEntryFn>,
    pub shaping: Shaping,
}

impl Query {
    /// The identity query: no filter, no functions, no shaping.
    pub fn identity() -> Self {
        Query::default()
    }

    pub fn is_identity(&self) -> bool {
        self.filter.is_none() && self.cross_entry.is_empty() && self.shaping.is_identity()
    }

    pub fn has_cooccur(&self) -> bool {
        self.cross_entry.iter().any(|f| matches!(f, CrossEntryFn::Cooccur { .. }))
    }

    pub fn canonicalized(&self) -> Query {
        Query {
            filter: self.filter.as_ref().map(FilterExpr::canonicalized),
            cross_entry: self.cross_entry.clone(),
            shaping: self.shaping.clone(),
        }
    }
}
