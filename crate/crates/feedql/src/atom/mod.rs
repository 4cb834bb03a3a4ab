//! Atom feed and entry model, including the GeoRSS Simple and feedset
//! origin extensions, with parsing, validation, and serialization.
//!
//! The modeled element subset is the queryable core: id, title, updated,
//! published, author, category, link, summary, content, geo shape, and
//! origin. Any other element (Atom or foreign) is carried through the
//! generic [`Extension`] list as a (namespace, name, text) triple so a
//! parse/serialize cycle does not drop it.

mod parse;
mod write;

pub use parse::{parse_feed, parse_feed_strict};
pub use write::serialize_feed;

use chrono::{DateTime, SecondsFormat, Utc};
use thiserror::Error;

use crate::geo::GeoShape;

/// The Atom namespace.
pub const ATOM_NS: &str = "http://www.w3.org/2005/Atom";
/// The GeoRSS namespace (Simple profile elements).
pub const GEORSS_NS: &str = "http://www.georss.org/georss";
/// The feedset extension namespace (`fs:origin`, `fs:group`).
pub const FEEDSET_NS: &str = "http://ns.feedql.dev/feedset";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AtomError {
    #[error("malformed xml: {0}")]
    MalformedXml(String),
    #[error("missing required element: {0}")]
    MissingRequired(String),
    #[error("bad geo markup: {0}")]
    BadGeo(String),
    #[error("invalid feed: {0}")]
    InvariantViolation(String),
}

/// A UTC instant with millisecond precision, serialized as RFC 3339.
///
/// Parsing accepts any RFC 3339 offset and normalizes to UTC; serialization
/// always uses the `Z` suffix and emits fractional seconds only when nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(DateTime<Utc>);

impl Timestamp {
    pub fn parse(text: &str) -> Result<Self, AtomError> {
        DateTime::parse_from_rfc3339(text.trim())
            .map(|dt| Timestamp(dt.with_timezone(&Utc)))
            .map_err(|e| AtomError::MalformedXml(format!("bad timestamp {text:?}: {e}")))
    }

    pub fn now() -> Self {
        Timestamp(Utc::now())
    }

    pub fn from_unix(secs: i64) -> Self {
        Timestamp(DateTime::from_timestamp(secs, 0).expect("unix seconds in range"))
    }

    pub fn from_unix_millis(ms: i64) -> Self {
        Timestamp(DateTime::from_timestamp_millis(ms).expect("unix millis in range"))
    }

    pub fn epoch() -> Self {
        Timestamp::from_unix(0)
    }

    pub fn to_rfc3339(self) -> String {
        self.0.to_rfc3339_opts(SecondsFormat::AutoSi, true)
    }

    pub fn unix_millis(self) -> i64 {
        self.0.timestamp_millis()
    }
}

impl std::fmt::Display for Timestamp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_rfc3339())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Person {
    pub name: String,
    pub email: Option<String>,
    pub uri: Option<String>,
}

impl Person {
    pub fn named(name: impl Into<String>) -> Self {
        Person { name: name.into(), email: None, uri: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Category {
    pub term: String,
    pub scheme: Option<String>,
    pub label: Option<String>,
}

impl Category {
    pub fn term(term: impl Into<String>) -> Self {
        Category { term: term.into(), scheme: None, label: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub href: String,
    /// Defaults to "alternate" when absent on the wire.
    pub rel: String,
    pub media_type: Option<String>,
}

impl Link {
    pub fn new(href: impl Into<String>) -> Self {
        Link { href: href.into(), rel: "alternate".into(), media_type: None }
    }

    pub fn with_rel(href: impl Into<String>, rel: impl Into<String>) -> Self {
        Link { href: href.into(), rel: rel.into(), media_type: None }
    }
}

/// Entry content: either inline text or a link-out via `src`.
#[derive(Debug, Clone, PartialEq)]
pub enum ContentBody {
    Inline(String),
    Src(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Content {
    pub media_type: Option<String>,
    pub body: ContentBody,
}

/// A foreign or unmodeled element carried through parse/serialize untouched.
/// Only the text content survives; attributes and children are not modeled.
#[derive(Debug, Clone, PartialEq)]
pub struct Extension {
    pub namespace: String,
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub id: String,
    pub title: String,
    pub updated: Timestamp,
    pub published: Option<Timestamp>,
    pub authors: Vec<Person>,
    pub categories: Vec<Category>,
    pub links: Vec<Link>,
    pub summary: Option<String>,
    pub content: Option<Content>,
    pub geo: Option<GeoShape>,
    /// Feedset annotation: URI of the source collection this entry came from.
    pub origin: Option<String>,
    pub extensions: Vec<Extension>,
}

impl Entry {
    pub fn new(id: impl Into<String>, title: impl Into<String>, updated: Timestamp) -> Self {
        Entry {
            id: id.into(),
            title: title.into(),
            updated,
            published: None,
            authors: Vec::new(),
            categories: Vec::new(),
            links: Vec::new(),
            summary: None,
            content: None,
            geo: None,
            origin: None,
            extensions: Vec::new(),
        }
    }

    /// The `fs:group` annotation value, if any.
    pub fn group(&self) -> Option<&str> {
        self.extensions
            .iter()
            .find(|e| e.namespace == FEEDSET_NS && e.name == "group")
            .map(|e| e.value.as_str())
    }

    /// Sets the `fs:group` annotation, replacing an existing one.
    pub fn set_group(&mut self, value: impl Into<String>) {
        self.extensions.retain(|e| !(e.namespace == FEEDSET_NS && e.name == "group"));
        self.extensions.push(Extension {
            namespace: FEEDSET_NS.into(),
            name: "group".into(),
            value: value.into(),
        });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feed {
    pub id: String,
    pub title: String,
    pub updated: Timestamp,
    pub links: Vec<Link>,
    pub authors: Vec<Person>,
    pub entries: Vec<Entry>,
    pub extensions: Vec<Extension>,
}

impl Feed {
    pub fn new(id: impl Into<String>, title: impl Into<String>, updated: Timestamp) -> Self {
        Feed {
            id: id.into(),
            title: title.into(),
            updated,
            links: Vec::new(),
            authors: Vec::new(),
            entries: Vec::new(),
            extensions: Vec::new(),
        }
    }
}

/// One broken invariant found by [`validate_feed`]: the subject is either
/// `"feed"` or the offending entry's id.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub subject: String,
    pub rule: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.subject, self.rule)
    }
}

/// Checks every feed and entry invariant; returns an empty list iff all hold.
///
/// Entry uniqueness is keyed on (origin, id): a feedset may legitimately hold
/// the same entry id from two different source feeds.
pub fn validate_feed(feed: &Feed) -> Vec<Violation> {
    let mut out = Vec::new();
    let feed_subject = || "feed".to_string();

    if feed.id.is_empty() {
        out.push(Violation { subject: feed_subject(), rule: "feed.id nonempty".into() });
    }
    if feed.title.is_empty() {
        out.push(Violation { subject: feed_subject(), rule: "feed.title nonempty".into() });
    }
    check_people(&feed.authors, &feed_subject(), &mut out);
    check_links(&feed.links, &feed_subject(), &mut out);

    let mut seen: Vec<(&Option<String>, &str)> = Vec::new();
    let mut flagged_dup: Vec<(&Option<String>, &str)> = Vec::new();
    for entry in &feed.entries {
        let subject = if entry.id.is_empty() { "<entry without id>".to_string() } else { entry.id.clone() };
        if entry.id.is_empty() {
            out.push(Violation { subject: subject.clone(), rule: "entry.id nonempty".into() });
        } else {
            let key = (&entry.origin, entry.id.as_str());
            if seen.contains(&key) {
                if !flagged_dup.contains(&key) {
                    out.push(Violation { subject: subject.clone(), rule: "duplicate entry id".into() });
                    flagged_dup.push(key);
                }
            } else {
                seen.push(key);
            }
        }
        if entry.title.is_empty() {
            out.push(Violation { subject: subject.clone(), rule: "entry.title nonempty".into() });
        }
        check_people(&entry.authors, &subject, &mut out);
        check_links(&entry.links, &subject, &mut out);
        for cat in &entry.categories {
            if cat.term.is_empty() {
                out.push(Violation { subject: subject.clone(), rule: "category.term nonempty".into() });
            }
        }
        if let Some(shape) = &entry.geo {
            if let Err(e) = shape.check() {
                out.push(Violation { subject: subject.clone(), rule: format!("geo invalid: {e}") });
            }
        }
        for ext in &entry.extensions {
            if ext.name.is_empty() {
                out.push(Violation { subject: subject.clone(), rule: "extension.name nonempty".into() });
            }
        }
    }
    out
}

fn check_people(people: &[Person], subject: &str, out: &mut Vec<Violation>) {
    for p in people {
        if p.name.is_empty() {
            out.push(Violation { subject: subject.to_string(), rule: "person.name nonempty".into() });
        }
    }
}

fn check_links(links: &[Link], subject: &str, out: &mut Vec<Violation>) {
    for l in links {
        if l.href.is_empty() {
            out.push(Violation { subject: subject.to_string(), rule: "link.href nonempty".into() });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> Timestamp {
        Timestamp::parse(s).unwrap()
    }

    #[test]
    fn timestamp_normalizes_to_utc_z() {
        let t = ts("2009-04-01T14:30:00+02:00");
        assert_eq!(t.to_rfc3339(), "2009-04-01T12:30:00Z");
        // fractional seconds survive
        let t = ts("2009-04-01T14:30:00.250Z");
        assert_eq!(t.to_rfc3339(), "2009-04-01T14:30:00.250Z");
    }

    #[test]
    fn valid_feed_has_no_violations() {
        let mut feed = Feed::new("urn:f", "A feed", ts("2009-04-01T00:00:00Z"));
        feed.entries.push(Entry::new("urn:e1", "First", ts("2009-04-01T00:00:00Z")));
        assert!(validate_feed(&feed).is_empty());
    }

    #[test]
    fn empty_entry_id_is_flagged() {
        let mut feed = Feed::new("urn:f", "A feed", ts("2009-04-01T00:00:00Z"));
        feed.entries.push(Entry::new("", "First", ts("2009-04-01T00:00:00Z")));
        let violations = validate_feed(&feed);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].rule, "entry.id nonempty");
    }

    #[test]
    fn duplicate_entry_ids_are_one_violation() {
        let mut feed = Feed::new("urn:f", "A feed", ts("2009-04-01T00:00:00Z"));
        feed.entries.push(Entry::new("urn:e1", "First", ts("2009-04-01T00:00:00Z")));
        feed.entries.push(Entry::new("urn:e1", "Second", ts("2009-04-02T00:00:00Z")));
        let violations = validate_feed(&feed);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].rule, "duplicate entry id");
        assert_eq!(violations[0].subject, "urn:e1");
    }

    #[test]
    fn same_id_under_distinct_origins_is_fine() {
        let mut feed = Feed::new("urn:f", "A feedset", ts("2009-04-01T00:00:00Z"));
        let mut a = Entry::new("urn:e1", "First", ts("2009-04-01T00:00:00Z"));
        a.origin = Some("http://a.example/f".into());
        let mut b = Entry::new("urn:e1", "First again", ts("2009-04-01T00:00:00Z"));
        b.origin = Some("http://b.example/f".into());
        feed.entries.extend([a, b]);
        assert!(validate_feed(&feed).is_empty());
    }

    #[test]
    fn group_annotation_is_replaced_not_duplicated() {
        let mut e = Entry::new("urn:e1", "First", ts("2009-04-01T00:00:00Z"));
        e.set_group("a");
        e.set_group("b");
        assert_eq!(e.group(), Some("b"));
        assert_eq!(e.extensions.len(), 1);
    }
}
