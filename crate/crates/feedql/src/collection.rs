//! Collection storage: members with feed-visible entries plus hidden
//! backend fields, served as current/paged/archived feeds and queryable
//! with collection scope.
//!
//! Ordering is deterministic so identical collection state serializes to
//! identical bytes: current and paged feeds run updated-descending (ties by
//! id ascending), archives are fixed blocks in arrival order and are never
//! rebalanced. A collection value is immutable; `upsert_member` returns the
//! updated state, which gives readers snapshot semantics for free.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use thiserror::Error;

use crate::atom::{
    parse_feed, serialize_feed, AtomError, Entry, Feed, Link, Person, Timestamp,
};
use crate::capabilities::{embed_capability_link, Capabilities, Tier};
use crate::eval::{self, EvalContext, EvalError};
use crate::query::Query;

#[derive(Debug, Error)]
pub enum CollectionError {
    #[error("stale update for {id}: incoming {incoming} is older than stored {existing}")]
    StaleUpdate { id: String, existing: Timestamp, incoming: Timestamp },
    #[error("page {page} out of range (last page is {last})")]
    PageOutOfRange { page: usize, last: usize },
    #[error("archive {index} out of range (last archive is {last})")]
    ArchiveOutOfRange { index: usize, last: usize },
    #[error("unknown hidden field x:{0}")]
    UnknownHiddenField(String),
    #[error("invalid member: {0}")]
    InvalidMember(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Atom(#[from] AtomError),
    #[error("cannot load collection: {0}")]
    Load(String),
    #[error("cannot persist collection: {0}")]
    Persist(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One collection member: the feed-visible entry plus hidden backend fields
/// addressable via `x:` selectors but never serialized into feeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub entry: Entry,
    pub hidden: BTreeMap<String, String>,
}

impl Member {
    pub fn of(entry: Entry) -> Self {
        Member { entry, hidden: BTreeMap::new() }
    }

    pub fn with_hidden(entry: Entry, pairs: &[(&str, &str)]) -> Self {
        Member {
            entry,
            hidden: pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

/// Feed-level metadata served on every feed built from the collection.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedMeta {
    pub id: String,
    pub title: String,
    pub authors: Vec<Person>,
}

impl FeedMeta {
    pub fn new(id: impl Into<String>, title: impl Into<String>) -> Self {
        FeedMeta { id: id.into(), title: title.into(), authors: Vec::new() }
    }
}

#[derive(Debug, Clone)]
pub struct Collection {
    name: String,
    feed_meta: FeedMeta,
    page_size: usize,
    archive_size: usize,
    members: BTreeMap<String, Member>,
    /// Member ids in insertion order; archives are blocks of this sequence.
    arrival: Vec<String>,
}

impl Collection {
    pub fn new(
        name: impl Into<String>,
        feed_meta: FeedMeta,
        page_size: usize,
        archive_size: usize,
    ) -> Result<Self, CollectionError> {
        let name = name.into();
        if name.is_empty() {
            return Err(CollectionError::InvalidMember("collection name must be nonempty".into()));
        }
        if page_size < 1 || archive_size < 1 {
            return Err(CollectionError::InvalidMember(
                "page_size and archive_size must be >= 1".into(),
            ));
        }
        Ok(Collection {
            name,
            feed_meta,
            page_size,
            archive_size,
            members: BTreeMap::new(),
            arrival: Vec::new(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn page_size(&self) -> usize {
        self.page_size
    }

    pub fn archive_size(&self) -> usize {
        self.archive_size
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, id: &str) -> Option<&Member> {
        self.members.get(id)
    }

    pub fn members(&self) -> impl Iterator<Item = &Member> {
        self.arrival.iter().filter_map(|id| self.members.get(id))
    }

    /// The path this collection's feeds live under; link hrefs are minted
    /// relative to the service root.
    pub fn base_path(&self) -> String {
        format!("/feeds/{}", self.name)
    }

    fn capabilities_path(&self) -> String {
        format!("{}/capabilities", self.base_path())
    }

    /// The capability document for this collection: the full feed-level
    /// language minus the cross-feed cooccur function, plus an `x:` selector
    /// for every hidden field any member carries.
    pub fn capabilities(&self, tier: Tier) -> Capabilities {
        let mut caps = Capabilities::full_language().with_tier(tier);
        caps.remove_function("cooccur");
        let mut fields: BTreeSet<&str> = BTreeSet::new();
        for member in self.members.values() {
            fields.extend(member.hidden.keys().map(String::as_str));
        }
        for field in fields {
            caps.add_hidden_selector(field);
        }
        caps
    }

    /// Inserts or replaces a member. A member with the same entry id is
    /// replaced only when the incoming updated is not older than the stored
    /// one; otherwise the upsert is rejected as stale. Returns the updated
    /// collection state.
    pub fn upsert_member(&self, member: Member) -> Result<Collection, CollectionError> {
        check_member(&member)?;
        let id = member.entry.id.clone();
        let mut next = self.clone();
        match next.members.get(&id) {
            Some(existing) => {
                if member.entry.updated < existing.entry.updated {
                    return Err(CollectionError::StaleUpdate {
                        id,
                        existing: existing.entry.updated,
                        incoming: member.entry.updated,
                    });
                }
                next.members.insert(id, member);
            }
            None => {
                next.arrival.push(id.clone());
                next.members.insert(id, member);
            }
        }
        Ok(next)
    }

    fn ordered_desc(&self) -> Vec<&Member> {
        let mut members: Vec<&Member> = self.members.values().collect();
        members.sort_by(|a, b| {
            b.entry.updated.cmp(&a.entry.updated).then_with(|| a.entry.id.cmp(&b.entry.id))
        });
        members
    }

    fn feed_shell(&self) -> Feed {
        let mut feed = Feed::new(
            self.feed_meta.id.clone(),
            self.feed_meta.title.clone(),
            Timestamp::epoch(),
        );
        feed.authors = self.feed_meta.authors.clone();
        embed_capability_link(&mut feed, &self.capabilities_path());
        feed
    }

    fn global_updated(&self) -> Timestamp {
        self.members.values().map(|m| m.entry.updated).max().unwrap_or_else(Timestamp::epoch)
    }

    /// The page_size most recently updated members, newest first. Carries a
    /// self link and, when archives exist, a prev-archive link to the newest
    /// archive so clients can walk the complete history.
    pub fn current_feed(&self) -> Feed {
        let mut feed = self.feed_shell();
        feed.updated = self.global_updated();
        feed.links.push(atom_link(&self.base_path(), "self"));
        if !self.is_empty() {
            feed.links.push(atom_link(
                &format!("{}/archive/{}", self.base_path(), self.archive_count()),
                "prev-archive",
            ));
        }
        feed.entries = self
            .ordered_desc()
            .into_iter()
            .take(self.page_size)
            .map(|m| m.entry.clone())
            .collect();
        feed
    }

    fn last_page(&self) -> usize {
        self.len().div_ceil(self.page_size).max(1)
    }

    /// Page `page` (1-based) of the updated-descending order, with self,
    /// next, and previous links. Page 1 is always valid, even when empty.
    pub fn paged_feed(&self, page: usize) -> Result<Feed, CollectionError> {
        let last = self.last_page();
        if page < 1 || page > last {
            return Err(CollectionError::PageOutOfRange { page, last });
        }
        let mut feed = self.feed_shell();
        feed.updated = self.global_updated();
        let base = self.base_path();
        feed.links.push(atom_link(&format!("{base}?page={page}"), "self"));
        if page < last {
            feed.links.push(atom_link(&format!("{base}?page={}", page + 1), "next"));
        }
        if page > 1 {
            feed.links.push(atom_link(&format!("{base}?page={}", page - 1), "previous"));
        }
        feed.entries = self
            .ordered_desc()
            .into_iter()
            .skip((page - 1) * self.page_size)
            .take(self.page_size)
            .map(|m| m.entry.clone())
            .collect();
        Ok(feed)
    }

    pub fn archive_count(&self) -> usize {
        self.len().div_ceil(self.archive_size)
    }

    /// Archive `index` (1-based): a fixed block of the arrival sequence.
    /// Full archives never change content; a full archive's next-archive
    /// link appears once the following archive fills up.
    pub fn archived_feed(&self, index: usize) -> Result<Feed, CollectionError> {
        let last = self.archive_count();
        if index < 1 || index > last {
            return Err(CollectionError::ArchiveOutOfRange { index, last });
        }
        let base = self.base_path();
        let mut feed = self.feed_shell();
        feed.links.push(atom_link(&base, "current"));
        if index > 1 {
            feed.links.push(atom_link(&format!("{base}/archive/{}", index - 1), "prev-archive"));
        }
        let later_full_exists = self.len() >= (index + 1) * self.archive_size;
        if later_full_exists {
            feed.links.push(atom_link(&format!("{base}/archive/{}", index + 1), "next-archive"));
        }
        feed.entries = self
            .arrival
            .iter()
            .skip((index - 1) * self.archive_size)
            .take(self.archive_size)
            .filter_map(|id| self.members.get(id))
            .map(|m| m.entry.clone())
            .collect();
        feed.updated =
            feed.entries.iter().map(|e| e.updated).max().unwrap_or_else(Timestamp::epoch);
        Ok(feed)
    }

    pub fn is_archive_full(&self, index: usize) -> bool {
        index >= 1 && self.len() >= index * self.archive_size
    }

    /// Every member as an entry, updated-descending. This is the feed the
    /// query endpoint evaluates over.
    pub fn full_member_feed(&self) -> Feed {
        let mut feed = self.feed_shell();
        feed.updated = self.global_updated();
        feed.entries = self.ordered_desc().into_iter().map(|m| m.entry.clone()).collect();
        feed
    }

    /// Evaluates a query over the full member set. `x:` predicates run
    /// against hidden fields; the result contains only the entry
    /// projections, so hidden data never reaches the output. `declared`
    /// lists hidden fields that are valid to query even when no current
    /// member carries them.
    ///
    /// Group-by on an `x:` selector is accepted but treats every key as
    /// missing: annotating entries with hidden values would leak them.
    pub fn collection_query(
        &self,
        query: &Query,
        ctx: &EvalContext,
        declared: &BTreeSet<String>,
    ) -> Result<Feed, CollectionError> {
        if query.has_cooccur() {
            return Err(EvalError::CrossFeedFnHere.into());
        }
        for name in hidden_selectors(query) {
            let known = declared.contains(&name)
                || self.members.values().any(|m| m.hidden.contains_key(&name));
            if !known {
                return Err(CollectionError::UnknownHiddenField(name));
            }
        }

        let full = self.full_member_feed();
        let mut current = match &query.filter {
            Some(filter) => {
                let entries: Vec<Entry> = full
                    .entries
                    .iter()
                    .filter(|e| {
                        let hidden = self.members.get(&e.id).map(|m| &m.hidden);
                        eval::match_with_hidden(filter, e, hidden, ctx)
                    })
                    .cloned()
                    .collect();
                eval::with_entries(&full, entries)
            }
            None => full,
        };
        for call in &query.cross_entry {
            current = match call {
                crate::query::CrossEntryFn::Window { duration_s, min_count } => {
                    eval::eval_window(*duration_s, *min_count, &current)
                }
                crate::query::CrossEntryFn::Cluster { radius_km, min_count } => {
                    eval::eval_cluster(*radius_km, *min_count, &current)
                }
                crate::query::CrossEntryFn::Cooccur { .. } => unreachable!("checked above"),
            };
        }
        Ok(eval::apply_shaping(&query.shaping, &current))
    }

    /// Writes `<name>.atom` (members in arrival order) and
    /// `<name>.hidden.tsv` (`id TAB field TAB value`, UTF-8, LF).
    pub fn save(&self, atom_path: &Path, hidden_path: &Path) -> Result<(), CollectionError> {
        let mut feed = Feed::new(
            self.feed_meta.id.clone(),
            self.feed_meta.title.clone(),
            self.global_updated(),
        );
        feed.authors = self.feed_meta.authors.clone();
        feed.entries = self.members().map(|m| m.entry.clone()).collect();
        std::fs::write(atom_path, serialize_feed(&feed)?)?;

        let mut tsv = String::new();
        for member in self.members() {
            let id = &member.entry.id;
            if id.contains(['\t', '\n', '\r']) {
                return Err(CollectionError::Persist(format!(
                    "member id {id:?} contains a tab or line break"
                )));
            }
            for (field, value) in &member.hidden {
                if field.contains(['\t', '\n', '\r']) || value.contains(['\n', '\r']) {
                    return Err(CollectionError::Persist(format!(
                        "hidden field {field:?} of {id:?} contains a tab or line break"
                    )));
                }
                tsv.push_str(&format!("{id}\t{field}\t{value}\n"));
            }
        }
        std::fs::write(hidden_path, tsv)?;
        Ok(())
    }

    /// Loads a collection from its Atom file and optional hidden sidecar.
    /// Entry document order becomes the arrival order.
    pub fn load(
        name: impl Into<String>,
        atom_path: &Path,
        hidden_path: Option<&Path>,
        page_size: usize,
        archive_size: usize,
    ) -> Result<Self, CollectionError> {
        let xml = std::fs::read_to_string(atom_path)?;
        let feed = parse_feed(&xml)?;
        let meta = FeedMeta { id: feed.id, title: feed.title, authors: feed.authors };
        let mut collection = Collection::new(name, meta, page_size, archive_size)?;
        for entry in feed.entries {
            if collection.members.contains_key(&entry.id) {
                return Err(CollectionError::Load(format!(
                    "duplicate member id {:?} in {}",
                    entry.id,
                    atom_path.display()
                )));
            }
            collection.arrival.push(entry.id.clone());
            collection.members.insert(entry.id.clone(), Member::of(entry));
        }
        if let Some(path) = hidden_path {
            let text = std::fs::read_to_string(path)?;
            for (number, line) in text.lines().enumerate() {
                if line.is_empty() {
                    continue;
                }
                let mut parts = line.splitn(3, '\t');
                let (Some(id), Some(field), Some(value)) =
                    (parts.next(), parts.next(), parts.next())
                else {
                    return Err(CollectionError::Load(format!(
                        "{}:{}: expected id TAB field TAB value",
                        path.display(),
                        number + 1
                    )));
                };
                let member = collection.members.get_mut(id).ok_or_else(|| {
                    CollectionError::Load(format!(
                        "{}:{}: hidden field for unknown member {id:?}",
                        path.display(),
                        number + 1
                    ))
                })?;
                member.hidden.insert(field.to_string(), value.to_string());
            }
        }
        Ok(collection)
    }
}

fn check_member(member: &Member) -> Result<(), CollectionError> {
    let entry = &member.entry;
    if entry.id.is_empty() {
        return Err(CollectionError::InvalidMember("entry.id must be nonempty".into()));
    }
    if entry.title.is_empty() {
        return Err(CollectionError::InvalidMember("entry.title must be nonempty".into()));
    }
    if let Some(shape) = &entry.geo {
        shape
            .check()
            .map_err(|e| CollectionError::InvalidMember(format!("geo invalid: {e}")))?;
    }
    if member.hidden.keys().any(|k| k.is_empty()) {
        return Err(CollectionError::InvalidMember("hidden field names must be nonempty".into()));
    }
    Ok(())
}

fn hidden_selectors(query: &Query) -> Vec<String> {
    let mut names = Vec::new();
    let mut note = |selector: &crate::query::Selector| {
        if let crate::query::Selector::Hidden(field) = selector {
            if !names.contains(field) {
                names.push(field.clone());
            }
        }
    };
    if let Some(filter) = &query.filter {
        for predicate in filter.predicates() {
            note(&predicate.selector);
        }
    }
    if let Some(selector) = &query.shaping.group_by {
        note(selector);
    }
    names
}

fn atom_link(href: &str, rel: &str) -> Link {
    Link { href: href.to_string(), rel: rel.to_string(), media_type: Some("application/atom+xml".into()) }
}
