//! Capability documents: a machine-readable advertisement of the selectors,
//! operators, functions, and shaping parameters a feed's query endpoint
//! supports, plus its access tier. Feeds point at their capability document
//! with a link using [`CAPABILITY_REL`], so consumers can discover query
//! support from the feed alone.

use roxmltree::Document;
use thiserror::Error;

use crate::atom::{Feed, Link};

/// Namespace of the capability document.
pub const CAPS_NS: &str = "http://ns.feedql.dev/capabilities";
/// Link relation connecting a feed to its capability document.
pub const CAPABILITY_REL: &str = "http://ns.feedql.dev/rel/capabilities";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CapsError {
    #[error("malformed capability document: {0}")]
    MalformedXml(String),
    #[error("unknown scope {0:?}")]
    UnknownScope(String),
}

/// Where a selector can be evaluated: on feed data (any intermediary can do
/// it) or only against the backing collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Feed,
    Collection,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Feed => "feed",
            Scope::Collection => "collection",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Open,
    Keyed,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Open => "open",
            Tier::Keyed => "keyed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Capabilities {
    /// Selector capability names with their scope. Collection scope is only
    /// valid for `x:` selectors.
    pub selectors: Vec<(String, Scope)>,
    pub operators: Vec<String>,
    /// Function name plus maximum supported argument count.
    pub functions: Vec<(String, u32)>,
    pub shaping: Vec<String>,
    pub tier: Tier,
}

impl Capabilities {
    pub fn empty() -> Self {
        Capabilities {
            selectors: Vec::new(),
            operators: Vec::new(),
            functions: Vec::new(),
            shaping: Vec::new(),
            tier: Tier::Open,
        }
    }

    /// Every feed-level feature the query language defines: all Atom
    /// selectors, geo:position, link, all operators, window/cluster/cooccur,
    /// and all shaping parameters. Collection-scoped (`x:`) selectors are
    /// per-collection and must be added explicitly.
    pub fn full_language() -> Self {
        let selectors = [
            "id",
            "title",
            "summary",
            "updated",
            "published",
            "author.name",
            "author.email",
            "author.uri",
            "category",
            "link",
            "geo:position",
        ];
        Capabilities {
            selectors: selectors.iter().map(|s| (s.to_string(), Scope::Feed)).collect(),
            operators: ["eq", "ne", "lt", "le", "gt", "ge", "within"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            functions: vec![
                ("window".into(), 2),
                ("cluster".into(), 2),
                ("cooccur".into(), 4),
            ],
            shaping: ["sort-by", "order", "group-by", "max-results", "start-index"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            tier: Tier::Open,
        }
    }

    pub fn with_tier(mut self, tier: Tier) -> Self {
        self.tier = tier;
        self
    }

    pub fn add_hidden_selector(&mut self, field: &str) {
        let name = format!("x:{field}");
        if !self.selectors.iter().any(|(n, _)| *n == name) {
            self.selectors.push((name, Scope::Collection));
        }
    }

    pub fn remove_function(&mut self, name: &str) {
        self.functions.retain(|(n, _)| n != name);
    }

    pub fn supports_selector(&self, name: &str) -> bool {
        if let Some(field) = name.strip_prefix("x:") {
            let want = format!("x:{field}");
            self.selectors.iter().any(|(n, s)| *n == want && *s == Scope::Collection)
        } else {
            self.selectors.iter().any(|(n, _)| n == name)
        }
    }

    pub fn supports_operator(&self, name: &str) -> bool {
        self.operators.iter().any(|n| n == name)
    }

    pub fn supports_function(&self, name: &str, arity: u32) -> bool {
        self.functions.iter().any(|(n, a)| n == name && *a >= arity)
    }

    pub fn supports_shaping(&self, name: &str) -> bool {
        self.shaping.iter().any(|n| n == name)
    }
}

pub fn serialize_capabilities(caps: &Capabilities) -> String {
    let mut out = String::with_capacity(512);
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!("<capabilities xmlns=\"{CAPS_NS}\">\n"));
    for (name, scope) in &caps.selectors {
        out.push_str(&format!(
            "  <selector name=\"{}\" scope=\"{}\"/>\n",
            esc(name),
            scope.as_str()
        ));
    }
    for name in &caps.operators {
        out.push_str(&format!("  <operator name=\"{}\"/>\n", esc(name)));
    }
    for (name, arity) in &caps.functions {
        out.push_str(&format!("  <function name=\"{}\" arity=\"{arity}\"/>\n", esc(name)));
    }
    for name in &caps.shaping {
        out.push_str(&format!("  <shaping name=\"{}\"/>\n", esc(name)));
    }
    out.push_str(&format!("  <tier>{}</tier>\n", caps.tier.as_str()));
    out.push_str("</capabilities>\n");
    out
}

pub fn parse_capabilities(xml: &str) -> Result<Capabilities, CapsError> {
    let doc = Document::parse(xml).map_err(|e| CapsError::MalformedXml(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().namespace() != Some(CAPS_NS) || root.tag_name().name() != "capabilities" {
        return Err(CapsError::MalformedXml("root is not a capabilities element".into()));
    }
    let mut caps = Capabilities::empty();
    for child in root.children().filter(|n| n.is_element()) {
        if child.tag_name().namespace() != Some(CAPS_NS) {
            continue;
        }
        let name_attr = || {
            child
                .attribute("name")
                .map(str::to_string)
                .ok_or_else(|| CapsError::MalformedXml(format!("{} without name", child.tag_name().name())))
        };
        match child.tag_name().name() {
            "selector" => {
                let scope = match child.attribute("scope").unwrap_or("feed") {
                    "feed" => Scope::Feed,
                    "collection" => Scope::Collection,
                    other => return Err(CapsError::UnknownScope(other.to_string())),
                };
                caps.selectors.push((name_attr()?, scope));
            }
            "operator" => caps.operators.push(name_attr()?),
            "function" => {
                let arity: u32 = child
                    .attribute("arity")
                    .unwrap_or("0")
                    .parse()
                    .map_err(|_| CapsError::MalformedXml("bad function arity".into()))?;
                caps.functions.push((name_attr()?, arity));
            }
            "shaping" => caps.shaping.push(name_attr()?),
            "tier" => {
                let text: String =
                    child.descendants().filter(|n| n.is_text()).filter_map(|n| n.text()).collect();
                caps.tier = match text.trim() {
                    "open" => Tier::Open,
                    "keyed" => Tier::Keyed,
                    other => return Err(CapsError::MalformedXml(format!("unknown tier {other:?}"))),
                };
            }
            _ => {}
        }
    }
    Ok(caps)
}

/// Adds (or replaces) the capability link on a feed. Idempotent: after any
/// number of embeds exactly one capability link remains.
pub fn embed_capability_link(feed: &mut Feed, caps_uri: &str) {
    let mut replaced = false;
    feed.links.retain_mut(|link| {
        if link.rel != CAPABILITY_REL {
            return true;
        }
        if replaced {
            return false;
        }
        link.href = caps_uri.to_string();
        link.media_type = Some("application/xml".into());
        replaced = true;
        true
    });
    if !replaced {
        feed.links.push(Link {
            href: caps_uri.to_string(),
            rel: CAPABILITY_REL.to_string(),
            media_type: Some("application/xml".into()),
        });
    }
}

/// The href of the first capability link in the feed, if any.
pub fn discover_from_feed(feed: &Feed) -> Option<&str> {
    feed.links.iter().find(|l| l.rel == CAPABILITY_REL).map(|l| l.href.as_str())
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::Timestamp;

    #[test]
    fn empty_caps_round_trip() {
        let caps = Capabilities::empty();
        let xml = serialize_capabilities(&caps);
        assert!(xml.contains("<tier>open</tier>"));
        assert_eq!(parse_capabilities(&xml).unwrap(), caps);
    }

    #[test]
    fn full_language_round_trip() {
        let mut caps = Capabilities::full_language().with_tier(Tier::Keyed);
        caps.add_hidden_selector("camera-model");
        let xml = serialize_capabilities(&caps);
        assert!(xml.contains("<selector name=\"geo:position\" scope=\"feed\"/>"));
        assert!(xml.contains("<operator name=\"within\"/>"));
        assert!(xml.contains("<selector name=\"x:camera-model\" scope=\"collection\"/>"));
        assert_eq!(parse_capabilities(&xml).unwrap(), caps);
    }

    #[test]
    fn unknown_scope_is_an_error() {
        let xml = format!(
            "<capabilities xmlns=\"{CAPS_NS}\"><selector name=\"title\" scope=\"galaxy\"/></capabilities>"
        );
        assert_eq!(parse_capabilities(&xml), Err(CapsError::UnknownScope("galaxy".into())));
    }

    #[test]
    fn embed_is_idempotent_and_discoverable() {
        let mut feed = Feed::new("urn:f", "A feed", Timestamp::epoch());
        feed.links.push(Link::new("http://example.org/"));
        assert_eq!(discover_from_feed(&feed), None);
        embed_capability_link(&mut feed, "http://example.org/caps");
        embed_capability_link(&mut feed, "http://example.org/caps2");
        let caps_links: Vec<_> = feed.links.iter().filter(|l| l.rel == CAPABILITY_REL).collect();
        assert_eq!(caps_links.len(), 1);
        assert_eq!(discover_from_feed(&feed), Some("http://example.org/caps2"));
    }
}
