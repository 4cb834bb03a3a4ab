//! Atom parsing on top of a namespace-aware XML DOM.

use roxmltree::{Document, Node};

use super::{
    validate_feed, AtomError, Category, Content, ContentBody, Entry, Extension, Feed, Link,
    Person, Timestamp, ATOM_NS, FEEDSET_NS, GEORSS_NS,
};
use crate::geo::{GeoPoint, GeoShape};

/// Parses an Atom feed document. Lenient: required elements must be present,
/// geo markup must be well-formed, but value-level invariants (nonempty ids,
/// duplicate entry ids) are left to [`validate_feed`].
pub fn parse_feed(xml: &str) -> Result<Feed, AtomError> {
    let doc = Document::parse(xml).map_err(|e| AtomError::MalformedXml(e.to_string()))?;
    let root = doc.root_element();
    if !is_atom(root, "feed") {
        return Err(AtomError::MalformedXml(format!(
            "root element is {:?}, expected an Atom feed",
            root.tag_name().name()
        )));
    }

    let mut id = None;
    let mut title = None;
    let mut updated = None;
    let mut links = Vec::new();
    let mut authors = Vec::new();
    let mut entries = Vec::new();
    let mut extensions = Vec::new();

    for child in root.children().filter(|n| n.is_element()) {
        let ns = child.tag_name().namespace().unwrap_or("");
        let name = child.tag_name().name();
        match (ns, name) {
            (ATOM_NS, "id") if id.is_none() => id = Some(text_of(child)),
            (ATOM_NS, "title") if title.is_none() => title = Some(text_of(child)),
            (ATOM_NS, "updated") if updated.is_none() => {
                updated = Some(Timestamp::parse(&text_of(child))?)
            }
            (ATOM_NS, "link") => links.push(parse_link(child)?),
            (ATOM_NS, "author") => authors.push(parse_person(child)?),
            (ATOM_NS, "entry") => entries.push(parse_entry(child)?),
            _ => extensions.push(extension_of(child)),
        }
    }

    Ok(Feed {
        id: id.ok_or(AtomError::MissingRequired("feed.id".into()))?,
        title: title.ok_or(AtomError::MissingRequired("feed.title".into()))?,
        updated: updated.ok_or(AtomError::MissingRequired("feed.updated".into()))?,
        links,
        authors,
        entries,
        extensions,
    })
}

/// Like [`parse_feed`], but additionally requires the parsed feed to pass
/// [`validate_feed`]; any violation is an error.
pub fn parse_feed_strict(xml: &str) -> Result<Feed, AtomError> {
    let feed = parse_feed(xml)?;
    let violations = validate_feed(&feed);
    if violations.is_empty() {
        Ok(feed)
    } else {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        Err(AtomError::InvariantViolation(list.join("; ")))
    }
}

fn parse_entry(node: Node) -> Result<Entry, AtomError> {
    let mut id = None;
    let mut title = None;
    let mut updated = None;
    let mut published = None;
    let mut authors = Vec::new();
    let mut categories = Vec::new();
    let mut links = Vec::new();
    let mut summary = None;
    let mut content = None;
    let mut geo = None;
    let mut origin = None;
    let mut extensions = Vec::new();

    for child in node.children().filter(|n| n.is_element()) {
        let ns = child.tag_name().namespace().unwrap_or("");
        let name = child.tag_name().name();
        match (ns, name) {
            (ATOM_NS, "id") if id.is_none() => id = Some(text_of(child)),
            (ATOM_NS, "title") if title.is_none() => title = Some(text_of(child)),
            (ATOM_NS, "updated") if updated.is_none() => {
                updated = Some(Timestamp::parse(&text_of(child))?)
            }
            (ATOM_NS, "published") if published.is_none() => {
                published = Some(Timestamp::parse(&text_of(child))?)
            }
            (ATOM_NS, "author") => authors.push(parse_person(child)?),
            (ATOM_NS, "category") => categories.push(parse_category(child)?),
            (ATOM_NS, "link") => links.push(parse_link(child)?),
            (ATOM_NS, "summary") if summary.is_none() => summary = Some(text_of(child)),
            (ATOM_NS, "content") if content.is_none() => content = Some(parse_content(child)),
            (GEORSS_NS, "point" | "line" | "polygon" | "box") if geo.is_none() => {
                geo = Some(parse_geo(name, &text_of(child))?)
            }
            (FEEDSET_NS, "origin") if origin.is_none() && child.has_attribute("href") => {
                origin = Some(child.attribute("href").unwrap_or("").to_string())
            }
            _ => extensions.push(extension_of(child)),
        }
    }

    Ok(Entry {
        id: id.ok_or(AtomError::MissingRequired("entry.id".into()))?,
        title: title.ok_or(AtomError::MissingRequired("entry.title".into()))?,
        updated: updated.ok_or(AtomError::MissingRequired("entry.updated".into()))?,
        published,
        authors,
        categories,
        links,
        summary,
        content,
        geo,
        origin,
        extensions,
    })
}

fn parse_person(node: Node) -> Result<Person, AtomError> {
    let mut person = Person { name: String::new(), email: None, uri: None };
    for child in node.children().filter(|n| n.is_element()) {
        if child.tag_name().namespace() != Some(ATOM_NS) {
            continue;
        }
        match child.tag_name().name() {
            "name" => person.name = text_of(child),
            "email" => person.email = Some(text_of(child)),
            "uri" => person.uri = Some(text_of(child)),
            _ => {}
        }
    }
    Ok(person)
}

fn parse_category(node: Node) -> Result<Category, AtomError> {
    Ok(Category {
        term: node.attribute("term").unwrap_or("").to_string(),
        scheme: node.attribute("scheme").map(str::to_string),
        label: node.attribute("label").map(str::to_string),
    })
}

fn parse_link(node: Node) -> Result<Link, AtomError> {
    Ok(Link {
        href: node.attribute("href").unwrap_or("").to_string(),
        rel: node.attribute("rel").unwrap_or("alternate").to_string(),
        media_type: node.attribute("type").map(str::to_string),
    })
}

fn parse_content(node: Node) -> Content {
    let media_type = node.attribute("type").map(str::to_string);
    match node.attribute("src") {
        Some(src) => Content { media_type, body: ContentBody::Src(src.to_string()) },
        None => Content { media_type, body: ContentBody::Inline(text_of(node)) },
    }
}

/// GeoRSS Simple coordinates: whitespace-separated "lat lon" pairs.
fn parse_geo(kind: &str, text: &str) -> Result<GeoShape, AtomError> {
    let mut numbers = Vec::new();
    for token in text.split_whitespace() {
        let value: f64 = token
            .parse()
            .map_err(|_| AtomError::BadGeo(format!("bad coordinate {token:?}")))?;
        numbers.push(value);
    }
    if numbers.len() % 2 != 0 {
        return Err(AtomError::BadGeo(format!(
            "odd coordinate count {} in georss:{kind}",
            numbers.len()
        )));
    }
    let points: Vec<GeoPoint> = numbers
        .chunks(2)
        .map(|pair| GeoPoint::new(pair[0], pair[1]))
        .collect::<Result<_, _>>()
        .map_err(|e| AtomError::BadGeo(e.to_string()))?;

    let bad = |msg: String| AtomError::BadGeo(msg);
    match kind {
        "point" => {
            if points.len() != 1 {
                return Err(bad(format!("point needs 1 pair, got {}", points.len())));
            }
            Ok(GeoShape::Point(points[0]))
        }
        "line" => GeoShape::line(points).map_err(|e| bad(e.to_string())),
        "polygon" => GeoShape::polygon(points).map_err(|e| bad(e.to_string())),
        "box" => {
            if points.len() != 2 {
                return Err(bad(format!("box needs 2 pairs, got {}", points.len())));
            }
            GeoShape::bbox(points[0], points[1]).map_err(|e| bad(e.to_string()))
        }
        _ => unreachable!("caller matches georss kinds"),
    }
}

fn extension_of(node: Node) -> Extension {
    Extension {
        namespace: node.tag_name().namespace().unwrap_or("").to_string(),
        name: node.tag_name().name().to_string(),
        value: text_of(node),
    }
}

fn text_of(node: Node) -> String {
    node.descendants().filter(|n| n.is_text()).filter_map(|n| n.text()).collect()
}

fn is_atom(node: Node, name: &str) -> bool {
    node.tag_name().namespace() == Some(ATOM_NS) && node.tag_name().name() == name
}
