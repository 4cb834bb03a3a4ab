//! Atom serialization. Output is deterministic: the same feed value always
//! yields the same bytes, which is what makes plain feeds cacheable and
//! archive documents byte-stable.

use super::{
    validate_feed, AtomError, Content, ContentBody, Entry, Extension, Feed, Link, Person,
    ATOM_NS, FEEDSET_NS, GEORSS_NS,
};
use crate::geo::GeoShape;

/// Serializes a feed to namespace-well-formed Atom XML.
///
/// The feed must satisfy all invariants (see [`validate_feed`]); otherwise
/// `InvariantViolation` is returned.
pub fn serialize_feed(feed: &Feed) -> Result<String, AtomError> {
    let violations = validate_feed(feed);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(AtomError::InvariantViolation(list.join("; ")));
    }

    let table = NamespaceTable::build(feed);
    let mut out = String::with_capacity(1024);
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!("<feed xmlns=\"{ATOM_NS}\""));
    for (ns, prefix) in &table.declared {
        out.push_str(&format!(" xmlns:{prefix}=\"{}\"", esc_attr(ns)));
    }
    out.push_str(">\n");

    write_text_element(&mut out, 1, "id", &feed.id);
    write_text_element(&mut out, 1, "title", &feed.title);
    write_text_element(&mut out, 1, "updated", &feed.updated.to_rfc3339());
    for person in &feed.authors {
        write_person(&mut out, 1, person);
    }
    for link in &feed.links {
        write_link(&mut out, 1, link);
    }
    for ext in &feed.extensions {
        write_extension(&mut out, 1, ext, &table);
    }
    for entry in &feed.entries {
        write_entry(&mut out, entry, &table);
    }
    out.push_str("</feed>\n");
    Ok(out)
}

fn write_entry(out: &mut String, entry: &Entry, table: &NamespaceTable) {
    out.push_str("  <entry>\n");
    write_text_element(out, 2, "id", &entry.id);
    write_text_element(out, 2, "title", &entry.title);
    write_text_element(out, 2, "updated", &entry.updated.to_rfc3339());
    if let Some(published) = entry.published {
        write_text_element(out, 2, "published", &published.to_rfc3339());
    }
    for person in &entry.authors {
        write_person(out, 2, person);
    }
    for category in &entry.categories {
        indent(out, 2);
        out.push_str(&format!("<category term=\"{}\"", esc_attr(&category.term)));
        if let Some(scheme) = &category.scheme {
            out.push_str(&format!(" scheme=\"{}\"", esc_attr(scheme)));
        }
        if let Some(label) = &category.label {
            out.push_str(&format!(" label=\"{}\"", esc_attr(label)));
        }
        out.push_str("/>\n");
    }
    for link in &entry.links {
        write_link(out, 2, link);
    }
    if let Some(summary) = &entry.summary {
        write_text_element(out, 2, "summary", summary);
    }
    if let Some(content) = &entry.content {
        write_content(out, 2, content);
    }
    if let Some(shape) = &entry.geo {
        write_geo(out, 2, shape);
    }
    if let Some(origin) = &entry.origin {
        indent(out, 2);
        out.push_str(&format!("<fs:origin href=\"{}\"/>\n", esc_attr(origin)));
    }
    for ext in &entry.extensions {
        write_extension(out, 2, ext, table);
    }
    out.push_str("  </entry>\n");
}

fn write_person(out: &mut String, level: usize, person: &Person) {
    indent(out, level);
    out.push_str("<author>\n");
    write_text_element(out, level + 1, "name", &person.name);
    if let Some(email) = &person.email {
        write_text_element(out, level + 1, "email", email);
    }
    if let Some(uri) = &person.uri {
        write_text_element(out, level + 1, "uri", uri);
    }
    indent(out, level);
    out.push_str("</author>\n");
}

fn write_link(out: &mut String, level: usize, link: &Link) {
    indent(out, level);
    out.push_str(&format!("<link href=\"{}\" rel=\"{}\"", esc_attr(&link.href), esc_attr(&link.rel)));
    if let Some(media_type) = &link.media_type {
        out.push_str(&format!(" type=\"{}\"", esc_attr(media_type)));
    }
    out.push_str("/>\n");
}

fn write_content(out: &mut String, level: usize, content: &Content) {
    indent(out, level);
    out.push_str("<content");
    if let Some(media_type) = &content.media_type {
        out.push_str(&format!(" type=\"{}\"", esc_attr(media_type)));
    }
    match &content.body {
        ContentBody::Src(src) => out.push_str(&format!(" src=\"{}\"/>\n", esc_attr(src))),
        ContentBody::Inline(text) => out.push_str(&format!(">{}</content>\n", esc_text(text))),
    }
}

fn write_geo(out: &mut String, level: usize, shape: &GeoShape) {
    indent(out, level);
    let coords: Vec<String> = shape
        .coords()
        .iter()
        .flat_map(|p| [p.lat.to_string(), p.lon.to_string()])
        .collect();
    out.push_str(&format!(
        "<georss:{kind}>{coords}</georss:{kind}>\n",
        kind = shape.kind(),
        coords = coords.join(" ")
    ));
}

fn write_extension(out: &mut String, level: usize, ext: &Extension, table: &NamespaceTable) {
    indent(out, level);
    match table.prefix_for(&ext.namespace) {
        Prefix::Default => out.push_str(&format!(
            "<{name}>{value}</{name}>\n",
            name = ext.name,
            value = esc_text(&ext.value)
        )),
        Prefix::None => out.push_str(&format!(
            "<{name} xmlns=\"\">{value}</{name}>\n",
            name = ext.name,
            value = esc_text(&ext.value)
        )),
        Prefix::Named(p) => out.push_str(&format!(
            "<{p}:{name}>{value}</{p}:{name}>\n",
            name = ext.name,
            value = esc_text(&ext.value)
        )),
    }
}

enum Prefix<'a> {
    /// The default (Atom) namespace; element written unprefixed.
    Default,
    /// No namespace at all; element carries `xmlns=""`.
    None,
    Named(&'a str),
}

/// Prefixes for every namespace the document uses. georss and fs are always
/// declared so geo shapes and origin annotations never need local
/// declarations; other extension namespaces get ns1, ns2, ... in first-use
/// order, which keeps output deterministic.
struct NamespaceTable {
    declared: Vec<(String, String)>,
}

impl NamespaceTable {
    fn build(feed: &Feed) -> Self {
        let mut declared = vec![
            (GEORSS_NS.to_string(), "georss".to_string()),
            (FEEDSET_NS.to_string(), "fs".to_string()),
        ];
        let mut next = 1;
        let mut note = |ns: &str, declared: &mut Vec<(String, String)>| {
            if ns.is_empty() || ns == ATOM_NS {
                return;
            }
            if !declared.iter().any(|(n, _)| n == ns) {
                declared.push((ns.to_string(), format!("ns{next}")));
                next += 1;
            }
        };
        for ext in &feed.extensions {
            note(&ext.namespace, &mut declared);
        }
        for entry in &feed.entries {
            for ext in &entry.extensions {
                note(&ext.namespace, &mut declared);
            }
        }
        NamespaceTable { declared }
    }

    fn prefix_for(&self, ns: &str) -> Prefix<'_> {
        if ns == ATOM_NS {
            return Prefix::Default;
        }
        if ns.is_empty() {
            return Prefix::None;
        }
        match self.declared.iter().find(|(n, _)| n == ns) {
            Some((_, p)) => Prefix::Named(p),
            None => Prefix::None,
        }
    }
}

fn write_text_element(out: &mut String, level: usize, name: &str, value: &str) {
    indent(out, level);
    out.push_str(&format!("<{name}>{}</{name}>\n", esc_text(value)));
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn esc_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(c),
        }
    }
    out
}

fn esc_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}
