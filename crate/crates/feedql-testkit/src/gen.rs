//! Seeded random generators for feeds, queries, capabilities, and pushdown
//! scenarios.
//!
//! The pushdown scenario generator follows one discipline: every source
//! contains a "chaff" entry (1990 timestamp, lone zz-chaff category, no geo,
//! no author), and every generated conjunct excludes it. Any conjunct pushed
//! to a source therefore removes at least that source's chaff entry from the
//! transfer, which is what makes the strict-reduction property testable.

use rand::seq::IndexedRandom;
use rand::Rng;

use feedql::atom::{Category, Content, ContentBody, Entry, Extension, Feed, Link, Person, Timestamp};
use feedql::capabilities::{Capabilities, Scope, Tier};
use feedql::geo::{GeoPoint, GeoRegion, GeoShape};
use feedql::query::{
    AtomField, CrossEntryFn, FilterExpr, Operator, Predicate, Query, Selector, Shaping, SortKey,
    SortOrder, TextPattern, Value,
};

pub const CATEGORIES: &[&str] = &["java", "jsp", "rust", "atom", "geo", "news", "sensor", "web"];
pub const AUTHORS: &[&str] = &["Alice", "Bob", "Carol", "Dave", "Eve"];
pub const WORDS: &[&str] = &["feed", "query", "entry", "report", "sensor", "update", "burst", "trace"];

/// 2009-04-01T00:00:00Z, the era all generated timestamps live in.
pub fn base_millis() -> i64 {
    Timestamp::parse("2009-04-01T00:00:00Z").unwrap().unix_millis()
}

fn random_time(rng: &mut impl Rng) -> Timestamp {
    // Up to ~23 days after base, whole seconds with occasional millis.
    let offset_s = rng.random_range(0..2_000_000_i64);
    let millis = if rng.random_bool(0.2) { rng.random_range(0..1000) } else { 0 };
    Timestamp::from_unix_millis(base_millis() + offset_s * 1000 + millis)
}

fn random_point(rng: &mut impl Rng) -> GeoPoint {
    GeoPoint::new(rng.random_range(-60.0..60.0), rng.random_range(-120.0..120.0)).unwrap()
}

fn random_shape(rng: &mut impl Rng) -> GeoShape {
    match rng.random_range(0..10) {
        0 => {
            let pts = (0..rng.random_range(2..5)).map(|_| random_point(rng)).collect();
            GeoShape::line(pts).unwrap()
        }
        1 => {
            let base = random_point(rng);
            let pts = (0..3)
                .map(|i| {
                    GeoPoint::new(
                        (base.lat + i as f64 * 0.3).clamp(-90.0, 90.0),
                        (base.lon + (i % 2) as f64 * 0.4).clamp(-180.0, 180.0),
                    )
                    .unwrap()
                })
                .collect();
            GeoShape::polygon(pts).unwrap()
        }
        2 => {
            let sw = random_point(rng);
            let ne = GeoPoint::new(
                (sw.lat + rng.random_range(0.1..2.0)).clamp(-90.0, 90.0),
                (sw.lon + rng.random_range(0.1..2.0)).clamp(-180.0, 180.0),
            )
            .unwrap();
            GeoShape::bbox(sw, ne).unwrap()
        }
        _ => GeoShape::Point(random_point(rng)),
    }
}

fn random_title(rng: &mut impl Rng) -> String {
    if rng.random_bool(0.1) {
        // exercise escaping and non-ASCII paths
        let specials = ["café & bistro", "a <b> c", "\"quoted\" title", "tabs\tand spaces"];
        return specials.choose(rng).unwrap().to_string();
    }
    format!(
        "Post {} {}",
        WORDS.choose(rng).unwrap(),
        rng.random_range(0..100)
    )
}

pub fn gen_entry(rng: &mut impl Rng, id: String) -> Entry {
    let mut entry = Entry::new(id, random_title(rng), random_time(rng));
    if rng.random_bool(0.6) {
        entry.published =
            Some(Timestamp::from_unix_millis(entry.updated.unix_millis() - rng.random_range(0..86_400_000)));
    }
    for _ in 0..rng.random_range(0..3) {
        let mut person = Person::named(*AUTHORS.choose(rng).unwrap());
        if rng.random_bool(0.5) {
            person.email = Some(format!("{}@example.org", person.name.to_lowercase()));
        }
        if rng.random_bool(0.3) {
            person.uri = Some(format!("http://example.org/~{}", person.name.to_lowercase()));
        }
        entry.authors.push(person);
    }
    let mut tags: Vec<&str> = CATEGORIES.to_vec();
    for _ in 0..rng.random_range(0..4) {
        if tags.is_empty() {
            break;
        }
        let i = rng.random_range(0..tags.len());
        let term = tags.remove(i);
        let mut category = Category::term(term);
        if rng.random_bool(0.3) {
            category.scheme = Some("http://example.org/tags".into());
        }
        entry.categories.push(category);
    }
    for _ in 0..rng.random_range(0..3) {
        let rel = ["alternate", "license", "related"].choose(rng).unwrap();
        entry.links.push(Link {
            href: format!("http://example.org/{}/{}", rel, rng.random_range(0..50)),
            rel: rel.to_string(),
            media_type: rng.random_bool(0.3).then(|| "text/html".to_string()),
        });
    }
    if rng.random_bool(0.5) {
        entry.summary = Some(format!("about {} #{}", WORDS.choose(rng).unwrap(), rng.random_range(0..1000)));
    }
    if rng.random_bool(0.3) {
        entry.content = Some(if rng.random_bool(0.5) {
            Content { media_type: Some("text".into()), body: ContentBody::Inline(random_title(rng)) }
        } else {
            Content {
                media_type: Some("text/html".into()),
                body: ContentBody::Src(format!("http://example.org/full/{}", rng.random_range(0..100))),
            }
        });
    }
    if rng.random_bool(0.7) {
        entry.geo = Some(random_shape(rng));
    }
    if rng.random_bool(0.3) {
        entry.extensions.push(Extension {
            namespace: ["http://example.org/ext", "http://example.org/media"].choose(rng).unwrap().to_string(),
            name: ["note", "rating"].choose(rng).unwrap().to_string(),
            value: format!("v{}", rng.random_range(0..100)),
        });
    }
    entry
}

pub fn gen_feed(rng: &mut impl Rng, max_entries: usize) -> Feed {
    let nonce: u32 = rng.random_range(0..1_000_000);
    let mut feed = Feed::new(
        format!("urn:gen:feed:{nonce}"),
        format!("Generated feed {nonce}"),
        random_time(rng),
    );
    if rng.random_bool(0.3) {
        feed.authors.push(Person::named(*AUTHORS.choose(rng).unwrap()));
    }
    if rng.random_bool(0.3) {
        feed.links.push(Link::with_rel(format!("http://example.org/f/{nonce}"), "self"));
    }
    if rng.random_bool(0.2) {
        feed.extensions.push(Extension {
            namespace: "http://example.org/ext".into(),
            name: "note".into(),
            value: "feed level".into(),
        });
    }
    let count = rng.random_range(0..=max_entries);
    for i in 0..count {
        feed.entries.push(gen_entry(rng, format!("urn:gen:{nonce}:{i}")));
    }
    if let Some(max) = feed.entries.iter().map(|e| e.updated).max() {
        feed.updated = max;
    }
    feed
}

#[derive(Debug, Clone, Default)]
pub struct QueryGenOptions {
    pub allow_cooccur: bool,
    pub allow_hidden: bool,
    /// Origins cooccur calls may reference.
    pub origins: Vec<String>,
}

fn gen_predicate(rng: &mut impl Rng, opts: &QueryGenOptions) -> Predicate {
    let mut kinds = vec!["cat-eq", "cat-eq", "cat-ne", "title", "author", "range", "geo", "link", "id", "summary"];
    if opts.allow_hidden {
        kinds.push("hidden");
    }
    match *kinds.choose(rng).unwrap() {
        "cat-eq" => Predicate {
            selector: Selector::Atom(AtomField::Category),
            op: Operator::Eq,
            value: Value::Text(TextPattern::new(*CATEGORIES.choose(rng).unwrap())),
        },
        "cat-ne" => Predicate {
            selector: Selector::Atom(AtomField::Category),
            op: Operator::Ne,
            value: Value::Text(TextPattern::new(*CATEGORIES.choose(rng).unwrap())),
        },
        "title" => {
            let word = WORDS.choose(rng).unwrap();
            let pattern = match rng.random_range(0..3) {
                0 => format!("Post {word}*"),
                1 => format!("*{word}*"),
                _ => "Post*".to_string(),
            };
            Predicate {
                selector: Selector::Atom(AtomField::Title),
                op: if rng.random_bool(0.8) { Operator::Eq } else { Operator::Ne },
                value: Value::Text(TextPattern::new(pattern)),
            }
        }
        "author" => Predicate {
            selector: Selector::Atom(AtomField::AuthorName),
            op: Operator::Eq,
            value: Value::Text(TextPattern::new(*AUTHORS.choose(rng).unwrap())),
        },
        "range" => {
            let field = if rng.random_bool(0.7) { AtomField::Updated } else { AtomField::Published };
            let op = [Operator::Lt, Operator::Le, Operator::Gt, Operator::Ge].choose(rng).unwrap();
            Predicate {
                selector: Selector::Atom(field),
                op: *op,
                value: Value::Time(random_time(rng)),
            }
        }
        "geo" => {
            let region = if rng.random_bool(0.6) {
                GeoRegion::radius(random_point(rng), rng.random_range(200.0..8000.0)).unwrap()
            } else {
                let sw = GeoPoint::new(rng.random_range(-60.0..0.0), rng.random_range(-120.0..0.0)).unwrap();
                let ne = GeoPoint::new(
                    sw.lat + rng.random_range(10.0..60.0),
                    sw.lon + rng.random_range(10.0..120.0),
                )
                .unwrap();
                GeoRegion::bbox(sw, ne).unwrap()
            };
            Predicate { selector: Selector::GeoPosition, op: Operator::Within, value: Value::Region(region) }
        }
        "link" => Predicate {
            selector: Selector::LinkHref { rel: "license".into() },
            op: Operator::Eq,
            value: Value::Text(TextPattern::new("http://example.org/license/*")),
        },
        "id" => Predicate {
            selector: Selector::Atom(AtomField::Id),
            op: Operator::Eq,
            value: Value::Text(TextPattern::new("urn:gen:*")),
        },
        "summary" => Predicate {
            selector: Selector::Atom(AtomField::Summary),
            op: Operator::Eq,
            value: Value::Text(TextPattern::new(format!("*{}*", WORDS.choose(rng).unwrap()))),
        },
        "hidden" => Predicate {
            selector: Selector::Hidden(["camera-model", "import-batch"].choose(rng).unwrap().to_string()),
            op: if rng.random_bool(0.8) { Operator::Eq } else { Operator::Ne },
            value: Value::Text(TextPattern::new(if rng.random_bool(0.5) { "Canon*" } else { "batch-*" })),
        },
        _ => unreachable!(),
    }
}

pub fn gen_filter(rng: &mut impl Rng, opts: &QueryGenOptions) -> FilterExpr {
    let conjuncts: Vec<FilterExpr> = (0..rng.random_range(1..4))
        .map(|_| {
            if rng.random_bool(0.3) {
                FilterExpr::Or(vec![
                    FilterExpr::Predicate(gen_predicate(rng, opts)),
                    FilterExpr::Predicate(gen_predicate(rng, opts)),
                ])
            } else {
                FilterExpr::Predicate(gen_predicate(rng, opts))
            }
        })
        .collect();
    if conjuncts.len() == 1 {
        conjuncts.into_iter().next().unwrap()
    } else {
        FilterExpr::And(conjuncts)
    }
}

fn gen_cross_entry(rng: &mut impl Rng, opts: &QueryGenOptions) -> Vec<CrossEntryFn> {
    let mut out = Vec::new();
    for _ in 0..rng.random_range(0..3_u32) {
        let mut choices = vec!["window", "cluster"];
        if opts.allow_cooccur && opts.origins.len() >= 2 {
            choices.push("cooccur");
        }
        out.push(match *choices.choose(rng).unwrap() {
            "window" => CrossEntryFn::Window {
                duration_s: rng.random_range(600..1_000_000),
                min_count: rng.random_range(1..5),
            },
            "cluster" => CrossEntryFn::Cluster {
                radius_km: rng.random_range(100.0..8000.0),
                min_count: rng.random_range(1..4),
            },
            "cooccur" => {
                let a = opts.origins.choose(rng).unwrap().clone();
                let b = loop {
                    let candidate = opts.origins.choose(rng).unwrap();
                    if *candidate != a {
                        break candidate.clone();
                    }
                };
                CrossEntryFn::Cooccur {
                    origin_a: a,
                    origin_b: b,
                    radius_km: rng.random_range(500.0..10_000.0),
                    duration_s: rng.random_bool(0.5).then(|| rng.random_range(10_000..2_000_000)),
                }
            }
            _ => unreachable!(),
        });
    }
    out
}

pub fn gen_shaping(rng: &mut impl Rng) -> Shaping {
    let sort_by = rng.random_bool(0.4).then(|| match rng.random_range(0..4) {
        0 => SortKey::Updated,
        1 => SortKey::Published,
        2 => SortKey::Title,
        _ => SortKey::GeoDistance(random_point(rng)),
    });
    Shaping {
        order: (sort_by.is_some() && rng.random_bool(0.5)).then(|| {
            if rng.random_bool(0.5) {
                SortOrder::Asc
            } else {
                SortOrder::Desc
            }
        }),
        sort_by,
        group_by: rng.random_bool(0.25).then(|| {
            match rng.random_range(0..3) {
                0 => Selector::Atom(AtomField::Category),
                1 => Selector::Atom(AtomField::AuthorName),
                _ => Selector::Atom(AtomField::Title),
            }
        }),
        max_results: rng.random_bool(0.4).then(|| rng.random_range(1..60)),
        start_index: rng.random_bool(0.25).then(|| rng.random_range(1..8)),
    }
}

pub fn gen_query(rng: &mut impl Rng, opts: &QueryGenOptions) -> Query {
    Query {
        filter: rng.random_bool(0.7).then(|| gen_filter(rng, opts)),
        cross_entry: gen_cross_entry(rng, opts),
        shaping: gen_shaping(rng),
    }
}

pub fn gen_capabilities(rng: &mut impl Rng) -> Capabilities {
    let full = Capabilities::full_language();
    let mut caps = Capabilities::empty();
    caps.selectors = full
        .selectors
        .iter()
        .filter(|_| rng.random_bool(0.7))
        .cloned()
        .collect();
    caps.operators = full.operators.iter().filter(|_| rng.random_bool(0.8)).cloned().collect();
    caps.functions = full.functions.iter().filter(|_| rng.random_bool(0.7)).cloned().collect();
    caps.shaping = full.shaping.iter().filter(|_| rng.random_bool(0.8)).cloned().collect();
    for field in ["camera-model", "import-batch"] {
        if rng.random_bool(0.3) {
            caps.selectors.push((format!("x:{field}"), Scope::Collection));
        }
    }
    caps.tier = if rng.random_bool(0.5) { Tier::Open } else { Tier::Keyed };
    caps
}

/// A generated multi-source scenario for pushdown soundness checks.
pub struct PushdownScenario {
    pub sources: Vec<(String, Feed)>,
    pub caps: Vec<(String, Option<Capabilities>)>,
    pub query: Query,
}

/// Every conjunct this generator emits excludes the per-source chaff entry:
/// positive text matches against the real vocabulary, `=ge=`/`=gt=` bounds
/// after 2009, and geo predicates (chaff has no geo). No bare `!=` and no
/// upper timestamp bounds are generated here.
pub fn gen_pushdown_scenario(rng: &mut impl Rng) -> PushdownScenario {
    let source_count = rng.random_range(2..=4);
    let origins: Vec<String> =
        (0..source_count).map(|i| format!("http://src{i}.example/feeds/s{i}")).collect();

    let mut sources = Vec::new();
    for (i, origin) in origins.iter().enumerate() {
        let mut feed = Feed::new(
            format!("urn:src:{i}"),
            format!("Source {i}"),
            Timestamp::from_unix_millis(base_millis()),
        );
        let count = rng.random_range(1..=29);
        for j in 0..count {
            let id = if rng.random_bool(0.1) {
                format!("urn:shared:{j}")
            } else {
                format!("urn:s{i}:e{j}")
            };
            let mut entry = Entry::new(id, format!("Post {} {j}", WORDS.choose(rng).unwrap()), random_time(rng));
            if rng.random_bool(0.5) {
                entry.published = Some(Timestamp::from_unix_millis(
                    entry.updated.unix_millis() - rng.random_range(0..43_200_000),
                ));
            }
            for _ in 0..rng.random_range(0..3) {
                entry.categories.push(Category::term(*CATEGORIES.choose(rng).unwrap()));
            }
            if rng.random_bool(0.5) {
                entry.authors.push(Person::named(*AUTHORS.choose(rng).unwrap()));
            }
            if rng.random_bool(0.8) {
                entry.geo = Some(GeoShape::Point(random_point(rng)));
            }
            feed.entries.push(entry);
        }
        let chaff_slot = rng.random_range(0..=feed.entries.len());
        let mut chaff = Entry::new(
            format!("urn:chaff:{i}"),
            "~chaff~",
            Timestamp::parse("1990-01-01T00:00:00Z").unwrap(),
        );
        chaff.categories.push(Category::term("zz-chaff"));
        feed.entries.insert(chaff_slot, chaff);
        if let Some(max) = feed.entries.iter().map(|e| e.updated).max() {
            feed.updated = max;
        }
        sources.push((origin.clone(), feed));
    }

    let caps = origins
        .iter()
        .map(|origin| {
            let c = match rng.random_range(0..4) {
                0 => None,
                1 => Some(Capabilities::full_language()),
                _ => {
                    let full = Capabilities::full_language();
                    let mut partial = Capabilities::empty();
                    partial.selectors =
                        full.selectors.iter().filter(|_| rng.random_bool(0.6)).cloned().collect();
                    partial.operators =
                        full.operators.iter().filter(|_| rng.random_bool(0.8)).cloned().collect();
                    partial.functions = full.functions.clone();
                    partial.shaping = full.shaping.clone();
                    Some(partial)
                }
            };
            (origin.clone(), c)
        })
        .collect();

    let filter = rng.random_bool(0.85).then(|| {
        let conjuncts: Vec<FilterExpr> = (0..rng.random_range(1..4))
            .map(|_| {
                if rng.random_bool(0.25) {
                    FilterExpr::Or(vec![
                        FilterExpr::Predicate(chaff_excluding_predicate(rng)),
                        FilterExpr::Predicate(chaff_excluding_predicate(rng)),
                    ])
                } else {
                    FilterExpr::Predicate(chaff_excluding_predicate(rng))
                }
            })
            .collect();
        if conjuncts.len() == 1 {
            conjuncts.into_iter().next().unwrap()
        } else {
            FilterExpr::And(conjuncts)
        }
    });

    let query = Query {
        filter,
        cross_entry: gen_cross_entry(
            rng,
            &QueryGenOptions { allow_cooccur: true, allow_hidden: false, origins: origins.clone() },
        ),
        shaping: if rng.random_bool(0.5) { gen_shaping(rng) } else { Shaping::default() },
    };

    PushdownScenario { sources, caps, query }
}

fn chaff_excluding_predicate(rng: &mut impl Rng) -> Predicate {
    match rng.random_range(0..5) {
        0 => Predicate {
            selector: Selector::Atom(AtomField::Category),
            op: Operator::Eq,
            value: Value::Text(TextPattern::new(*CATEGORIES.choose(rng).unwrap())),
        },
        1 => Predicate {
            selector: Selector::Atom(AtomField::Title),
            op: Operator::Eq,
            value: Value::Text(TextPattern::new(format!("Post {}*", WORDS.choose(rng).unwrap()))),
        },
        2 => Predicate {
            selector: Selector::Atom(AtomField::AuthorName),
            op: Operator::Eq,
            value: Value::Text(TextPattern::new(*AUTHORS.choose(rng).unwrap())),
        },
        3 => Predicate {
            selector: Selector::Atom(AtomField::Updated),
            op: if rng.random_bool(0.5) { Operator::Ge } else { Operator::Gt },
            value: Value::Time(Timestamp::from_unix_millis(
                base_millis() + rng.random_range(0..500_000_000),
            )),
        },
        _ => Predicate {
            selector: Selector::GeoPosition,
            op: Operator::Within,
            value: Value::Region(
                GeoRegion::radius(random_point(rng), rng.random_range(500.0..10_000.0)).unwrap(),
            ),
        },
    }
}
