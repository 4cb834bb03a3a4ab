//! Hand-built fixtures shared by unit, integration, and acceptance tests.

use std::collections::BTreeMap;

use feedql::atom::{Category, Entry, Feed, Person, Timestamp};
use feedql::collection::{Collection, FeedMeta, Member};
use feedql::geo::GeoShape;

pub fn ts(text: &str) -> Timestamp {
    Timestamp::parse(text).unwrap_or_else(|e| panic!("fixture timestamp {text:?}: {e}"))
}

pub fn entry(id: &str, title: &str, updated: &str) -> Entry {
    Entry::new(id, title, ts(updated))
}

pub fn tagged(id: &str, title: &str, updated: &str, tags: &[&str]) -> Entry {
    let mut e = entry(id, title, updated);
    e.categories = tags.iter().map(|t| Category::term(*t)).collect();
    e
}

pub fn at(mut e: Entry, lat: f64, lon: f64) -> Entry {
    e.geo = Some(GeoShape::point(lat, lon).unwrap());
    e
}

pub fn by(mut e: Entry, author: &str) -> Entry {
    e.authors.push(Person::named(author));
    e
}

pub fn feed_of(entries: Vec<Entry>) -> Feed {
    let updated = entries.iter().map(|e| e.updated).max().unwrap_or_else(Timestamp::epoch);
    let mut feed = Feed::new("urn:fixture:feed", "Fixture feed", updated);
    feed.entries = entries;
    feed
}

/// Six entries with known tags, built for the category query triple:
/// java-and-jsp selects {e2, e6}, java-and-not-jsp selects {e1, e4},
/// java-or-jsp selects {e1, e2, e3, e4, e6}.
pub fn java_jsp_feed() -> Feed {
    feed_of(vec![
        tagged("urn:q:e1", "Plain java post", "2009-04-01T10:00:00Z", &["java"]),
        tagged("urn:q:e2", "Java on the server", "2009-04-01T11:00:00Z", &["java", "jsp"]),
        tagged("urn:q:e3", "Templating", "2009-04-01T12:00:00Z", &["jsp"]),
        tagged("urn:q:e4", "Tuning the JVM", "2009-04-01T13:00:00Z", &["java", "gc"]),
        tagged("urn:q:e5", "Something else", "2009-04-01T14:00:00Z", &["rust"]),
        tagged("urn:q:e6", "Tag soup", "2009-04-01T15:00:00Z", &["java", "jsp", "web"]),
    ])
}

/// Five entries published at 10:00, 10:10, 10:20, 10:30, and 11:45. With
/// window(3600, 4) the first four form a qualifying burst and the straggler
/// does not.
pub fn burst_feed() -> Feed {
    let make = |i: usize, published: &str| {
        let mut e = entry(
            &format!("urn:burst:e{i}"),
            &format!("Burst {i}"),
            "2009-04-01T12:00:00Z",
        );
        e.published = Some(ts(published));
        e
    };
    feed_of(vec![
        make(1, "2009-04-01T10:00:00Z"),
        make(2, "2009-04-01T10:10:00Z"),
        make(3, "2009-04-01T10:20:00Z"),
        make(4, "2009-04-01T10:30:00Z"),
        make(5, "2009-04-01T11:45:00Z"),
    ])
}

/// A photo collection of five members; two have a hidden camera-model
/// starting with "Canon".
pub fn photo_collection() -> Collection {
    let meta = FeedMeta::new("urn:fixture:photos", "Photo stream");
    let mut collection = Collection::new("photos", meta, 10, 10).unwrap();
    let specs: [(&str, &str, Option<&str>); 5] = [
        ("urn:p:1", "Sunrise", Some("Canon EOS 5D")),
        ("urn:p:2", "Harbor", Some("Nikon D90")),
        ("urn:p:3", "Market", Some("Canon PowerShot")),
        ("urn:p:4", "Alley", Some("Leica M8")),
        ("urn:p:5", "Rooftop", None),
    ];
    for (i, (id, title, camera)) in specs.iter().enumerate() {
        let e = at(
            entry(id, title, &format!("2009-04-0{}T10:00:00Z", i + 1)),
            10.0 + i as f64,
            20.0,
        );
        let mut hidden = BTreeMap::new();
        if let Some(camera) = camera {
            hidden.insert("camera-model".to_string(), camera.to_string());
        }
        hidden.insert("import-batch".to_string(), format!("batch-{i}"));
        collection = collection.upsert_member(Member { entry: e, hidden }).unwrap();
    }
    collection
}

/// 25 members, page_size = archive_size = 10, inserted oldest-first one hour
/// apart. Ids are m01..m25.
pub fn collection_25() -> Collection {
    sequential_collection("news", 25, 10, 10)
}

pub fn sequential_collection(
    name: &str,
    count: usize,
    page_size: usize,
    archive_size: usize,
) -> Collection {
    let meta = FeedMeta::new(format!("urn:fixture:{name}"), format!("Fixture {name}"));
    let mut collection = Collection::new(name, meta, page_size, archive_size).unwrap();
    let base = ts("2009-04-01T00:00:00Z").unix_millis();
    for i in 1..=count {
        let updated = Timestamp::from_unix_millis(base + (i as i64) * 3_600_000);
        let e = Entry::new(format!("urn:{name}:m{i:02}"), format!("Item {i:02}"), updated);
        collection = collection.upsert_member(Member::of(e)).unwrap();
    }
    collection
}
