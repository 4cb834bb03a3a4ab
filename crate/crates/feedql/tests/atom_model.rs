//! Parsing, validation, and round-trip behavior of the Atom model.

use feedql::atom::{
    parse_feed, parse_feed_strict, serialize_feed, validate_feed, AtomError, Extension, Feed,
    Timestamp,
};
use feedql::geo::{GeoPoint, GeoShape};
use feedql_testkit::gen;

const MINIMAL: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<feed xmlns="http://www.w3.org/2005/Atom">
  <id>urn:minimal</id>
  <title>Minimal</title>
  <updated>2009-04-01T00:00:00Z</updated>
</feed>"#;

#[test]
fn minimal_feed_parses_with_no_entries() {
    let feed = parse_feed(MINIMAL).unwrap();
    assert_eq!(feed.id, "urn:minimal");
    assert_eq!(feed.title, "Minimal");
    assert!(feed.entries.is_empty());
}

fn entry_doc(body: &str) -> String {
    format!(
        r#"<?xml version="1.0"?>
<feed xmlns="http://www.w3.org/2005/Atom" xmlns:georss="http://www.georss.org/georss">
  <id>urn:f</id><title>F</title><updated>2009-04-01T00:00:00Z</updated>
  <entry>
    <id>urn:e1</id><title>E</title><updated>2009-04-01T00:00:00Z</updated>
    {body}
  </entry>
</feed>"#
    )
}

#[test]
fn georss_point_maps_to_geo() {
    let feed = parse_feed(&entry_doc("<georss:point>45.256 -71.92</georss:point>")).unwrap();
    assert_eq!(
        feed.entries[0].geo,
        Some(GeoShape::Point(GeoPoint { lat: 45.256, lon: -71.92 }))
    );
}

#[test]
fn out_of_range_latitude_is_bad_geo() {
    let result = parse_feed(&entry_doc("<georss:point>95.0 0.0</georss:point>"));
    assert!(matches!(result, Err(AtomError::BadGeo(_))), "got {result:?}");
}

#[test]
fn odd_coordinate_count_is_bad_geo() {
    let result = parse_feed(&entry_doc("<georss:line>1 2 3</georss:line>"));
    assert!(matches!(result, Err(AtomError::BadGeo(_))));
}

#[test]
fn box_requires_sw_before_ne() {
    let result = parse_feed(&entry_doc("<georss:box>10 0 0 10</georss:box>"));
    assert!(matches!(result, Err(AtomError::BadGeo(_))));
    let ok = parse_feed(&entry_doc("<georss:box>0 0 10 10</georss:box>")).unwrap();
    assert!(matches!(ok.entries[0].geo, Some(GeoShape::Box { .. })));
}

#[test]
fn missing_required_elements_are_named() {
    let xml = r#"<feed xmlns="http://www.w3.org/2005/Atom"><id>urn:f</id><title>F</title></feed>"#;
    assert_eq!(parse_feed(xml), Err(AtomError::MissingRequired("feed.updated".into())));

    let xml = r#"<feed xmlns="http://www.w3.org/2005/Atom">
      <id>urn:f</id><title>F</title><updated>2009-04-01T00:00:00Z</updated>
      <entry><title>E</title><updated>2009-04-01T00:00:00Z</updated></entry>
    </feed>"#;
    assert_eq!(parse_feed(xml), Err(AtomError::MissingRequired("entry.id".into())));
}

#[test]
fn not_well_formed_is_malformed() {
    assert!(matches!(parse_feed("<feed>"), Err(AtomError::MalformedXml(_))));
    assert!(matches!(parse_feed("plain text"), Err(AtomError::MalformedXml(_))));
}

#[test]
fn non_atom_root_is_malformed() {
    let xml = r#"<rss version="2.0"><channel/></rss>"#;
    assert!(matches!(parse_feed(xml), Err(AtomError::MalformedXml(_))));
}

#[test]
fn foreign_markup_survives_a_cycle() {
    let xml = r#"<?xml version="1.0"?>
<feed xmlns="http://www.w3.org/2005/Atom" xmlns:media="http://example.org/media">
  <id>urn:f</id><title>F</title><updated>2009-04-01T00:00:00Z</updated>
  <media:keywords>one two</media:keywords>
  <entry>
    <id>urn:e1</id><title>E</title><updated>2009-04-01T00:00:00Z</updated>
    <media:credit>somebody</media:credit>
    <rights>CC-BY</rights>
  </entry>
</feed>"#;
    let feed = parse_feed(xml).unwrap();
    assert_eq!(
        feed.extensions,
        vec![Extension {
            namespace: "http://example.org/media".into(),
            name: "keywords".into(),
            value: "one two".into()
        }]
    );
    // unmodeled Atom elements ride along as extensions too
    assert_eq!(feed.entries[0].extensions.len(), 2);
    let cycled = parse_feed(&serialize_feed(&feed).unwrap()).unwrap();
    assert_eq!(cycled, feed);
}

#[test]
fn round_trip_on_generated_feeds() {
    let mut rng = feedql_testkit::rng(1);
    for i in 0..200 {
        let feed = gen::gen_feed(&mut rng, 50);
        let xml = serialize_feed(&feed).unwrap_or_else(|e| panic!("serialize #{i}: {e}"));
        let back = parse_feed(&xml).unwrap_or_else(|e| panic!("reparse #{i}: {e}\n{xml}"));
        assert_eq!(back, feed, "feed #{i} failed the round trip");
    }
}

#[test]
fn serialization_is_deterministic() {
    let mut rng = feedql_testkit::rng(2);
    let feed = gen::gen_feed(&mut rng, 30);
    assert_eq!(serialize_feed(&feed).unwrap(), serialize_feed(&feed).unwrap());
}

#[test]
fn strict_parse_accepts_only_validating_feeds() {
    let mut rng = feedql_testkit::rng(3);
    for _ in 0..100 {
        let feed = gen::gen_feed(&mut rng, 20);
        let xml = serialize_feed(&feed).unwrap();
        let parsed = parse_feed_strict(&xml).expect("generated feeds validate");
        assert!(validate_feed(&parsed).is_empty());
    }

    let dup = r#"<feed xmlns="http://www.w3.org/2005/Atom">
      <id>urn:f</id><title>F</title><updated>2009-04-01T00:00:00Z</updated>
      <entry><id>urn:e</id><title>A</title><updated>2009-04-01T00:00:00Z</updated></entry>
      <entry><id>urn:e</id><title>B</title><updated>2009-04-02T00:00:00Z</updated></entry>
    </feed>"#;
    // lenient parse accepts, strict parse rejects
    assert_eq!(validate_feed(&parse_feed(dup).unwrap()).len(), 1);
    assert!(matches!(parse_feed_strict(dup), Err(AtomError::InvariantViolation(_))));
}

#[test]
fn representative_point_is_rotation_invariant_for_polygons() {
    let mut rng = feedql_testkit::rng(4);
    for _ in 0..50 {
        let feed = gen::gen_feed(&mut rng, 10);
        for entry in &feed.entries {
            if let Some(GeoShape::Polygon(points)) = &entry.geo {
                let base = GeoShape::Polygon(points.clone()).representative_point();
                for rot in 1..points.len() {
                    let mut rotated = points.clone();
                    rotated.rotate_left(rot);
                    let other = GeoShape::Polygon(rotated).representative_point();
                    assert!((base.lat - other.lat).abs() < 1e-9);
                    assert!((base.lon - other.lon).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn fractional_seconds_round_trip() {
    let xml = entry_doc("<published>2009-04-01T00:00:00.125Z</published>");
    let feed = parse_feed(&xml).unwrap();
    assert_eq!(
        feed.entries[0].published,
        Some(Timestamp::parse("2009-04-01T00:00:00.125Z").unwrap())
    );
    let cycled = parse_feed(&serialize_feed(&feed).unwrap()).unwrap();
    assert_eq!(cycled, feed);
}

#[test]
fn duplicate_scalar_elements_become_extensions() {
    let xml = entry_doc("<title>second title</title>");
    let feed = parse_feed(&xml).unwrap();
    assert_eq!(feed.entries[0].title, "E");
    assert_eq!(feed.entries[0].extensions.len(), 1);
    assert_eq!(feed.entries[0].extensions[0].name, "title");
    let cycled: Feed = parse_feed(&serialize_feed(&feed).unwrap()).unwrap();
    assert_eq!(cycled, feed);
}
