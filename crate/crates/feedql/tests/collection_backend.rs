//! Collection storage: upserts, current/paged/archived feeds, collection
//! queries over hidden fields, and the persistence format.

use std::collections::BTreeSet;

use feedql::atom::{parse_feed, serialize_feed, Entry, Timestamp};
use feedql::collection::{Collection, CollectionError, FeedMeta, Member};
use feedql::eval::{eval_query, EvalContext};
use feedql::query::{parse_uri_params, Query};
use feedql_testkit::fixtures::{collection_25, entry, photo_collection, sequential_collection, ts};
use feedql_testkit::gen::{self, QueryGenOptions};

fn ctx() -> EvalContext {
    EvalContext::new()
}

fn no_declared() -> BTreeSet<String> {
    BTreeSet::new()
}

fn entry_ids(feed: &feedql::atom::Feed) -> Vec<&str> {
    feed.entries.iter().map(|e| e.id.as_str()).collect()
}

#[test]
fn upsert_inserts_replaces_and_rejects_stale() {
    let collection = Collection::new("c", FeedMeta::new("urn:c", "C"), 10, 10).unwrap();
    let first = Member::of(entry("urn:m", "v1", "2009-04-01T10:00:00Z"));
    let collection = collection.upsert_member(first.clone()).unwrap();
    assert_eq!(collection.len(), 1);

    // identical re-upsert is a no-op in effect
    let same = collection.upsert_member(first).unwrap();
    assert_eq!(same.len(), 1);
    assert_eq!(same.member("urn:m").unwrap().entry.title, "v1");

    let newer = Member::of(entry("urn:m", "v2", "2009-04-01T11:00:00Z"));
    let updated = same.upsert_member(newer).unwrap();
    assert_eq!(updated.member("urn:m").unwrap().entry.title, "v2");

    let stale = Member::of(entry("urn:m", "v0", "2009-04-01T09:00:00Z"));
    assert!(matches!(
        updated.upsert_member(stale),
        Err(CollectionError::StaleUpdate { .. })
    ));
}

#[test]
fn current_feed_returns_newest_first() {
    let small = sequential_collection("s", 3, 10, 10);
    let feed = small.current_feed();
    assert_eq!(entry_ids(&feed), vec!["urn:s:m03", "urn:s:m02", "urn:s:m01"]);

    let big = collection_25();
    let feed = big.current_feed();
    let expect: Vec<String> = (16..=25).rev().map(|i| format!("urn:news:m{i:02}")).collect();
    assert_eq!(entry_ids(&feed), expect.iter().map(String::as_str).collect::<Vec<_>>());
}

#[test]
fn current_feed_of_empty_collection_is_empty() {
    let empty = Collection::new("e", FeedMeta::new("urn:e", "E"), 10, 10).unwrap();
    let feed = empty.current_feed();
    assert!(feed.entries.is_empty());
    assert!(parse_feed(&serialize_feed(&feed).unwrap()).is_ok());
}

#[test]
fn current_feed_ties_break_by_id() {
    let meta = FeedMeta::new("urn:t", "T");
    let mut c = Collection::new("t", meta, 10, 10).unwrap();
    for id in ["urn:t:b", "urn:t:a", "urn:t:c"] {
        c = c.upsert_member(Member::of(entry(id, id, "2009-04-01T00:00:00Z"))).unwrap();
    }
    assert_eq!(entry_ids(&c.current_feed()), vec!["urn:t:a", "urn:t:b", "urn:t:c"]);
}

#[test]
fn paging_partitions_the_member_set() {
    let collection = collection_25();
    let page2 = collection.paged_feed(2).unwrap();
    assert_eq!(page2.entries.len(), 10);
    let rels: Vec<(&str, &str)> =
        page2.links.iter().map(|l| (l.rel.as_str(), l.href.as_str())).collect();
    assert!(rels.contains(&("self", "/feeds/news?page=2")));
    assert!(rels.contains(&("next", "/feeds/news?page=3")));
    assert!(rels.contains(&("previous", "/feeds/news?page=1")));

    let page3 = collection.paged_feed(3).unwrap();
    assert_eq!(page3.entries.len(), 5);
    assert!(!page3.links.iter().any(|l| l.rel == "next"));

    assert!(matches!(
        collection.paged_feed(4),
        Err(CollectionError::PageOutOfRange { page: 4, last: 3 })
    ));

    // pages are disjoint and cover everything
    let mut seen = BTreeSet::new();
    for page in 1..=3 {
        for entry in collection.paged_feed(page).unwrap().entries {
            assert!(seen.insert(entry.id.clone()), "{} appeared twice", entry.id);
        }
    }
    assert_eq!(seen.len(), 25);

    // page 1 of an empty collection is valid
    let empty = Collection::new("e", FeedMeta::new("urn:e", "E"), 10, 10).unwrap();
    assert!(empty.paged_feed(1).unwrap().entries.is_empty());
    assert!(empty.paged_feed(2).is_err());
}

#[test]
fn archives_partition_in_arrival_order() {
    let collection = collection_25();
    assert_eq!(collection.archive_count(), 3);

    let first = collection.archived_feed(1).unwrap();
    let expect: Vec<String> = (1..=10).map(|i| format!("urn:news:m{i:02}")).collect();
    assert_eq!(entry_ids(&first), expect.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(!first.links.iter().any(|l| l.rel == "prev-archive"));
    assert!(first.links.iter().any(|l| l.rel == "current" && l.href == "/feeds/news"));
    // archive 2 is full, so archive 1 links forward
    assert!(first.links.iter().any(|l| l.rel == "next-archive" && l.href == "/feeds/news/archive/2"));

    let second = collection.archived_feed(2).unwrap();
    assert_eq!(second.entries.len(), 10);
    assert!(second.links.iter().any(|l| l.rel == "prev-archive" && l.href == "/feeds/news/archive/1"));
    // archive 3 is partial, so no next-archive yet
    assert!(!second.links.iter().any(|l| l.rel == "next-archive"));

    let third = collection.archived_feed(3).unwrap();
    assert_eq!(third.entries.len(), 5);

    assert!(matches!(
        collection.archived_feed(4),
        Err(CollectionError::ArchiveOutOfRange { index: 4, last: 3 })
    ));
}

#[test]
fn walking_prev_archive_links_covers_every_id_exactly_once() {
    let collection = collection_25();
    let mut collected: BTreeSet<String> = BTreeSet::new();
    let mut feed = collection.current_feed();
    loop {
        for e in &feed.entries {
            collected.insert(e.id.clone());
        }
        let prev = feed.links.iter().find(|l| l.rel == "prev-archive").map(|l| l.href.clone());
        match prev {
            Some(href) => {
                let index: usize = href.rsplit('/').next().unwrap().parse().unwrap();
                feed = collection.archived_feed(index).unwrap();
            }
            None => break,
        }
    }
    let expect: BTreeSet<String> = (1..=25).map(|i| format!("urn:news:m{i:02}")).collect();
    assert_eq!(collected, expect);

    // the archive chain alone covers every id exactly once
    let mut chain = Vec::new();
    for index in 1..=collection.archive_count() {
        chain.extend(entry_ids(&collection.archived_feed(index).unwrap()).into_iter().map(String::from));
    }
    let unique: BTreeSet<&String> = chain.iter().collect();
    assert_eq!(chain.len(), 25);
    assert_eq!(unique.len(), 25);
}

#[test]
fn full_archives_are_byte_stable_under_new_upserts() {
    let mut collection = collection_25();
    let before_1 = serialize_feed(&collection.archived_feed(1).unwrap()).unwrap();

    let base = ts("2009-04-01T00:00:00Z").unix_millis();
    for i in 26..=30 {
        let updated = Timestamp::from_unix_millis(base + i * 3_600_000);
        let e = Entry::new(format!("urn:news:m{i:02}"), format!("Item {i:02}"), updated);
        collection = collection.upsert_member(Member::of(e)).unwrap();
    }

    let after_1 = serialize_feed(&collection.archived_feed(1).unwrap()).unwrap();
    assert_eq!(before_1, after_1);

    // deep archives (those with a full successor) stay stable through yet
    // more inserts
    let before_2 = serialize_feed(&collection.archived_feed(2).unwrap()).unwrap();
    let updated = Timestamp::from_unix_millis(base + 31 * 3_600_000);
    let grown = collection
        .upsert_member(Member::of(Entry::new("urn:news:m31", "Item 31", updated)))
        .unwrap();
    assert_eq!(before_2, serialize_feed(&grown.archived_feed(2).unwrap()).unwrap());
}

#[test]
fn collection_query_matches_hidden_fields() {
    let photos = photo_collection();
    let q = parse_uri_params(&[("q".to_string(), "x:camera-model==Canon*".to_string())]).unwrap();
    let result = photos.collection_query(&q, &ctx(), &no_declared()).unwrap();
    assert_eq!(entry_ids(&result), vec!["urn:p:3", "urn:p:1"]); // updated-desc
}

#[test]
fn identity_collection_query_returns_all_members_newest_first() {
    let photos = photo_collection();
    let result = photos.collection_query(&Query::identity(), &ctx(), &no_declared()).unwrap();
    assert_eq!(entry_ids(&result), vec!["urn:p:5", "urn:p:4", "urn:p:3", "urn:p:2", "urn:p:1"]);
}

#[test]
fn atom_and_hidden_predicates_intersect() {
    let photos = photo_collection();
    let q = parse_uri_params(&[(
        "q".to_string(),
        "title==Sunrise;x:camera-model==Canon*".to_string(),
    )])
    .unwrap();
    let result = photos.collection_query(&q, &ctx(), &no_declared()).unwrap();
    assert_eq!(entry_ids(&result), vec!["urn:p:1"]);
}

#[test]
fn unknown_hidden_fields_are_rejected_unless_declared() {
    let photos = photo_collection();
    let q = parse_uri_params(&[("q".to_string(), "x:owner==bob".to_string())]).unwrap();
    assert!(matches!(
        photos.collection_query(&q, &ctx(), &no_declared()),
        Err(CollectionError::UnknownHiddenField(field)) if field == "owner"
    ));
    let declared: BTreeSet<String> = ["owner".to_string()].into();
    let ok = photos.collection_query(&q, &ctx(), &declared).unwrap();
    assert!(ok.entries.is_empty());
}

#[test]
fn range_operators_work_on_timestamp_hidden_fields() {
    let meta = FeedMeta::new("urn:h", "H");
    let mut c = Collection::new("h", meta, 10, 10).unwrap();
    for (i, taken) in ["2009-01-01T00:00:00Z", "2009-06-01T00:00:00Z", "not a time"].iter().enumerate() {
        let e = entry(&format!("urn:h:{i}"), &format!("H{i}"), "2009-07-01T00:00:00Z");
        c = c.upsert_member(Member::with_hidden(e, &[("taken", taken)])).unwrap();
    }
    let q = parse_uri_params(&[("q".to_string(), "x:taken=ge=2009-03-01T00:00:00Z".to_string())]).unwrap();
    let result = c.collection_query(&q, &ctx(), &no_declared()).unwrap();
    // the unparseable value fails the range predicate
    assert_eq!(entry_ids(&result), vec!["urn:h:1"]);
}

#[test]
fn hidden_fields_never_reach_serialized_output() {
    let photos = photo_collection();
    let mut rng = feedql_testkit::rng(51);
    let opts = QueryGenOptions { allow_hidden: true, ..Default::default() };
    let sentinels = ["Canon EOS 5D", "Nikon D90", "Canon PowerShot", "Leica M8", "batch-"];
    for _ in 0..100 {
        let q = gen::gen_query(&mut rng, &opts);
        let Ok(result) = photos.collection_query(&q, &ctx(), &no_declared()) else {
            continue;
        };
        let xml = serialize_feed(&result).unwrap();
        for sentinel in sentinels {
            assert!(!xml.contains(sentinel), "hidden value {sentinel:?} leaked:\n{xml}");
        }
    }
}

#[test]
fn feed_level_queries_agree_with_the_eval_engine() {
    let photos = photo_collection();
    let mut rng = feedql_testkit::rng(52);
    let opts = QueryGenOptions::default(); // no hidden selectors
    for _ in 0..100 {
        let q = gen::gen_query(&mut rng, &opts);
        let via_collection = photos.collection_query(&q, &ctx(), &no_declared()).unwrap();
        let via_engine = eval_query(&q, &photos.full_member_feed(), &ctx()).unwrap();
        assert_eq!(via_collection, via_engine);
    }
}

#[test]
fn cooccur_is_refused_at_the_collection_level() {
    let photos = photo_collection();
    let q = parse_uri_params(&[("xq".to_string(), "cooccur(urn:a,urn:b,5)".to_string())]).unwrap();
    assert!(matches!(
        photos.collection_query(&q, &ctx(), &no_declared()),
        Err(CollectionError::Eval(feedql::eval::EvalError::CrossFeedFnHere))
    ));
}

#[test]
fn save_and_load_round_trip_preserves_arrival_order_and_hidden_fields() {
    let dir = tempfile::tempdir().unwrap();
    let atom_path = dir.path().join("photos.atom");
    let hidden_path = dir.path().join("photos.hidden.tsv");
    let photos = photo_collection();
    photos.save(&atom_path, &hidden_path).unwrap();

    let tsv = std::fs::read_to_string(&hidden_path).unwrap();
    assert!(tsv.lines().all(|l| l.is_empty() || l.split('\t').count() >= 3));
    assert!(tsv.contains("urn:p:1\tcamera-model\tCanon EOS 5D\n"));
    assert!(!tsv.contains('\r'));

    let loaded = Collection::load("photos", &atom_path, Some(&hidden_path), 10, 10).unwrap();
    assert_eq!(loaded.len(), photos.len());
    for index in 1..=photos.archive_count() {
        assert_eq!(
            serialize_feed(&loaded.archived_feed(index).unwrap()).unwrap(),
            serialize_feed(&photos.archived_feed(index).unwrap()).unwrap()
        );
    }
    assert_eq!(
        loaded.member("urn:p:3").unwrap().hidden.get("camera-model").map(String::as_str),
        Some("Canon PowerShot")
    );
}

#[test]
fn load_rejects_unknown_hidden_ids_and_bad_lines() {
    let dir = tempfile::tempdir().unwrap();
    let atom_path = dir.path().join("c.atom");
    let hidden_path = dir.path().join("c.hidden.tsv");
    photo_collection().save(&atom_path, &hidden_path).unwrap();

    std::fs::write(&hidden_path, "urn:p:404\tcamera-model\tCanon\n").unwrap();
    assert!(matches!(
        Collection::load("c", &atom_path, Some(&hidden_path), 10, 10),
        Err(CollectionError::Load(_))
    ));

    std::fs::write(&hidden_path, "urn:p:1 camera-model Canon\n").unwrap();
    assert!(matches!(
        Collection::load("c", &atom_path, Some(&hidden_path), 10, 10),
        Err(CollectionError::Load(_))
    ));
}

#[test]
fn capabilities_reflect_hidden_fields_and_exclude_cooccur() {
    let photos = photo_collection();
    let caps = photos.capabilities(feedql::capabilities::Tier::Open);
    assert!(caps.supports_selector("x:camera-model"));
    assert!(caps.supports_selector("x:import-batch"));
    assert!(caps.supports_selector("category"));
    assert!(!caps.supports_function("cooccur", 3));
    assert!(caps.supports_function("window", 2));
}
