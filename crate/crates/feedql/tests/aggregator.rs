//! Feedset aggregation, pushdown planning, plan execution, and the cooccur
//! join.

use feedql::aggregate::{
    aggregate, cooccur_join, execute_plan, plan_query, AggregateError, Feedset, PlannedSource,
};
use feedql::capabilities::Capabilities;
use feedql::eval::EvalContext;
use feedql::query::{parse_filter, parse_uri_params, serialize_query, Query};
use feedql_testkit::fetch::{CountingFetcher, FailingFetcher, StaticFetcher};
use feedql_testkit::fixtures::{at, entry, feed_of, tagged};
use feedql_testkit::gen::{self};
use feedql_testkit::oracle::origin_ids;

fn ctx() -> EvalContext {
    EvalContext::new()
}

fn origins(a: &str, b: &str) -> (String, String) {
    (a.to_string(), b.to_string())
}

#[test]
fn single_source_annotates_every_entry() {
    let feed = feed_of(vec![
        entry("urn:a:1", "one", "2009-04-01T10:00:00Z"),
        entry("urn:a:2", "two", "2009-04-01T11:00:00Z"),
        entry("urn:a:3", "three", "2009-04-01T12:00:00Z"),
    ]);
    let fs = aggregate(&[("http://a.example/feeds/a".to_string(), feed)]).unwrap();
    assert_eq!(fs.feed.entries.len(), 3);
    assert!(fs
        .feed
        .entries
        .iter()
        .all(|e| e.origin.as_deref() == Some("http://a.example/feeds/a")));
}

#[test]
fn same_id_across_origins_is_kept_twice() {
    let a = feed_of(vec![entry("urn:shared", "from a", "2009-04-01T10:00:00Z")]);
    let b = feed_of(vec![entry("urn:shared", "from b", "2009-04-01T11:00:00Z")]);
    let fs = aggregate(&[
        ("http://a.example/feeds/a".to_string(), a),
        ("http://b.example/feeds/b".to_string(), b),
    ])
    .unwrap();
    assert_eq!(fs.feed.entries.len(), 2);
    let origins: Vec<_> = fs.feed.entries.iter().filter_map(|e| e.origin.as_deref()).collect();
    assert_eq!(origins, vec!["http://a.example/feeds/a", "http://b.example/feeds/b"]);
}

#[test]
fn duplicate_id_within_one_origin_keeps_the_newer() {
    let feed = feed_of(vec![
        entry("urn:d", "old", "2009-04-01T10:00:00Z"),
        entry("urn:d:other", "other", "2009-04-01T10:30:00Z"),
        entry("urn:d", "new", "2009-04-01T11:00:00Z"),
    ]);
    let fs = aggregate(&[("http://a.example/feeds/a".to_string(), feed)]).unwrap();
    // the newer revision wins but keeps the first position
    assert_eq!(fs.feed.entries.len(), 2);
    assert_eq!(fs.feed.entries[0].title, "new");
    assert_eq!(fs.feed.entries[1].title, "other");

    // on an updated tie the first encountered wins
    let tie = feed_of(vec![
        entry("urn:t", "first", "2009-04-01T10:00:00Z"),
        entry("urn:t", "second", "2009-04-01T10:00:00Z"),
    ]);
    let fs = aggregate(&[("http://a.example/feeds/a".to_string(), tie)]).unwrap();
    assert_eq!(fs.feed.entries[0].title, "first");
}

#[test]
fn duplicate_origins_are_rejected() {
    let feed = feed_of(vec![]);
    let result = aggregate(&[
        ("http://a.example/feeds/a".to_string(), feed.clone()),
        ("http://a.example/feeds/a".to_string(), feed),
    ]);
    assert_eq!(result.unwrap_err(), AggregateError::DuplicateOrigin("http://a.example/feeds/a".into()));
}

#[test]
fn aggregate_is_permutation_stable_per_source() {
    let mut rng = feedql_testkit::rng(61);
    let a = ("urn:src:a".to_string(), gen::gen_feed(&mut rng, 15));
    let b = ("urn:src:b".to_string(), gen::gen_feed(&mut rng, 15));
    let ab = aggregate(&[a.clone(), b.clone()]).unwrap();
    let ba = aggregate(&[b, a]).unwrap();
    let mut ab_ids = origin_ids(&ab.feed.entries);
    let mut ba_ids = origin_ids(&ba.feed.entries);
    assert_ne!(ab.feed.id, "");
    ab_ids.sort();
    ba_ids.sort();
    assert_eq!(ab_ids, ba_ids);
}

#[test]
fn planner_pushes_only_supported_conjuncts() {
    let q = parse_uri_params(&[(
        "q".to_string(),
        "category==java;geo:position=within=box(0,0,10,10)".to_string(),
    )])
    .unwrap();

    let mut category_only = Capabilities::empty();
    category_only.selectors.push(("category".into(), feedql::capabilities::Scope::Feed));
    category_only.operators.push("eq".into());

    let sources = vec![
        ("http://a.example/feeds/a".to_string(), Some(category_only)),
        ("http://b.example/feeds/b".to_string(), Some(Capabilities::full_language())),
        ("http://c.example/feeds/c".to_string(), None),
    ];
    let plan = plan_query(&q, &sources);

    assert_eq!(plan.per_source[0].pushed, Some(parse_filter("category==java").unwrap()));
    // a fully capable source receives the whole entry-scoped filter
    assert_eq!(plan.per_source[1].pushed, q.filter);
    // unknown capabilities mean nothing is pushed
    assert_eq!(plan.per_source[2].pushed, None);
    // the residual always retains the complete original query
    assert_eq!(plan.residual, q);
}

#[test]
fn disjunctions_push_only_whole() {
    let q = parse_uri_params(&[(
        "q".to_string(),
        "(category==java,title==Post*);author.name==Alice".to_string(),
    )])
    .unwrap();
    let mut no_title = Capabilities::full_language();
    no_title.selectors.retain(|(name, _)| name != "title");
    let plan = plan_query(&q, &[("urn:s".to_string(), Some(no_title))]);
    // the Or contains an unsupported branch, so only the author conjunct goes
    assert_eq!(plan.per_source[0].pushed, Some(parse_filter("author.name==Alice").unwrap()));
}

#[test]
fn cooccur_only_queries_push_nothing() {
    let q = parse_uri_params(&[("xq".to_string(), "cooccur(urn:a,urn:b,10)".to_string())]).unwrap();
    let plan = plan_query(
        &q,
        &[
            ("urn:a".to_string(), Some(Capabilities::full_language())),
            ("urn:b".to_string(), Some(Capabilities::full_language())),
        ],
    );
    assert!(plan.per_source.iter().all(|s| s.pushed.is_none()));
    assert_eq!(plan.residual, q);
}

#[test]
fn pushed_params_serialize_as_the_q_parameter() {
    let source = PlannedSource {
        origin: "urn:s".into(),
        pushed: Some(parse_filter("category==java;category==jsp").unwrap()),
    };
    assert_eq!(source.params(), vec![("q".to_string(), "category==java;category==jsp".to_string())]);
    let plain = PlannedSource { origin: "urn:s".into(), pushed: None };
    assert!(plain.params().is_empty());
}

#[test]
fn execute_plan_equals_the_naive_path_on_generated_scenarios() {
    let mut rng = feedql_testkit::rng(71);
    for case in 0..100 {
        let scenario = gen::gen_pushdown_scenario(&mut rng);
        let fetcher = StaticFetcher::new(scenario.sources.clone());

        let plan = plan_query(&scenario.query, &scenario.caps);
        let counted = CountingFetcher::new(&fetcher);
        let pushed_result = execute_plan(&plan, &counted, &ctx()).unwrap();
        let pushed_transfer = counted.transferred.get();

        // naive path: fetch everything unfiltered, then evaluate the query
        let naive_plan = plan_query(
            &scenario.query,
            &scenario.caps.iter().map(|(o, _)| (o.clone(), None)).collect::<Vec<_>>(),
        );
        let counted = CountingFetcher::new(&fetcher);
        let naive_result = execute_plan(&naive_plan, &counted, &ctx()).unwrap();
        let naive_transfer = counted.transferred.get();

        assert_eq!(
            origin_ids(&pushed_result.entries),
            origin_ids(&naive_result.entries),
            "case {case}: pushdown changed the result"
        );
        assert!(
            pushed_transfer <= naive_transfer,
            "case {case}: pushdown transferred more ({pushed_transfer} > {naive_transfer})"
        );
        if plan.pushed_conjunct_count() > 0 {
            assert!(
                pushed_transfer < naive_transfer,
                "case {case}: a push happened but transfer did not shrink"
            );
        }
    }
}

#[test]
fn identity_query_over_two_sources_is_the_plain_feedset() {
    let a = feed_of(vec![entry("urn:a:1", "a1", "2009-04-01T10:00:00Z")]);
    let b = feed_of(vec![entry("urn:b:1", "b1", "2009-04-01T11:00:00Z")]);
    let sources = vec![
        ("http://a.example/feeds/a".to_string(), a.clone()),
        ("http://b.example/feeds/b".to_string(), b.clone()),
    ];
    let fetcher = StaticFetcher::new(sources.clone());
    let plan = plan_query(
        &Query::identity(),
        &[
            ("http://a.example/feeds/a".to_string(), None),
            ("http://b.example/feeds/b".to_string(), None),
        ],
    );
    let result = execute_plan(&plan, &fetcher, &ctx()).unwrap();
    let plain = aggregate(&sources).unwrap();
    assert_eq!(result, plain.feed);
}

#[test]
fn a_dead_source_fails_the_whole_query() {
    let live = feed_of(vec![entry("urn:a:1", "a1", "2009-04-01T10:00:00Z")]);
    let fetcher = StaticFetcher::new(vec![("urn:live".to_string(), live)]);
    let failing = FailingFetcher { inner: &fetcher, dead: vec!["urn:dead".to_string()] };
    let plan = plan_query(
        &Query::identity(),
        &[("urn:live".to_string(), None), ("urn:dead".to_string(), None)],
    );
    let result = execute_plan(&plan, &failing, &ctx());
    assert!(matches!(
        result,
        Err(AggregateError::SourceUnavailable { origin, .. }) if origin == "urn:dead"
    ));
}

fn geo_feedset() -> Feedset {
    let (origin_a, origin_b) = origins("http://a.example/feeds/a", "http://b.example/feeds/b");
    let mut a1 = at(entry("urn:a:1", "a near", "2009-04-01T10:00:00Z"), 0.0, 0.0);
    a1.published = Some(feedql_testkit::fixtures::ts("2009-04-01T10:00:00Z"));
    let mut b1 = at(entry("urn:b:1", "b near", "2009-04-01T10:30:00Z"), 0.05, 0.0);
    b1.published = Some(feedql_testkit::fixtures::ts("2009-04-01T12:00:00Z"));
    let a2 = at(entry("urn:a:2", "a far", "2009-04-01T11:00:00Z"), 40.0, 40.0);
    let a3 = entry("urn:a:3", "a geoless", "2009-04-01T12:00:00Z");
    aggregate(&[
        (origin_a, feed_of(vec![a1, a2, a3])),
        (origin_b, feed_of(vec![b1])),
    ])
    .unwrap()
}

#[test]
fn cooccur_joins_within_radius() {
    let fs = geo_feedset();
    // the near pair is ~5.56 km apart
    let joined = cooccur_join(&fs, "http://a.example/feeds/a", "http://b.example/feeds/b", 10.0, None).unwrap();
    assert_eq!(joined.entries.len(), 1);
    assert_eq!(joined.entries[0].id, "urn:a:1");

    let too_tight = cooccur_join(&fs, "http://a.example/feeds/a", "http://b.example/feeds/b", 5.0, None).unwrap();
    assert!(too_tight.entries.is_empty());
}

#[test]
fn cooccur_time_gate() {
    let fs = geo_feedset();
    // published times are two hours apart; a one-hour gate fails
    let gated =
        cooccur_join(&fs, "http://a.example/feeds/a", "http://b.example/feeds/b", 10.0, Some(3600)).unwrap();
    assert!(gated.entries.is_empty());
    let wide =
        cooccur_join(&fs, "http://a.example/feeds/a", "http://b.example/feeds/b", 10.0, Some(7 * 3600)).unwrap();
    assert_eq!(wide.entries.len(), 1);
}

#[test]
fn cooccur_roles_are_directional() {
    let fs = geo_feedset();
    let b_side = cooccur_join(&fs, "http://b.example/feeds/b", "http://a.example/feeds/a", 10.0, None).unwrap();
    assert_eq!(b_side.entries.len(), 1);
    assert_eq!(b_side.entries[0].id, "urn:b:1");
}

#[test]
fn cooccur_unknown_origin() {
    let fs = geo_feedset();
    assert_eq!(
        cooccur_join(&fs, "urn:nope", "http://b.example/feeds/b", 10.0, None).unwrap_err(),
        AggregateError::UnknownOrigin("urn:nope".into())
    );
}

#[test]
fn cooccur_runs_inside_plans() {
    let (origin_a, origin_b) = origins("http://a.example/feeds/a", "http://b.example/feeds/b");
    // the filter runs over the whole feedset before the join, so the b-side
    // partner carries the category too
    let a = feed_of(vec![
        at(tagged("urn:a:1", "a1", "2009-04-01T10:00:00Z", &["java"]), 0.0, 0.0),
        at(tagged("urn:a:2", "a2", "2009-04-01T11:00:00Z", &["rust"]), 0.0, 0.001),
    ]);
    let b = feed_of(vec![at(tagged("urn:b:1", "b1", "2009-04-01T10:30:00Z", &["java"]), 0.05, 0.0)]);
    let fetcher = StaticFetcher::new(vec![(origin_a.clone(), a), (origin_b.clone(), b)]);

    let q = parse_uri_params(&[
        ("q".to_string(), "category==java".to_string()),
        ("xq".to_string(), format!("cooccur({origin_a},{origin_b},10)")),
    ])
    .unwrap();
    let plan = plan_query(
        &q,
        &[
            (origin_a.clone(), Some(Capabilities::full_language())),
            (origin_b.clone(), Some(Capabilities::full_language())),
        ],
    );
    let result = execute_plan(&plan, &fetcher, &ctx()).unwrap();
    // a2 is filtered out before the join; a1 survives it
    assert_eq!(result.entries.len(), 1);
    assert_eq!(result.entries[0].id, "urn:a:1");
    assert_eq!(result.entries[0].origin.as_deref(), Some(origin_a.as_str()));
}

#[test]
fn serialize_query_keeps_cooccur_wire_form() {
    let q = parse_uri_params(&[(
        "xq".to_string(),
        "cooccur(http://a.example/feeds/a,http://b.example/feeds/b,10,3600)".to_string(),
    )])
    .unwrap();
    assert_eq!(
        serialize_query(&q),
        vec![(
            "xq".to_string(),
            "cooccur(http://a.example/feeds/a,http://b.example/feeds/b,10,3600)".to_string()
        )]
    );
}

#[test]
fn feedset_ids_are_deterministic_and_order_independent() {
    let a = feed_of(vec![]);
    let b = feed_of(vec![]);
    let ab = aggregate(&[("urn:a".to_string(), a.clone()), ("urn:b".to_string(), b.clone())]).unwrap();
    let ba = aggregate(&[("urn:b".to_string(), b), ("urn:a".to_string(), a)]).unwrap();
    assert_eq!(ab.feed.id, ba.feed.id);
    assert!(ab.feed.id.starts_with("http://ns.feedql.dev/feedset/"));
}

#[test]
fn or_conjunct_pushes_keep_results_identical() {
    // regression-style fixture: an Or pushed whole must not drop entries
    let q = parse_uri_params(&[("q".to_string(), "category==java,title==Post*".to_string())]).unwrap();
    let a = feed_of(vec![
        tagged("urn:a:1", "Post one", "2009-04-01T10:00:00Z", &["rust"]),
        tagged("urn:a:2", "Other", "2009-04-01T11:00:00Z", &["java"]),
        tagged("urn:a:3", "Neither", "2009-04-01T12:00:00Z", &["geo"]),
    ]);
    let sources = vec![("urn:a".to_string(), a)];
    let fetcher = StaticFetcher::new(sources);
    let pushed = plan_query(&q, &[("urn:a".to_string(), Some(Capabilities::full_language()))]);
    let naive = plan_query(&q, &[("urn:a".to_string(), None)]);
    let via_push = execute_plan(&pushed, &fetcher, &ctx()).unwrap();
    let via_naive = execute_plan(&naive, &fetcher, &ctx()).unwrap();
    assert_eq!(origin_ids(&via_push.entries), origin_ids(&via_naive.entries));
    assert_eq!(via_push.entries.len(), 2);
}
