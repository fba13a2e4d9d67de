use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::thread;

use proptest::prelude::*;
use serank::oracle::{
    build_query, cache_key, execute, load_cache, validate_query, EngineClient, EngineDialect,
    HttpConfig, HttpTransport, QueryBudget, QueryError, QueryViolation, Recorder, ReplayOracle,
    RetryPolicy, SiteMode, Transport, TransportError,
};
use serank::sim::SimTransport;
use serank::{ordinal_rank, Item, OracleError, RankingOracle};

fn s(v: &[&str]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

fn dialects() -> Vec<EngineDialect> {
    EngineDialect::builtins()
}

proptest! {
    /// Any string at all maps to stats or a violation, and the stats agree
    /// with the limits.
    #[test]
    fn validate_query_is_total(q in any::<String>(), which in 0usize..3) {
        let d = &dialects()[which];
        match validate_query(&q, d) {
            Ok(st) => {
                prop_assert_eq!(st.bytes, q.len());
                prop_assert!(st.terms > 0);
                prop_assert!(st.bytes <= d.max_query_bytes);
                prop_assert!(d.max_query_terms.is_none_or(|t| st.terms <= t));
            }
            Err(QueryViolation::Empty) => prop_assert_eq!(q.split_whitespace().count(), 0),
            Err(QueryViolation::TooManyBytes { bytes, limit }) => prop_assert!(bytes > limit),
            Err(QueryViolation::TooManyTerms { terms, limit }) => prop_assert!(terms > limit),
        }
    }

    /// Host-only clauses carry neither scheme nor path; full-URL clauses carry
    /// the URL verbatim.
    #[test]
    fn site_clause_shape(
        hosts in prop::collection::btree_set("[a-z]{1,8}\\.(com|org|edu)", 1..5),
        path in "(/[a-z]{1,6}){0,2}/?",
        https in any::<bool>(),
    ) {
        let scheme = if https { "https" } else { "http" };
        let urls: Vec<String> = hosts.iter().map(|h| format!("{scheme}://{h}{path}")).collect();
        let yahoo = build_query(&urls, &EngineDialect::yahoo_2008()).unwrap();
        let live = build_query(&urls, &EngineDialect::live_2008()).unwrap();
        let y: Vec<&str> = yahoo.split(" OR ").collect();
        let l: Vec<&str> = live.split(" OR ").collect();
        for ((clause, url), host) in y.iter().zip(&urls).zip(&hosts) {
            prop_assert_eq!(*clause, format!("site:{host}/"));
            prop_assert!(!clause.contains("://"));
            prop_assert_eq!(l[urls.iter().position(|u| u == url).unwrap()], format!("site:{url}"));
        }
    }
}

#[test]
fn google_query_limits() {
    let g = EngineDialect::google_2008();
    let five: Vec<String> = (0..5).map(|i| format!("http://h{i}.edu/")).collect();
    let q = build_query(&five, &g).unwrap();
    assert_eq!(validate_query(&q, &g).unwrap().terms, 9);
    let mut six = five.clone();
    six.push("http://h5.edu/".into());
    assert!(matches!(
        build_query(&six, &g),
        Err(QueryError::TooLarge(QueryViolation::TooManyTerms { terms: 11, limit: 10 }))
    ));
    assert_eq!(g.max_urls_per_query(), Some(5));

    let long = format!("http://{}.com/", "x".repeat(2100));
    assert!(matches!(
        build_query(&[long], &EngineDialect::live_2008()),
        Err(QueryError::TooLarge(QueryViolation::TooManyBytes { limit: 2048, .. }))
    ));
}

#[test]
fn host_only_collision_is_an_error() {
    let urls = s(&["http://en.wikipedia.org/wiki/A", "http://en.wikipedia.org/wiki/B"]);
    let err = build_query(&urls, &EngineDialect::yahoo_2008()).unwrap_err();
    assert!(err.to_string().starts_with("HostOnlyCollision"));
    assert!(build_query(&urls, &EngineDialect::google_2008()).is_ok());
    assert_eq!(EngineDialect::yahoo_2008().site_mode, SiteMode::HostOnly);
}

struct Counting {
    calls: usize,
    fail_first: usize,
}

impl Transport for Counting {
    fn fetch(&mut self, _query: &str) -> Result<Vec<String>, TransportError> {
        self.calls += 1;
        if self.calls <= self.fail_first {
            Err(TransportError::Transient("503".into()))
        } else {
            Ok(Vec::new())
        }
    }
}

proptest! {
    /// Transport calls never exceed the quota; the call after the last unit
    /// of budget fails without reaching the transport.
    #[test]
    fn budget_is_never_overdrawn(quota in 1u32..20, batches in 0usize..40, fail_first in 0usize..4) {
        let d = EngineDialect::live_2008();
        let budget = QueryBudget::new("live", quota);
        let mut t = Counting { calls: 0, fail_first };
        let retry = RetryPolicy::immediate(3);
        let urls = s(&["http://a.com/", "http://b.com/"]);
        let mut ok = 0usize;
        for _ in 0..batches {
            match execute(&urls, &d, &budget, &mut t, &retry) {
                Ok(_) => ok += 1,
                Err(OracleError::QuotaExhausted { quota: q, .. }) => prop_assert_eq!(q, quota),
                Err(OracleError::Unavailable(_)) => {}
                Err(e) => prop_assert!(false, "unexpected {e}"),
            }
        }
        prop_assert!(t.calls <= quota as usize);
        prop_assert_eq!(budget.used_today() as usize, t.calls);
        prop_assert!(ok <= quota as usize);
    }
}

#[test]
fn retries_exhaust_into_unavailable() {
    let d = EngineDialect::live_2008();
    let budget = QueryBudget::new("live", 100);
    let mut t = Counting { calls: 0, fail_first: 10 };
    let err = execute(&s(&["http://a.com/"]), &d, &budget, &mut t, &RetryPolicy::immediate(3)).unwrap_err();
    assert!(err.is_unavailable());
    assert_eq!(t.calls, 4);

    let mut t = Counting { calls: 0, fail_first: 3 };
    execute(&s(&["http://a.com/"]), &d, &budget, &mut t, &RetryPolicy::immediate(3)).unwrap();
    assert_eq!(t.calls, 4);
}

fn items(n: usize) -> Vec<Item> {
    (0..n)
        .map(|i| Item::new(format!("u{i:02}"), format!("U{i}"), format!("http://u{i:02}.org/")))
        .collect()
}

fn strip_timestamps(text: &str) -> Vec<serde_json::Value> {
    text.lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("timestamp");
            v
        })
        .collect()
}

#[test]
fn record_then_replay_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let its = items(12);
    let order: Vec<String> = its.iter().rev().map(|i| i.url.clone()).collect();
    let mut dialect = EngineDialect::google_2008();
    dialect.name = "g".into();
    let budget = Arc::new(QueryBudget::new("g", 1000));
    let client = EngineClient::new(
        dialect.clone(),
        budget,
        SimTransport::new(order).with_unindexed(vec![its[3].url.clone()]),
    );
    let mut rec = Recorder::new(client, dir.path(), Some(dialect)).unwrap();
    let live = ordinal_rank(&its, &mut rec, 4).unwrap();
    let calls = rec.into_inner().transport().calls();
    assert_eq!(calls, live.state.query_log.len());

    let cache_text = std::fs::read_to_string(dir.path().join("g.jsonl")).unwrap();
    assert_eq!(cache_text.lines().count(), calls);
    for v in strip_timestamps(&cache_text) {
        assert!(v["bytes"].as_u64().unwrap() > 0);
        assert!(v["terms"].as_u64().unwrap() <= 7);
    }

    let mut replay = ReplayOracle::open(dir.path(), "g").unwrap();
    let again = ordinal_rank(&its, &mut replay, 4).unwrap();
    assert_eq!(live.ranking, again.ranking);
    assert_eq!(again.ranking.unranked, vec!["u03"]);
    let a: Vec<_> = live.state.query_log.iter().map(|r| (&r.urls_in_query_order, &r.answer_order, r.timestamp)).collect();
    let b: Vec<_> = again.state.query_log.iter().map(|r| (&r.urls_in_query_order, &r.answer_order, r.timestamp)).collect();
    assert_eq!(a, b);

    // replay is keyed on the URL set, whatever the order
    let cache = load_cache(dir.path(), "g").unwrap();
    let first = &live.state.query_log[0].urls_in_query_order;
    let mut shuffled = first.clone();
    shuffled.reverse();
    assert!(cache.get(&cache_key(&shuffled, "g")).is_some());

    // an unseen batch is a miss, not a network call
    let err = replay.rank(&s(&["http://nowhere.org/", "http://u00.org/"])).unwrap_err();
    assert!(matches!(err, OracleError::CacheMiss { .. }));
}

#[test]
fn second_recorder_on_the_same_cache_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let mk = || {
        EngineClient::new(
            EngineDialect::live_2008(),
            Arc::new(QueryBudget::new("live-2008", 10)),
            SimTransport::new(Vec::new()),
        )
    };
    let _held = Recorder::new(mk(), dir.path(), None).unwrap();
    assert!(Recorder::new(mk(), dir.path(), None).is_err());
}

#[test]
fn missing_cache_is_reported_as_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let err = ReplayOracle::open(dir.path(), "nope").unwrap_err();
    assert!(err.to_string().starts_with("cache not found"));
}

/// Minimal HTTP/1.1 server: the first `fail` requests get a 503, the rest a
/// JSON body listing result URLs. Returns the base URL and the captured
/// request lines.
fn stub_server(fail: usize, results: Vec<&'static str>, requests: usize) -> (String, thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = thread::spawn(move || {
        let mut seen = Vec::new();
        for i in 0..requests {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            seen.push(line.trim_end().to_string());
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                if h == "\r\n" || h.is_empty() {
                    break;
                }
            }
            let (status, body) = if i < fail {
                ("503 Service Unavailable", String::from("{}"))
            } else {
                let items: Vec<_> = results.iter().map(|u| serde_json::json!({ "link": u })).collect();
                ("200 OK", serde_json::json!({ "items": items }).to_string())
            };
            write!(
                stream,
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
        seen
    });
    (format!("http://{addr}"), handle)
}

#[test]
fn http_transport_against_a_stub_server() {
    let (base, server) = stub_server(
        1,
        vec![
            "http://www.b.edu/about/staff.html",
            "http://unrelated.net/",
            "https://a.edu/",
            "http://www.b.edu/",
        ],
        2,
    );
    let cfg = HttpConfig {
        url_template: format!("{base}/search?q={{QUERY}}"),
        result_path: "items.*.link".into(),
        auth_header: None,
        auth_env: None,
        timeout_secs: Some(5),
    };
    let mut client = EngineClient::new(
        EngineDialect::live_2008(),
        Arc::new(QueryBudget::new("live-2008", 10)),
        HttpTransport::new(cfg).unwrap(),
    )
    .with_retry(RetryPolicy::immediate(2));
    let urls = s(&["http://a.edu/", "http://www.b.edu/", "http://c.edu/"]);
    let r = client.rank(&urls).unwrap();
    assert_eq!(r.ordered_urls, s(&["http://www.b.edu/", "http://a.edu/"]));
    assert_eq!(r.unindexed, s(&["http://c.edu/"]));
    assert_eq!(client.budget().used_today(), 2);

    let seen = server.join().unwrap();
    assert_eq!(seen.len(), 2);
    assert_eq!(seen[0], seen[1]);
    assert!(seen[0].starts_with(
        "GET /search?q=site%3Ahttp%3A%2F%2Fa.edu%2F+OR+site%3Ahttp%3A%2F%2Fwww.b.edu%2F+OR+site%3Ahttp%3A%2F%2Fc.edu%2F "
    ));
}
