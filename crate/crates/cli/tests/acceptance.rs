//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod support;

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use bonsai_core::ranker::{engagement_from_counts, engagement_score, rank_feed};
use bonsai_core::sourcer::{CorpusLine, FixtureAdapter, Sourcer, SourcerSettings};
use bonsai_core::{
    bucket_for_score, Bucket, CuratedPost, FeedConfig, Post, RankingStyle, RankingWeights, Score, Source, SourceKind,
    SourceOrigin,
};
use bonsai_testkit::{borda_oracle, simplex_tenths, tenths_to_rationals, InstanceGenerator, OraclePost, Rational};
use chrono::{DateTime, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use serde_json::Value;
use support::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("borda oracle equivalence", borda_equivalence),
        ("worked example", worked_example),
        ("degenerate weights", degenerate_weights),
        ("engagement formula", engagement_formula),
        ("curation filter soundness", curation_soundness),
        ("bucket partition", bucket_partition),
        ("sourcing windows", sourcing_windows),
        ("skeleton pagination", skeleton_pagination),
        ("crash recovery", crash_recovery),
        ("determinism", determinism),
        ("desk-scale end to end", desk_scale),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name} ({secs:.2}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name} ({secs:.2}s): {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn to_core(posts: &[OraclePost]) -> (Vec<Post>, Vec<CuratedPost>) {
    let candidates: Vec<Post> = posts
        .iter()
        .map(|p| Post {
            uri: p.uri.clone(),
            author: "did:plc:gen".into(),
            text: String::new(),
            media: vec![],
            created_at: Utc.timestamp_opt(p.created_at, 0).unwrap(),
            likes: p.likes,
            reposts: p.reposts,
            replies: p.replies,
            fetched_via: None,
        })
        .collect();
    let eligible = posts
        .iter()
        .zip(&candidates)
        .filter_map(|(o, post)| match o.score {
            Some(s) if s > 0 => Some(CuratedPost::new(post.clone(), Score::new(s).unwrap(), None)),
            _ => None,
        })
        .collect();
    (candidates, eligible)
}

fn core_ranking(posts: &[OraclePost], w: (i64, i64, i64)) -> Vec<(String, f64)> {
    let (candidates, eligible) = to_core(posts);
    let weights = RankingWeights::from_tenths(w.0 as i128, w.1 as i128, w.2 as i128).unwrap();
    rank_feed(&candidates, &eligible, &weights).unwrap().into_iter().map(|e| (e.uri.clone(), e.borda_score())).collect()
}

fn borda_equivalence() -> Outcome {
    let started = Instant::now();
    let grid = simplex_tenths();
    let mut gen = InstanceGenerator::new(0x5EED_0001);
    let instances = 600;
    let mut comparisons = 0;
    for i in 0..instances {
        let posts = gen.instance(6);
        for &w in &grid {
            let core: Vec<String> = core_ranking(&posts, w).into_iter().map(|(u, _)| u).collect();
            let oracle: Vec<String> =
                borda_oracle(&posts, tenths_to_rationals(w)).into_iter().map(|(u, _)| u).collect();
            ensure!(core == oracle, "instance {i} weights {w:?}: core {core:?} oracle {oracle:?}");
            comparisons += 1;
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("{instances} instances x {} weight triples, {comparisons} exact matches", grid.len()))
}

fn worked_example() -> Outcome {
    let p = |uri: &str, t: i64, score: u8, likes: u64| OraclePost {
        uri: uri.into(),
        created_at: t,
        score: Some(score),
        likes,
        reposts: 0,
        replies: 0,
    };
    let posts = vec![p("a", 20, 9, 1), p("b", 10, 6, 6), p("c", 30, 4, 9)];
    let expected = [("c", 1.8), ("a", 1.9), ("b", 2.3)];
    let core = core_ranking(&posts, (4, 3, 3));
    let oracle = borda_oracle(&posts, tenths_to_rationals((4, 3, 3)));
    ensure!(core.len() == 3 && oracle.len() == 3, "lengths {} and {}", core.len(), oracle.len());
    for (i, (uri, score)) in expected.iter().enumerate() {
        ensure!(core[i].0 == *uri, "core position {}: {} instead of {uri}", i + 1, core[i].0);
        ensure!((core[i].1 - score).abs() < 1e-12, "core score of {uri}: {}", core[i].1);
        ensure!(oracle[i].0 == *uri, "oracle position {}: {} instead of {uri}", i + 1, oracle[i].0);
        ensure!(
            oracle[i].1 == Rational::new((score * 10.0).round() as i64, 10),
            "oracle score of {uri}: {}",
            oracle[i].1
        );
    }
    Ok(format!("order [c, a, b], scores {:.1}/{:.1}/{:.1}", core[0].1, core[1].1, core[2].1))
}

fn degenerate_weights() -> Outcome {
    let mut gen = InstanceGenerator::new(0x5EED_0003);
    let order = |posts: &[OraclePost], w| core_ranking(posts, w).into_iter().map(|(u, _)| u).collect::<Vec<_>>();
    for i in 0..100 {
        let posts = gen.instance_of_size(6);
        let mut eligible: Vec<&OraclePost> = posts.iter().filter(|p| matches!(p.score, Some(s) if s > 0)).collect();
        let tie = |a: &&OraclePost, b: &&OraclePost| b.created_at.cmp(&a.created_at).then(a.uri.cmp(&b.uri));
        let uris = |v: &[&OraclePost]| v.iter().map(|p| p.uri.clone()).collect::<Vec<_>>();

        eligible.sort_by(|a, b| b.score.cmp(&a.score).then_with(|| tie(a, b)));
        ensure!(order(&posts, (10, 0, 0)) == uris(&eligible), "instance {i}: (1,0,0) is not relevance order");

        eligible.sort_by(tie);
        ensure!(order(&posts, (0, 0, 10)) == uris(&eligible), "instance {i}: (0,0,1) is not reverse-chronological");

        let e = |p: &OraclePost| p.likes + 3 * p.reposts + 2 * p.replies;
        eligible.sort_by(|a, b| e(b).cmp(&e(a)).then_with(|| tie(a, b)));
        ensure!(order(&posts, (0, 10, 0)) == uris(&eligible), "instance {i}: (0,1,0) is not engagement order");
    }
    Ok("100 instances for each of (1,0,0), (0,0,1), (0,1,0)".into())
}

fn engagement_formula() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(0x5EED_0004);
    for _ in 0..10_000 {
        let (l, r, p): (u64, u64, u64) =
            (rng.gen_range(0..1 << 40), rng.gen_range(0..1 << 40), rng.gen_range(0..1 << 40));
        ensure!(engagement_from_counts(l, r, p) == l + 3 * r + 2 * p, "({l},{r},{p})");
        let post = Post {
            uri: "u".into(),
            author: "a".into(),
            text: String::new(),
            media: vec![],
            created_at: Utc::now(),
            likes: l,
            reposts: r,
            replies: p,
            fetched_via: None,
        };
        ensure!(engagement_score(&post) == l + 3 * r + 2 * p, "post ({l},{r},{p})");
    }
    Ok("10000 random triples".into())
}

fn generate(server: &Server, feed_id: &str) -> Result<Value, String> {
    let (status, run) = server.request(reqwest::Method::POST, &format!("/api/feeds/{feed_id}/generate"), None);
    ensure!(status == 200, "generate returned {status}: {run}");
    Ok(run)
}

fn preview(server: &Server, feed_id: &str) -> Result<Vec<String>, String> {
    let (status, body) = server.request(reqwest::Method::GET, &format!("/api/feeds/{feed_id}/preview"), None);
    ensure!(status == 200, "preview returned {status}: {body}");
    Ok(body["entries"]
        .as_array()
        .cloned()
        .unwrap_or_default()
        .iter()
        .filter_map(|e| e["uri"].as_str().map(String::from))
        .collect())
}

fn curation_soundness() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = write_service_config(dir.path(), &fixture("corpus_20.jsonl"), 0);
    let mut server = Server::start(&config);
    server.login();
    server.create_feed(pets_feed("pets"));
    let run = generate(&server, "pets")?;
    let c = &run["counts"];
    let counts = (c["fetched"].as_u64(), c["eligible"].as_u64(), c["ranked"].as_u64());
    ensure!(counts == (Some(20), Some(16), Some(16)), "counts {c}");

    let candidates: HashSet<String> = std::fs::read_to_string(fixture("corpus_20.jsonl"))
        .map_err(|e| e.to_string())?
        .lines()
        .filter_map(|l| serde_json::from_str::<Value>(l).ok())
        .filter_map(|v| v["post"]["uri"].as_str().map(String::from))
        .collect();
    let ranked = preview(&server, "pets")?;
    let excluded: HashSet<&String> = candidates.iter().filter(|u| !ranked.contains(u)).collect();
    ensure!(excluded.len() == 4, "{} excluded uris", excluded.len());
    let mut pages = 0;
    for limit in [1, 3, 5, 16, 50] {
        let served = server.walk("pets", limit)?;
        ensure!(served.len() == 16, "limit {limit}: {} uris served", served.len());
        ensure!(!served.iter().any(|u| excluded.contains(u)), "limit {limit}: excluded uri served");
        pages += served.len().div_ceil(limit);
    }
    Ok(format!("fetched 20 eligible 16 ranked 16, no excluded uri in {pages} pages"))
}

fn bucket_partition() -> Outcome {
    let expected = [
        Bucket::Never,
        Bucket::ShowLess,
        Bucket::ShowLess,
        Bucket::Unspecified,
        Bucket::Unspecified,
        Bucket::Prefer,
        Bucket::Prefer,
        Bucket::Prefer,
        Bucket::StronglyPrefer,
        Bucket::StronglyPrefer,
        Bucket::StronglyPrefer,
    ];
    for (score, bucket) in expected.iter().enumerate() {
        let got = bucket_for_score(score as i64).map_err(|e| format!("score {score}: {e}"))?;
        ensure!(got == *bucket, "score {score}: {got:?} instead of {bucket:?}");
    }
    for score in [-1, 11, 255] {
        ensure!(bucket_for_score(score).is_err(), "score {score} was accepted");
    }
    Ok("0 never, 1-2 show_less, 3-4 unspecified, 5-7 prefer, 8-10 strongly_prefer".into())
}

fn reference() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 3, 1, 12, 0, 0).unwrap()
}

fn window_post(uri: &str, created_at: DateTime<Utc>) -> Post {
    Post {
        uri: uri.into(),
        author: "did:plc:author".into(),
        text: String::new(),
        media: vec![],
        created_at,
        likes: 0,
        reposts: 0,
        replies: 0,
        fetched_via: None,
    }
}

fn feed_config(source: &str) -> FeedConfig {
    FeedConfig {
        feed_id: "windows".into(),
        owner: "did:plc:owner".into(),
        description: "windows".into(),
        sources: vec![Source::new(SourceKind::Feed, source, source, SourceOrigin::UserAdded)],
        include_prompts: vec![],
        limit_prompts: vec![],
        ranking: RankingStyle::Balanced,
        active: true,
        created_at: reference(),
        updated_at: reference(),
    }
}

fn uri_set(posts: &[Post]) -> HashSet<String> {
    posts.iter().map(|p| p.uri.clone()).collect()
}

fn sourcing_windows() -> Outcome {
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let now = reference();
        let sourcer = |lines: Vec<CorpusLine>| {
            Sourcer::new(Arc::new(FixtureAdapter::from_lines(lines)), SourcerSettings::default())
        };
        let line = |p: Post| CorpusLine { source_identifier: "src".into(), post: p };
        let cfg = feed_config("src");

        // 150 posts 30 minutes apart, all within 96 h.
        let lines =
            (0..150).map(|i| line(window_post(&format!("p{i:03}"), now - chrono::Duration::minutes(30 * i)))).collect();
        let out = sourcer(lines).initial_fetch(&cfg, now).await.map_err(|e| e.to_string())?;
        let newest: HashSet<String> = (0..100).map(|i| format!("p{i:03}")).collect();
        ensure!(uri_set(&out.posts) == newest, "initial fetch kept {} posts, not the newest 100", out.posts.len());

        let edge = now - chrono::Duration::hours(96);
        let lines = vec![
            line(window_post("edge", edge)),
            line(window_post("too-old", edge - chrono::Duration::seconds(1))),
            line(window_post("future", now + chrono::Duration::seconds(1))),
        ];
        let out = sourcer(lines).initial_fetch(&cfg, now).await.map_err(|e| e.to_string())?;
        ensure!(uri_set(&out.posts) == HashSet::from(["edge".to_string()]), "boundary: {:?}", uri_set(&out.posts));

        let last = now - chrono::Duration::minutes(30);
        let lines = vec![
            line(window_post("before", last - chrono::Duration::minutes(1))),
            line(window_post("at-last", last)),
            line(window_post("new", last + chrono::Duration::minutes(5))),
            line(window_post("at-now", now)),
            line(window_post("cached", last + chrono::Duration::minutes(10))),
            line(window_post("after-now", now + chrono::Duration::seconds(1))),
        ];
        let cached: HashSet<String> = ["before", "cached"].iter().map(|s| s.to_string()).collect();
        let out = sourcer(lines).incremental_fetch(&cfg, last, now, &cached).await.map_err(|e| e.to_string())?;
        let expected = HashSet::from(["new".to_string(), "at-now".to_string()]);
        ensure!(uri_set(&out.posts) == expected, "incremental: {:?}", uri_set(&out.posts));
        Ok("newest 100 of 150, now-96h included, incremental (last, now] minus cached".to_string())
    })
}

fn seven_post_server(dir: &std::path::Path, latency_ms: u64, now: &str) -> Server {
    let corpus = dir.join("seven.jsonl");
    if !corpus.exists() {
        write_tag_corpus(&corpus, "seven", 7);
    }
    Server::start(&write_service_config_at(dir, &corpus, latency_ms, now))
}

const T0: &str = "2025-03-01T12:00:00Z";
const T1: &str = "2025-03-01T12:30:00Z";

fn first_cursor(server: &Server, feed_id: &str) -> Result<String, String> {
    let (status, body) = server.skeleton(feed_id, 2, None);
    ensure!(status == 200, "skeleton returned {status}");
    body["cursor"].as_str().map(String::from).ok_or_else(|| format!("no cursor in {body}"))
}

fn skeleton_pagination() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut server = seven_post_server(dir.path(), 0, T0);
    server.login();
    server.create_feed(hashtag_feed("seven", "seven"));
    generate(&server, "seven")?;
    let materialized = preview(&server, "seven")?;
    ensure!(materialized.len() == 7, "{} posts materialized", materialized.len());
    let walked = server.walk("seven", 2)?;
    ensure!(walked == materialized, "walk {walked:?} differs from {materialized:?}");

    let stale = first_cursor(&server, "seven")?;
    generate(&server, "seven")?;
    let (_, top) = server.skeleton("seven", 2, None);
    let (status, restarted) = server.skeleton("seven", 2, Some(&stale));
    ensure!(status == 200, "stale cursor returned {status}");
    ensure!(restarted["feed"] == top["feed"], "stale cursor did not restart at offset 0");
    ensure!(restarted["cursor"] == top["cursor"], "cursor after restart {}", restarted["cursor"]);
    Ok(format!(
        "4 pages reconstruct 7 posts; stale {stale} restarts at {}",
        restarted["cursor"].as_str().unwrap_or("-")
    ))
}

fn crash_recovery() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut server = seven_post_server(dir.path(), 0, T0);
    server.login();
    server.create_feed(hashtag_feed("seven", "seven"));
    generate(&server, "seven")?;
    let before = server.walk("seven", 2)?;
    let cursor_before = first_cursor(&server, "seven")?;
    server.kill();

    // A later clock so the second run has a non-empty fetch window to wait on.
    let mut slow = seven_post_server(dir.path(), 5_000, T1);
    slow.login();
    let (base, token) = (slow.base.clone(), slow.token().to_string());
    let pending = std::thread::spawn(move || {
        reqwest::blocking::Client::new()
            .post(format!("{base}/api/feeds/seven/generate"))
            .bearer_auth(token)
            .timeout(Duration::from_secs(30))
            .send()
            .map(|r| r.status().as_u16())
    });
    std::thread::sleep(Duration::from_millis(750));
    if pending.is_finished() {
        let status = pending.join().map_err(|_| "request thread panicked".to_string())?;
        return Err(format!("second generation finished before the kill: {status:?}"));
    }
    slow.kill();
    let interrupted = pending.join().map_err(|_| "request thread panicked".to_string())?;
    ensure!(interrupted.is_err(), "generation request completed with {interrupted:?}");

    let restarted = seven_post_server(dir.path(), 0, T1);
    let after = restarted.walk("seven", 2)?;
    ensure!(after == before, "served {after:?} instead of {before:?}");
    let cursor_after = first_cursor(&restarted, "seven")?;
    ensure!(cursor_after == cursor_before, "cursor {cursor_after} instead of {cursor_before}");
    Ok(format!("killed mid-run; restart serves the same 7 posts with cursor {cursor_after}"))
}

fn run_pets() -> Result<Vec<u8>, String> {
    let (config, corpus, rules) = (fixture("feed_pets.json"), fixture("corpus_20.jsonl"), fixture("mock_rules.json"));
    let out = bonsai(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--corpus",
        corpus.to_str().unwrap(),
        "--mock-rules",
        rules.to_str().unwrap(),
    ]);
    ensure!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let first = run_pets()?;
    let second = run_pets()?;
    ensure!(!first.is_empty(), "empty output");
    ensure!(first == second, "outputs differ");
    Ok(format!("{} identical bytes over two runs", first.len()))
}

fn desk_scale() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (catalog, corpus, rules) = (fixture("catalog.jsonl"), fixture("corpus_500.jsonl"), fixture("mock_rules.json"));
    let draft = dir.path().join("draft.json");
    let started = Instant::now();
    let plan = bonsai(&[
        "plan",
        "--description",
        "adorable pet pictures, no sad content",
        "--catalog",
        catalog.to_str().unwrap(),
        "--mock-rules",
        rules.to_str().unwrap(),
        "--now",
        "2025-03-01T12:00:00Z",
    ]);
    ensure!(plan.status.success(), "plan exit {:?}: {}", plan.status.code(), String::from_utf8_lossy(&plan.stderr));
    std::fs::write(&draft, &plan.stdout).map_err(|e| e.to_string())?;
    let run = bonsai(&[
        "run",
        "--config",
        draft.to_str().unwrap(),
        "--corpus",
        corpus.to_str().unwrap(),
        "--mock-rules",
        rules.to_str().unwrap(),
        "--json",
    ]);
    let elapsed = started.elapsed();
    ensure!(run.status.success(), "run exit {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stderr));
    let doc: Value = serde_json::from_slice(&run.stdout).map_err(|e| e.to_string())?;
    let c = &doc["counts"];
    ensure!(c["ranked"].as_u64().unwrap_or(0) > 0, "nothing ranked: {c}");
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!(
        "500-post corpus: fetched {} eligible {} ranked {} in {:.2}s",
        c["fetched"],
        c["eligible"],
        c["ranked"],
        elapsed.as_secs_f64()
    ))
}
