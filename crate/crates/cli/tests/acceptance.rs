//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any of them fails. Pass substrings as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- null`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use cascadeflow::cascade::{build_cascades, max_depth, structural_virality, Cascade, CascadeBuild};
use cascadeflow::influence::{compute_influence, g_index, h_index, hg_index, InfluenceTable};
use cascadeflow::ingest::{UserDirectory, UserMeta};
use cascadeflow::metrics::{
    crp, repost_behavior, summarize, MetricsSummary, PopularityBucket, PopularityBuckets, SummaryConfig,
};
use cascadeflow::model::{FollowerGraph, HOUR_MS};
use cascadeflow::regress::{featurize, HourBins};
use cascadeflow::synth::{generate, SynthConfig, SynthOutput};
use cascadeflow::timeline::{
    build_exposures, resolve_repost_outcome, CascadeIndex, ExposureOptions, ExposureRecord, TimelineContext,
};
use cascadeflow::{InfluenceCategory, PostEvent, PostId, RepostEvent, RepostId, TimeWindow, UserId};
use cascadeflow_cli::pipeline::popularity;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashSet;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn main() {
    type Check = (&'static str, fn() -> Outcome);
    let checks: [Check; 11] = [
        ("hg suite", hg_suite),
        ("two-of-three fixture", crp_fixture),
        ("cascade oracle", cascade_oracle),
        ("ground-truth recovery", recovery),
        ("structural virality", virality_oracle),
        ("metric conservation", conservation),
        ("prestige trend", prestige_trend),
        ("null model", null_model),
        ("regression export", regression_export),
        ("determinism", determinism),
        ("throughput", throughput),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in checks {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!o.pass);
        println!(
            "{} {name}: {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            started.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- helpers

fn cli(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascadeflow"))
        .args(args)
        .current_dir(cwd)
        .env("CASCADEFLOW_LOG", "info")
        .output()
        .expect("spawn cascadeflow")
}

fn cli_ok(args: &[&str], cwd: &Path) -> Output {
    let o = cli(args, cwd);
    assert!(o.status.success(), "cascadeflow {args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn read_csv(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .records()
        .map(|r| r.unwrap())
        .collect()
}

fn users(n: usize) -> Vec<UserId> {
    (1..=n as u64).map(UserId).collect()
}

fn synth_config(n_users: usize, n_roots: usize, beta: f64, seed: u64) -> SynthConfig {
    SynthConfig { n_users, n_roots, prestige_beta: beta, seed, ..SynthConfig::default() }
}

fn build(out: &SynthOutput) -> CascadeBuild {
    build_cascades(&out.posts, &out.reposts, &out.graph, &FxHashSet::default())
}

// ---------------------------------------------------------------- hg

fn oracle_h(counts: &[u64]) -> u64 {
    (0..=counts.len() as u64).filter(|&h| counts.iter().filter(|&&c| c >= h).count() as u64 >= h).max().unwrap()
}

fn oracle_g(counts: &[u64]) -> u64 {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    (0..=sorted.len())
        .filter(|&g| sorted[..g].iter().map(|&c| c as u128).sum::<u128>() >= (g * g) as u128)
        .max()
        .unwrap() as u64
}

fn hg_suite() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut vectors: Vec<Vec<u64>> = vec![vec![], vec![0; 500], vec![100_000; 500], vec![7; 7], vec![1]];
    while vectors.len() < 10_000 {
        let len = rng.random_range(0..=500);
        // spread the scale so h and g land anywhere between 0 and the length
        let top = 10f64.powf(rng.random_range(0.0..=5.0)).round() as u64;
        vectors.push((0..len).map(|_| rng.random_range(0..=top)).collect());
    }
    let mut mismatches = 0;
    let (mut max_h, mut max_g) = (0, 0);
    for v in &vectors {
        let mut sorted = v.clone();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let (h, g) = (h_index(&sorted).unwrap(), g_index(&sorted).unwrap());
        let (oh, og) = (oracle_h(v), oracle_g(v));
        let exact = h == oh && g == og && hg_index(h, g) == ((oh * og) as f64).sqrt();
        mismatches += usize::from(!exact);
        max_h = max_h.max(h);
        max_g = max_g.max(g);
    }
    let elapsed = started.elapsed();
    outcome(
        mismatches == 0 && elapsed < Duration::from_secs(5),
        format!(
            "{} vectors, {mismatches} mismatches, h up to {max_h}, g up to {max_g}, {:.2} s including oracles (limit 5 s)",
            vectors.len(),
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- fixture

fn crp_fixture() -> Outcome {
    // author 1 posts; sender 2 reposts; followers 3, 4, 5 of the sender see
    // it and 3 and 4 repost. User 5 is active through another post.
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("posts.ndjson"),
        "{\"post_id\":1,\"author_id\":1,\"timestamp_ms\":0}\n{\"post_id\":2,\"author_id\":9,\"timestamp_ms\":100}\n",
    )
    .unwrap();
    let reposts = [(10, 2, 1, 10), (11, 3, 1, 20), (12, 4, 1, 30), (13, 5, 2, 110)];
    let lines: String = reposts
        .iter()
        .map(|(id, u, src, t)| {
            format!("{{\"repost_id\":{id},\"user_id\":{u},\"source_post_id\":{src},\"timestamp_ms\":{t}}}\n")
        })
        .collect();
    std::fs::write(d.join("reposts.ndjson"), lines).unwrap();
    std::fs::write(d.join("graph.csv"), "follower_id,followee_id\n2,1\n3,2\n4,2\n5,2\n5,9\n").unwrap();

    cli_ok(
        &["crp", "--posts", "posts.ndjson", "--reposts", "reposts.ndjson", "--graph", "graph.csv", "--window", "24h"],
        d,
    );
    let rows = read_csv(&d.join("out/crp.csv"));
    let viewed: Vec<_> = rows.iter().filter(|r| &r[4] != "0").collect();
    let cli_ok_ = viewed.len() == 1
        && &viewed[0][2] == "low"
        && &viewed[0][4] == "3"
        && &viewed[0][5] == "2"
        && viewed[0][6].parse::<f64>().unwrap() == 2.0 / 3.0;

    // the same through the library
    let posts = vec![
        PostEvent { post_id: PostId(1), author: UserId(1), timestamp: 0, is_official: false },
        PostEvent { post_id: PostId(2), author: UserId(9), timestamp: 100, is_official: false },
    ];
    let events: Vec<RepostEvent> = reposts
        .iter()
        .map(|&(id, u, src, t)| RepostEvent {
            repost_id: RepostId(id),
            reposter: UserId(u),
            source_post_id: PostId(src),
            timestamp: t,
        })
        .collect();
    let (graph, _) =
        FollowerGraph::from_edges([(2, 1), (3, 2), (4, 2), (5, 2), (5, 9)].map(|(a, b)| (UserId(a), UserId(b))));
    let officials = FxHashSet::default();
    let cascades = build_cascades(&posts, &events, &graph, &officials).cascades;
    let ctx = TimelineContext::new(&graph, &cascades, &officials);
    let views = build_exposures(&cascades, &ctx, &ExposureOptions::new(TimeWindow::hours(24)));
    let outcomes = resolve_repost_outcome(&views, &cascades).unwrap();
    let table = InfluenceTable::from_categories([(UserId(2), InfluenceCategory::High)]);
    let cells = crp(&outcomes, &table, &popularity(&events), &PopularityBuckets::default(), TimeWindow::hours(24));
    let cell = cells
        .iter()
        .find(|c| c.category == Some(InfluenceCategory::High) && c.popularity == PopularityBucket::Below(1000))
        .unwrap();
    let lib_ok = cell.viewed == 3 && cell.reposted == 2 && cell.crp == Some(2.0 / 3.0);
    outcome(
        cli_ok_ && lib_ok,
        format!(
            "sender CRP {}/{} = {:?} via library; CLI row {:?}",
            cell.reposted,
            cell.viewed,
            cell.crp,
            viewed.first().map(|r| r.iter().collect::<Vec<_>>())
        ),
    )
}

// ---------------------------------------------------------------- cascades

fn cascade_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut mismatched, mut edges, mut largest, mut fallbacks) = (0, 0usize, 0usize, 0usize);
    for i in 0..100u64 {
        let size = if i % 10 == 0 { 10_000 } else { rng.random_range(1..=10_000) };
        let (posts, reposts, graph, officials) = if i % 2 == 0 {
            let users = rng.random_range(20..=3_000);
            let n_posts = rng.random_range(size as u64 / 2_000 + 1..=300);
            let s = common::random_stream(&mut rng, users, n_posts, size as u64);
            (s.posts, s.reposts, s.graph, s.officials)
        } else {
            let cfg = SynthConfig {
                n_users: rng.random_range(2_000..=20_000),
                max_followees: 500,
                n_roots: rng.random_range(500..=5_000),
                prestige_beta: 2.0,
                hidden_edge_fraction: if i % 4 == 1 { 0.2 } else { 0.0 },
                seed: i,
                ..SynthConfig::default()
            };
            let mut out = generate(&cfg).unwrap();
            out.reposts.truncate(size);
            (out.posts, out.reposts, out.graph, FxHashSet::default())
        };
        let build = build_cascades(&posts, &reposts, &graph, &officials);
        let got = common::cascade_edges(&build.cascades);
        let want = common::naive_cascade_edges(&posts, &reposts, &graph, &officials);
        mismatched += usize::from(got != want);
        edges += want.len();
        largest = largest.max(reposts.len());
        fallbacks += build.cascades.iter().map(Cascade::fallback_count).sum::<usize>();
    }
    let elapsed = started.elapsed();
    outcome(
        mismatched == 0 && elapsed < Duration::from_secs(60),
        format!(
            "100 instances (largest {largest} reposts, {edges} edges, {fallbacks} fallbacks), {mismatched} differ; {:.1} s (limit 60 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn recovery() -> Outcome {
    let (mut matched, mut total, mut fallbacks) = (0usize, 0usize, 0usize);
    for seed in 1..=5 {
        let out = generate(&synth_config(20_000, 20_000, 2.0, seed)).unwrap();
        for c in build(&out).cascades {
            fallbacks += c.fallback_count();
            for (child, parent) in c.edges() {
                total += 1;
                matched += usize::from(out.truth.parent(child) == Some(parent));
            }
        }
    }
    let rate = matched as f64 / total as f64;
    outcome(
        total > 0 && rate >= 0.99,
        format!("{matched}/{total} parents match ground truth ({:.4}%), {fallbacks} root fallbacks", 100.0 * rate),
    )
}

fn chain(parents: &[Option<u64>]) -> Cascade {
    let root = PostEvent { post_id: PostId(1), author: UserId(0), timestamp: 0, is_official: false };
    let links = parents
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let id = i as u64 + 1;
            let r = RepostEvent {
                repost_id: RepostId(id),
                reposter: UserId(id),
                source_post_id: PostId(1),
                timestamp: id as i64,
            };
            (r, p.map(RepostId))
        })
        .collect();
    Cascade::from_parent_links(&root, links).unwrap()
}

fn virality_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst, mut depth_mismatch) = (0f64, 0);
    for _ in 0..500 {
        let reposts = rng.random_range(1..=199);
        let c = common::random_tree(&mut rng, reposts);
        let got = structural_virality(&c).unwrap();
        let want = common::bfs_structural_virality(&c).unwrap();
        worst = worst.max((got - want).abs());
        depth_mismatch += usize::from(max_depth(&c) != common::naive_max_depth(&c));
    }
    let path3 = structural_virality(&chain(&[None, Some(1)])).unwrap();
    let star4 = structural_virality(&chain(&[None, None, None])).unwrap();
    let fixtures = path3 == 4.0 / 3.0 && star4 == 1.5;
    outcome(
        worst <= 1e-9 && depth_mismatch == 0 && fixtures,
        format!(
            "500 trees, max |error| {worst:.1e} (limit 1e-9), {depth_mismatch} depth mismatches; path-of-3 {path3}, star-of-4 {star4}"
        ),
    )
}

// ---------------------------------------------------------------- conservation

fn conservation() -> Outcome {
    let mut problems = Vec::new();
    let mut checked_cells = 0usize;
    let windows = [
        TimeWindow::minutes_30(),
        TimeWindow::hours(1),
        TimeWindow::hours(24),
        TimeWindow::new(HOUR_MS, 6 * HOUR_MS).unwrap(),
    ];
    let buckets = PopularityBuckets::new(vec![3, 10, 30]);
    let min_reposts = 3;
    for seed in 1..=5 {
        let mut cfg = synth_config(5_000, 5_000, 2.0, seed);
        cfg.max_followees = 500;
        cfg.hidden_edge_fraction = if seed % 2 == 0 { 0.1 } else { 0.0 };
        let out = generate(&cfg).unwrap();
        let cascades = build(&out).cascades;
        // leave a slice of users out of the table so the unclassified row is exercised
        let scored: Vec<UserId> = users(cfg.n_users).into_iter().filter(|u| u.0 % 17 != 0).collect();
        let influence = compute_influence(&out.posts, &out.reposts, &scored).unwrap();
        let sizes = popularity(&out.reposts);
        let officials = FxHashSet::default();
        let ctx = TimelineContext::new(&out.graph, &cascades, &officials);
        let unbounded = ExposureOptions::new(TimeWindow::unbounded());
        let summary_cfg = SummaryConfig {
            buckets: buckets.clone(),
            windows: windows.to_vec(),
            min_reposts,
            series_bucket_ms: HOUR_MS,
            series_horizon_ms: 24 * HOUR_MS,
        };
        let s = summarize(&cascades, &ctx, &unbounded, &influence, &sizes, &summary_cfg).unwrap();
        let all = resolve_repost_outcome(&build_exposures(&cascades, &ctx, &unbounded), &cascades).unwrap();
        let size_of = |e: &ExposureRecord| sizes.get(&e.root_post).copied().unwrap_or(0);
        check_summary(&s, &all, &windows, &buckets, min_reposts, size_of, &mut problems, &mut checked_cells);
        let b = repost_behavior(&out.reposts, None, &[0.001, 0.01, 0.1, 0.5, 1.0]).unwrap();
        if b.ccdf.windows(2).any(|w| w[1].1 > w[0].1) || b.ccdf.first().is_some_and(|f| f.1 != 1.0) {
            problems.push(format!("seed {seed}: CCDF is not a non-increasing survival curve"));
        }
        if b.cumulative_share.last().map(|x| x.1) != Some(1.0) {
            problems.push(format!("seed {seed}: all users hold {:?} of reposts", b.cumulative_share.last()));
        }
        let share = s.shares.finish(&influence);
        for (name, col) in [
            ("user", share.rows.iter().filter_map(|r| r.user_share).collect::<Vec<_>>()),
            ("view", share.rows.iter().filter_map(|r| r.view_share).collect()),
            ("repost", share.rows.iter().filter_map(|r| r.repost_share).collect()),
        ] {
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                problems.push(format!("seed {seed}: {name} shares sum to {sum}"));
            }
        }
        let counted = share.rows.iter().map(|r| r.views).sum::<u64>() + share.unclassified_views;
        let expected = all.iter().filter(|(e, _)| size_of(e) >= min_reposts).count() as u64;
        if counted != expected {
            problems.push(format!("seed {seed}: share views {counted} != {expected}"));
        }
    }
    outcome(
        problems.is_empty(),
        format!(
            "5 runs, {checked_cells} cells checked; {}",
            if problems.is_empty() { "no violations".into() } else { problems.join("; ") }
        ),
    )
}

#[allow(clippy::too_many_arguments)]
fn check_summary(
    s: &MetricsSummary,
    all: &[(ExposureRecord, bool)],
    windows: &[TimeWindow],
    buckets: &PopularityBuckets,
    min_reposts: u64,
    size_of: impl Fn(&ExposureRecord) -> u64,
    problems: &mut Vec<String>,
    checked: &mut usize,
) {
    let categories: Vec<Option<InfluenceCategory>> =
        InfluenceCategory::ALL.iter().copied().map(Some).chain([None]).collect();
    for (acc, w) in s.crp.iter().zip(windows) {
        for (b, bucket) in buckets.buckets().iter().enumerate() {
            let (mut v, mut r) = (0, 0);
            for &cat in &categories {
                let c = acc.counts(cat, b);
                *checked += 1;
                if c.reposted > c.viewed {
                    problems.push(format!("{w:?} {bucket} {cat:?}: {} reposted of {} viewed", c.reposted, c.viewed));
                }
                v += c.viewed;
                r += c.reposted;
            }
            let in_bucket = |size: u64| match *bucket {
                PopularityBucket::Below(t) => size < t,
                PopularityBucket::AtLeast(t) => size >= t,
            };
            let expect: Vec<_> =
                all.iter().filter(|(e, _)| w.contains(e.elapsed_since_root) && in_bucket(size_of(e))).collect();
            let er = expect.iter().filter(|x| x.1).count() as u64;
            if (v, r) != (expect.len() as u64, er) {
                problems.push(format!("{w:?} {bucket}: categories sum to ({v}, {r}), totals ({}, {er})", expect.len()));
            }
        }
    }
    let series_total: u64 = s.series.rows().iter().map(|r| r.viewed).sum();
    let series_expect =
        all.iter().filter(|(e, _)| size_of(e) >= min_reposts && e.elapsed_since_root < 24 * HOUR_MS).count() as u64;
    if series_total != series_expect {
        problems.push(format!("series holds {series_total} views, expected {series_expect}"));
    }
    if s.views != all.len() as u64 {
        problems.push(format!("summary counted {} views of {}", s.views, all.len()));
    }
}

// ---------------------------------------------------------------- prestige

/// The 5,000-repost "popular" cut of a 14.9M-user population, scaled down
/// to the synthetic population.
fn popular_threshold(n_users: usize) -> u64 {
    (5_000.0 * n_users as f64 / 14_910_772.0).ceil() as u64
}

const TREND_USERS: usize = 50_000;
const SEEDS: u64 = 20;

fn prestige_trend() -> Outcome {
    let threshold = popular_threshold(TREND_USERS);
    let (mut ordered, mut hours_ok, mut hours_total) = (0, 0, 0);
    let mut worst_seed_hourly = 1.0f64;
    let mut examples = Vec::new();
    for seed in 1..=SEEDS {
        let out = generate(&synth_config(TREND_USERS, TREND_USERS, 2.0, seed)).unwrap();
        let cascades = build(&out).cascades;
        let influence = compute_influence(&out.posts, &out.reposts, &users(TREND_USERS)).unwrap();
        let officials = FxHashSet::default();
        let ctx = TimelineContext::new(&out.graph, &cascades, &officials);
        let cfg = SummaryConfig {
            buckets: PopularityBuckets::new(vec![threshold]),
            windows: vec![TimeWindow::hours(24)],
            min_reposts: threshold,
            series_bucket_ms: HOUR_MS,
            series_horizon_ms: 24 * HOUR_MS,
        };
        let opts = ExposureOptions::new(TimeWindow::unbounded());
        let s = summarize(&cascades, &ctx, &opts, &influence, &popularity(&out.reposts), &cfg).unwrap();
        // bucket 1 is `>= threshold`
        let top = s.crp[0].counts(Some(InfluenceCategory::VeryHigh), 1).crp();
        let low = s.crp[0].counts(Some(InfluenceCategory::Low), 1).crp();
        if let (Some(t), Some(l)) = (top, low) {
            ordered += usize::from(t > l);
            if examples.len() < 3 {
                examples.push(format!("{t:.3} vs {l:.3}"));
            }
        }
        let (mut ok, mut total) = (0, 0);
        for h in 0..s.series.n_buckets() {
            let t = s.series.get(Some(InfluenceCategory::VeryHigh), h).crp();
            let l = s.series.get(Some(InfluenceCategory::Low), h).crp();
            if let (Some(t), Some(l)) = (t, l) {
                total += 1;
                ok += usize::from(t > l);
            }
        }
        if total > 0 {
            worst_seed_hourly = worst_seed_hourly.min(ok as f64 / total as f64);
        }
        hours_ok += ok;
        hours_total += total;
    }
    let hourly = hours_ok as f64 / hours_total.max(1) as f64;
    outcome(
        ordered >= 19 && hours_total > 0 && hourly >= 0.9,
        format!(
            "popular threshold {threshold}: very_high > low in {ordered}/{SEEDS} seeds (need 19; e.g. {}); hourly {hours_ok}/{hours_total} = {:.1}% (need 90%, worst seed {:.1}%)",
            examples.join(", "),
            100.0 * hourly,
            100.0 * worst_seed_hourly
        ),
    )
}

/// Largest |z| of any group's CRP against the pooled CRP, with standard
/// errors clustered by root post (delta method on the ratio estimators).
fn max_cluster_z(cascades: &[Cascade], ctx: &TimelineContext<'_>, groups: &InfluenceTable) -> f64 {
    let opts = ExposureOptions::new(TimeWindow::hours(24));
    let mut clusters: Vec<[(f64, f64); 6]> = Vec::new();
    for c in cascades {
        let mut cl = [(0.0, 0.0); 6];
        CascadeIndex::new(c).for_each_exposure(ctx, &opts, |e, r| {
            if let Some(k) = groups.category(e.sender) {
                cl[k.rank()].0 += 1.0;
                cl[k.rank()].1 += f64::from(u8::from(r));
            }
        });
        if cl.iter().any(|x| x.0 > 0.0) {
            clusters.push(cl);
        }
    }
    let (mut v, mut r) = ([0.0; 6], [0.0; 6]);
    for cl in &clusters {
        for k in 0..6 {
            v[k] += cl[k].0;
            r[k] += cl[k].1;
        }
    }
    let (vt, rt) = (v.iter().sum::<f64>(), r.iter().sum::<f64>());
    let pooled = rt / vt;
    (0..6)
        .filter(|&k| v[k] > 0.0)
        .map(|k| {
            let ck = r[k] / v[k];
            let var: f64 = clusters
                .iter()
                .map(|cl| {
                    let (cv, cr) = cl.iter().fold((0.0, 0.0), |a, x| (a.0 + x.0, a.1 + x.1));
                    let e = (cl[k].1 - ck * cl[k].0) / v[k] - (cr - pooled * cv) / vt;
                    e * e
                })
                .sum();
            if var > 0.0 {
                ((ck - pooled) / var.sqrt()).abs()
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

fn null_model() -> Outcome {
    let (mut within, mut within_hg) = (0, 0);
    let mut worst = Vec::new();
    for seed in 1..=SEEDS {
        let out = generate(&synth_config(TREND_USERS, TREND_USERS, 0.0, seed)).unwrap();
        let cascades = build(&out).cascades;
        let officials = FxHashSet::default();
        let ctx = TimelineContext::new(&out.graph, &cascades, &officials);
        let z = max_cluster_z(&cascades, &ctx, &out.truth.tier_table());
        within += usize::from(z <= 3.0);
        worst.push(z);
        let hg = compute_influence(&out.posts, &out.reposts, &users(TREND_USERS)).unwrap();
        within_hg += usize::from(max_cluster_z(&cascades, &ctx, &hg) <= 3.0);
    }
    let max = worst.iter().copied().fold(0.0, f64::max);
    outcome(
        within >= 18,
        format!(
            "all tiers within 3 clustered SE of the pooled CRP in {within}/{SEEDS} seeds (need 18; largest |z| {max:.2}); grouped by hg category instead: {within_hg}/{SEEDS}"
        ),
    )
}

// ---------------------------------------------------------------- regression

fn regression_export() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    cli_ok(&["synth", "--n-users", "20000", "--n-roots", "20000", "--seed", "7", "--out", "data"], d);
    cli_ok(
        &[
            "sample-regression",
            "--config",
            "data/run_config.json",
            "--rate",
            "0.05",
            "--multiplier",
            "2",
            "--out",
            "reg",
        ],
        d,
    );
    let rows = read_csv(&d.join("reg/regression.csv"));
    let positives: Vec<_> = rows.iter().filter(|r| &r[0] == "1").collect();
    let negatives: Vec<_> = rows.iter().filter(|r| &r[0] == "0").collect();
    let positive_posts: HashSet<&str> = positives.iter().map(|r| &r[5]).collect();
    let orphans = negatives.iter().filter(|r| !positive_posts.contains(&r[5])).count();
    let moments = |col: usize| {
        let x: Vec<f64> = rows.iter().map(|r| r[col].parse().unwrap()).collect();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        (mean, sd)
    };
    let (sm, ssd) = moments(3);
    let (um, usd) = moments(4);
    let z_ok = [sm, um].iter().all(|m| m.abs() <= 1e-6) && [ssd, usd].iter().all(|s| (s - 1.0).abs() <= 1e-6);
    let ratio_ok = !positives.is_empty() && negatives.len() == 2 * positives.len();

    // follower counts 0, 9 and 99 are evenly spaced after ln(1 + x)
    let mut directory = UserDirectory::default();
    for (u, followers) in [(1, 0), (2, 9), (3, 99), (4, 5)] {
        directory.update(UserId(u), UserMeta { followers_count: Some(followers), ..Default::default() });
    }
    let cases: Vec<(ExposureRecord, bool)> = (1..=3)
        .map(|s| {
            let e = ExposureRecord {
                viewer: UserId(4),
                sender: UserId(s),
                root_post: PostId(1),
                sender_repost_id: RepostId(s),
                exposure_time: 0,
                elapsed_since_root: 0,
            };
            (e, s == 1)
        })
        .collect();
    let table = InfluenceTable::from_categories((1..=3).map(|u| (UserId(u), InfluenceCategory::Mid)));
    let f = featurize(&cases, &table, &directory, &FollowerGraph::default(), &HourBins::default());
    let z: Vec<f64> = f.rows.iter().map(|r| r.sender_followers_log_z).collect();
    let fixture_ok =
        z.len() == 3 && (z[0] + 1.5f64.sqrt()).abs() < 1e-9 && z[1].abs() < 1e-9 && (z[2] - 1.5f64.sqrt()).abs() < 1e-9;
    let shown: Vec<String> = z.iter().map(|v| format!("{v:.4}")).collect();
    outcome(
        ratio_ok && orphans == 0 && z_ok && fixture_ok,
        format!(
            "{} positives, {} negatives, {orphans} negatives without a positive post; z means {sm:.1e}/{um:.1e}, sds {ssd:.9}/{usd:.9}; fixture z = [{}]",
            positives.len(),
            negatives.len(),
            shown.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- CLI runs

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    cli_ok(&["synth", "--n-users", "20000", "--n-roots", "20000", "--seed", "11", "--out", "data"], d);
    let mut runs = Vec::new();
    for workers in ["1", "8"] {
        cli_ok(
            &[
                "run",
                "--config",
                "data/run_config.json",
                "--workers",
                workers,
                "--rate",
                "0.05",
                "--json",
                "--min-reposts",
                "5",
                "--out",
                "res",
            ],
            d,
        );
        let kept = d.join(format!("res-{workers}"));
        std::fs::rename(d.join("res"), &kept).unwrap();
        runs.push(kept);
    }
    let mut names: Vec<String> =
        std::fs::read_dir(&runs[0]).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    let other: HashSet<String> =
        std::fs::read_dir(&runs[1]).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| {
            !other.contains(*n) || std::fs::read(runs[0].join(n)).unwrap() != std::fs::read(runs[1].join(n)).unwrap()
        })
        .collect();
    let bytes: u64 = names.iter().map(|n| std::fs::metadata(runs[0].join(n)).unwrap().len()).sum();
    outcome(
        differing.is_empty() && names.len() == other.len() && names.len() >= 15,
        format!("{} files ({bytes} bytes) from 1 and 8 workers; differing: {differing:?}", names.len()),
    )
}

fn throughput() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen_started = Instant::now();
    cli_ok(&["synth", "--n-users", "100000", "--n-roots", "300000", "--beta", "2", "--seed", "1", "--out", "data"], d);
    let gen_secs = gen_started.elapsed().as_secs_f64();
    let reposts = std::fs::read_to_string(d.join("data/reposts.ndjson")).unwrap().lines().count();
    let started = Instant::now();
    let o = cli_ok(&["run", "--config", "data/run_config.json", "--rate", "0.01", "--out", "res"], d);
    let secs = started.elapsed().as_secs_f64();
    let stderr = String::from_utf8_lossy(&o.stderr);
    let peak_kib: Option<u64> = stderr
        .lines()
        .find_map(|l| l.split("peak resident memory ").nth(1))
        .and_then(|s| s.split_whitespace().next())
        .and_then(|s| s.parse().ok());
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let gib = peak_kib.map(|k| k as f64 / (1024.0 * 1024.0));
    outcome(
        reposts >= 1_000_000 && secs < 60.0 && gib.is_some_and(|g| g < 4.0),
        format!(
            "{reposts} reposts / 100000 users: full run {secs:.1} s (limit 60 s), peak RSS {} (limit 4 GiB), {cores} core(s) available; generation took {gen_secs:.1} s",
            gib.map_or("unknown".to_string(), |g| format!("{g:.2} GiB"))
        ),
    )
}
