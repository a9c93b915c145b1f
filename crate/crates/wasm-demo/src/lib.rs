//! Browser bindings for three small cascadeflow operations. Each export
//! returns a JSON string; the plain-Rust versions underneath are what the
//! tests exercise.

use cascadeflow::cascade::{build_cascades, max_depth, structural_virality, Cascade};
use cascadeflow::influence::{compute_influence, g_index, h_index, hg_index};
use cascadeflow::metrics::{summarize, PopularityBuckets, SummaryConfig};
use cascadeflow::model::HOUR_MS;
use cascadeflow::synth::{generate, SynthConfig};
use cascadeflow::timeline::{ExposureOptions, TimelineContext};
use cascadeflow::{InfluenceCategory, PostEvent, PostId, RepostEvent, RepostId, TimeWindow, UserId};
use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest population the page lets you simulate.
pub const MAX_USERS: usize = 30_000;

#[derive(Debug, Serialize, PartialEq)]
pub struct HgResult {
    pub h: u64,
    pub g: u64,
    pub hg: f64,
}

/// h, g and hg of a list of per-post repost counts, in any order.
pub fn hg_of(text: &str) -> Result<HgResult, String> {
    let mut counts = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<u64>().map_err(|_| format!("not a repost count: {s:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let h = h_index(&counts).map_err(|e| e.to_string())?;
    let g = g_index(&counts).map_err(|e| e.to_string())?;
    Ok(HgResult { h, g, hg: hg_index(h, g) })
}

#[derive(Debug, Serialize)]
pub struct CrpRow {
    pub category: &'static str,
    pub users: usize,
    pub viewed: u64,
    pub reposted: u64,
    pub crp: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Simulation {
    pub users: usize,
    pub reposts: usize,
    pub popular_threshold: u64,
    pub popular_cascades: usize,
    pub rows: Vec<CrpRow>,
}

/// Generates a synthetic dataset, rebuilds its cascades and returns the
/// 24-hour CRP of popular cascades by hg category of the sender.
pub fn simulate(n_users: usize, n_roots: usize, beta: f64, seed: u64) -> Result<Simulation, String> {
    if !(10..=MAX_USERS).contains(&n_users) {
        return Err(format!("users must be between 10 and {MAX_USERS}"));
    }
    let defaults = SynthConfig::default();
    let cfg = SynthConfig {
        n_users,
        n_roots,
        prestige_beta: beta,
        seed,
        max_followees: defaults.max_followees.min((n_users - 1) / 2),
        ..defaults
    };
    let out = generate(&cfg).map_err(|e| e.to_string())?;
    let officials = FxHashSet::default();
    let cascades = build_cascades(&out.posts, &out.reposts, &out.graph, &officials).cascades;
    let population: Vec<UserId> = (1..=n_users as u64).map(UserId).collect();
    let influence = compute_influence(&out.posts, &out.reposts, &population).map_err(|e| e.to_string())?;
    let mut sizes: FxHashMap<PostId, u64> = FxHashMap::default();
    for r in &out.reposts {
        *sizes.entry(r.source_post_id).or_default() += 1;
    }
    // "popular" is a fixed share of the population rather than a fixed count
    let threshold = ((5_000.0 * n_users as f64 / 14_910_772.0).ceil() as u64).max(2);
    let summary_cfg = SummaryConfig {
        buckets: PopularityBuckets::new(vec![threshold]),
        windows: vec![TimeWindow::hours(24)],
        min_reposts: threshold,
        series_bucket_ms: HOUR_MS,
        series_horizon_ms: 24 * HOUR_MS,
    };
    let ctx = TimelineContext::new(&out.graph, &cascades, &officials);
    let opts = ExposureOptions::new(TimeWindow::unbounded());
    let s = summarize(&cascades, &ctx, &opts, &influence, &sizes, &summary_cfg).map_err(|e| e.to_string())?;
    let per_category = influence.category_counts();
    let rows = InfluenceCategory::ALL
        .iter()
        .map(|&cat| {
            let c = s.crp[0].counts(Some(cat), 1);
            CrpRow {
                category: cat.as_str(),
                users: per_category[cat.rank()],
                viewed: c.viewed,
                reposted: c.reposted,
                crp: c.crp(),
            }
        })
        .collect();
    Ok(Simulation {
        users: n_users,
        reposts: out.reposts.len(),
        popular_threshold: threshold,
        popular_cascades: sizes.values().filter(|&&n| n >= threshold).count(),
        rows,
    })
}

#[derive(Debug, Serialize, PartialEq)]
pub struct TreeMetrics {
    pub size: usize,
    pub max_depth: u32,
    pub structural_virality: Option<f64>,
}

/// Metrics of a tree written one edge per line as `child parent`, where the
/// parent `0` is the source post. Lines must list parents before children.
pub fn tree_metrics(text: &str) -> Result<TreeMetrics, String> {
    let root = PostEvent { post_id: PostId(0), author: UserId(0), timestamp: 0, is_official: false };
    let mut links = Vec::new();
    for (i, line) in text.lines().map(str::trim).filter(|l| !l.is_empty()).enumerate() {
        let ids: Vec<u64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| format!("line {}: bad node id {s:?}", i + 1)))
            .collect::<Result<_, _>>()?;
        let [child, parent] = ids[..] else {
            return Err(format!("line {}: expected `child parent`", i + 1));
        };
        if child == 0 {
            return Err(format!("line {}: 0 is reserved for the source post", i + 1));
        }
        let repost = RepostEvent {
            repost_id: RepostId(child),
            reposter: UserId(child),
            source_post_id: PostId(0),
            timestamp: i as i64 + 1,
        };
        links.push((repost, (parent != 0).then_some(RepostId(parent))));
    }
    let c = Cascade::from_parent_links(&root, links).map_err(|e| e.to_string())?;
    Ok(TreeMetrics { size: c.size(), max_depth: max_depth(&c), structural_virality: structural_virality(&c) })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = hgIndex)]
pub fn hg_index_js(counts: &str) -> Result<String, JsError> {
    to_js(hg_of(counts))
}

#[wasm_bindgen(js_name = simulateCrp)]
pub fn simulate_crp_js(n_users: u32, n_roots: u32, beta: f64, seed: u32) -> Result<String, JsError> {
    to_js(simulate(n_users as usize, n_roots as usize, beta, u64::from(seed)))
}

#[wasm_bindgen(js_name = treeMetrics)]
pub fn tree_metrics_js(edges: &str) -> Result<String, JsError> {
    to_js(tree_metrics(edges))
}
