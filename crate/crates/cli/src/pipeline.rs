//! Stage orchestration for every subcommand. Each command loads and checks
//! its inputs, runs only the stages it needs, writes its tables atomically
//! and finishes with `manifest.json`.

use std::collections::BTreeMap;

use cascadeflow::cascade::{
    build_cascades, max_depth, metrics_by_first_reposter_influence, structural_virality, Cascade,
};
use cascadeflow::influence::{compute_influence, InfluenceTable};
use cascadeflow::ingest::{load_dataset, Dataset, Ingestor, UserMeta};
use cascadeflow::metrics::{repost_behavior, summarize, MetricsSummary, SummaryConfig};
use cascadeflow::model::{ValidationIssue, ValidationReport};
use cascadeflow::regress::{featurize, sample_cases_with, Featurized, HourBins, Moments, Sample};
use cascadeflow::synth::{generate, SynthConfig};
use cascadeflow::timeline::{CascadeIndex, ExposureOptions, ExposureRecord, TimelineContext};
use cascadeflow::{InfluenceCategory, PostId, RepostEvent, TimeWindow, UserId};
use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;

use crate::config::{RunConfig, Settings};
use crate::output::{digest_file, FileDigest, OutputDir};
use crate::CliError;

/// Which subcommand is running.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    IngestCheck,
    Influence,
    Cascades,
    Timeline,
    Crp,
    Shares,
    Behavior,
    Virality,
    SampleRegression,
    Run,
}

type Counts = BTreeMap<&'static str, u64>;

/// Everything ingest produced, plus the input digests.
pub struct Loaded {
    pub data: Dataset,
    pub ingest: Ingestor,
    pub officials: FxHashSet<UserId>,
    pub inputs: Vec<FileDigest>,
    pub report: ValidationReport,
}

impl Loaded {
    fn user(&self, u: UserId) -> String {
        self.data.directory.external_id(u).to_string()
    }

    fn post(&self, p: PostId) -> String {
        self.ingest.external_post_id(p).to_string()
    }

    fn repost(&self, r: cascadeflow::RepostId) -> String {
        self.ingest.external_repost_id(r).to_string()
    }
}

fn is_fatal(issue: &ValidationIssue) -> bool {
    matches!(
        issue,
        ValidationIssue::DuplicatePostId(_)
            | ValidationIssue::DuplicateRepostId(_)
            | ValidationIssue::NegativeTimestamp { .. }
    )
}

/// Reads and validates the inputs. Duplicate ids and negative timestamps
/// are fatal; dangling or inverted reposts are left for cascade building to
/// reject.
pub fn load(settings: &Settings) -> Result<Loaded, CliError> {
    let paths = &settings.inputs;
    let mut inputs = Vec::new();
    for p in [&paths.posts, &paths.reposts, &paths.follower_graph].into_iter().chain(&paths.users) {
        inputs.push(digest_file(p)?);
    }
    let (data, ingest) = load_dataset(paths, settings.filter.clone(), settings.policy)?;
    let report = data.validate();
    let officials = data.official_users();
    log::info!(
        "loaded {} posts, {} reposts, {} users, {} follow edges; {} official accounts",
        data.posts.len(),
        data.reposts.len(),
        data.directory.len(),
        data.graph.edge_count(),
        officials.len()
    );
    Ok(Loaded { data, ingest, officials, inputs, report })
}

fn reject_fatal(loaded: &Loaded) -> Result<(), CliError> {
    let fatal: Vec<String> = loaded.report.issues.iter().filter(|i| is_fatal(i)).map(|i| i.to_string()).collect();
    if !fatal.is_empty() {
        let shown = fatal.iter().take(5).cloned().collect::<Vec<_>>().join("; ");
        return Err(CliError::Invalid(format!("{} fatal validation issue(s): {shown}", fatal.len())));
    }
    let dangling = loaded.report.dangling().count();
    let inverted = loaded.report.inversions().count();
    if dangling + inverted > 0 {
        log::warn!("{dangling} reposts of unknown posts and {inverted} reposts before their post will be skipped");
    }
    Ok(())
}

#[derive(Serialize)]
struct IngestReport {
    posts: usize,
    reposts: usize,
    users: usize,
    follow_edges: usize,
    official_users: usize,
    skipped_lines: Vec<String>,
    issue_counts: BTreeMap<&'static str, usize>,
    issues: Vec<String>,
    follower_count_mismatches: usize,
}

fn issue_kind(i: &ValidationIssue) -> &'static str {
    match i {
        ValidationIssue::DuplicatePostId(_) => "duplicate_post_id",
        ValidationIssue::DuplicateRepostId(_) => "duplicate_repost_id",
        ValidationIssue::NegativeTimestamp { .. } => "negative_timestamp",
        ValidationIssue::DanglingSource { .. } => "dangling_source",
        ValidationIssue::TimeInversion { .. } => "time_inversion",
    }
}

const REPORT_EXAMPLES: usize = 20;

/// Prints a JSON report to stdout; any issue or skipped line is an error.
pub fn ingest_check(settings: &Settings) -> Result<(), CliError> {
    let loaded = load(settings)?;
    let mut issue_counts = BTreeMap::new();
    for i in &loaded.report.issues {
        *issue_counts.entry(issue_kind(i)).or_insert(0) += 1;
    }
    let skipped = loaded.ingest.skipped();
    let report = IngestReport {
        posts: loaded.data.posts.len(),
        reposts: loaded.data.reposts.len(),
        users: loaded.data.directory.len(),
        follow_edges: loaded.data.graph.edge_count(),
        official_users: loaded.officials.len(),
        skipped_lines: skipped
            .iter()
            .take(REPORT_EXAMPLES)
            .map(|s| format!("{}:{}: {}", s.path.display(), s.line, s.reason))
            .collect(),
        issue_counts,
        issues: loaded.report.issues.iter().take(REPORT_EXAMPLES).map(|i| i.to_string()).collect(),
        follower_count_mismatches: loaded.data.directory.follower_count_mismatches(&loaded.data.graph).len(),
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Invariant(e.to_string()))?;
    println!("{text}");
    if !loaded.report.is_accepted() || !skipped.is_empty() {
        return Err(CliError::Invalid(format!(
            "{} validation issue(s), {} skipped line(s)",
            loaded.report.issues.len(),
            skipped.len()
        )));
    }
    Ok(())
}

/// Runs one analysis subcommand end to end.
pub fn execute(stage: Stage, cfg: &RunConfig) -> Result<(), CliError> {
    let settings = cfg.settings()?;
    if stage == Stage::IngestCheck {
        return ingest_check(&settings);
    }
    if stage == Stage::SampleRegression && cfg.sampling.is_none() {
        return Err(CliError::Invalid("sample-regression needs --rate (e.g. 0.01 or 0.001)".into()));
    }
    let loaded = load(&settings)?;
    reject_fatal(&loaded)?;
    let mut out = OutputDir::create(&cfg.out_dir)?;
    let mut counts = Counts::new();
    counts.insert("posts", loaded.data.posts.len() as u64);
    counts.insert("reposts", loaded.data.reposts.len() as u64);
    counts.insert("users", loaded.data.directory.len() as u64);
    counts.insert("follow_edges", loaded.data.graph.edge_count() as u64);
    counts.insert("official_users", loaded.officials.len() as u64);
    counts.insert("skipped_lines", loaded.ingest.skipped().len() as u64);

    let needs = |stages: &[Stage]| stage == Stage::Run || stages.contains(&stage);

    if needs(&[Stage::Behavior]) {
        write_behavior(&loaded, cfg, &mut out, &mut counts)?;
    }
    if stage == Stage::Behavior {
        return write_manifest(stage, cfg, &loaded, &mut out, &counts);
    }

    let influence = if stage == Stage::Timeline {
        None
    } else {
        let population = loaded.data.all_users();
        let table = compute_influence(&loaded.data.posts, &loaded.data.reposts, &population)
            .map_err(|e| CliError::Invalid(format!("influence: {e}")))?;
        if needs(&[Stage::Influence]) {
            write_influence(&loaded, &table, cfg, &mut out)?;
        }
        Some(table)
    };
    if stage == Stage::Influence {
        return write_manifest(stage, cfg, &loaded, &mut out, &counts);
    }

    let build = build_cascades(&loaded.data.posts, &loaded.data.reposts, &loaded.data.graph, &loaded.officials);
    for c in &build.cascades {
        c.check().map_err(|e| CliError::Invariant(e.to_string()))?;
    }
    let cascades = build.cascades;
    counts.insert("cascades", cascades.len() as u64);
    counts.insert("cascade_reposts", cascades.iter().map(|c| c.nodes.len() as u64).sum());
    counts.insert("fallback_edges", cascades.iter().map(|c| c.fallback_count() as u64).sum());
    counts.insert("rejected_reposts", build.rejected.len() as u64);
    counts.insert("official_reposts_dropped", build.official_reposts_dropped as u64);

    if needs(&[Stage::Cascades]) {
        write_cascades(&loaded, &cascades, influence.as_ref(), &mut out)?;
    }
    let ctx = TimelineContext::new(&loaded.data.graph, &cascades, &loaded.officials);
    let opts = ExposureOptions { window: TimeWindow::unbounded(), dedup_sender: cfg.dedup_sender };

    if stage == Stage::Timeline {
        write_exposures(&loaded, &cascades, &ctx, &opts, &mut out, &mut counts)?;
        return write_manifest(stage, cfg, &loaded, &mut out, &counts);
    }
    let influence = influence.expect("computed for every stage but timeline");

    if needs(&[Stage::Crp, Stage::Shares]) {
        let sizes = popularity(&loaded.data.reposts);
        let summary_cfg = SummaryConfig {
            buckets: settings.buckets.clone(),
            windows: settings.windows.clone(),
            min_reposts: cfg.min_reposts,
            series_bucket_ms: cfg.series_bucket_ms,
            series_horizon_ms: cfg.series_horizon_ms,
        };
        let summary = summarize(&cascades, &ctx, &opts, &influence, &sizes, &summary_cfg)
            .map_err(|e| CliError::Invalid(e.to_string()))?;
        check_summary(&summary, &cascades, cfg.dedup_sender)?;
        counts.insert("views", summary.views);
        counts.insert("reposted_views", summary.reposted_views);
        if needs(&[Stage::Crp]) {
            write_crp(&summary, cfg, &mut out)?;
        }
        if needs(&[Stage::Shares]) {
            write_shares(&summary, &influence, cfg, &mut out)?;
        }
    }
    if needs(&[Stage::Virality]) {
        write_virality(&cascades, &influence, cfg, &mut out)?;
    }
    if stage == Stage::SampleRegression || (stage == Stage::Run && cfg.sampling.is_some()) {
        write_regression(&loaded, &cascades, &ctx, &opts, &influence, cfg, &mut out, &mut counts)?;
    }
    write_manifest(stage, cfg, &loaded, &mut out, &counts)
}

/// Total reposts of each post, official reposters included.
pub fn popularity(reposts: &[RepostEvent]) -> FxHashMap<PostId, u64> {
    let mut sizes: FxHashMap<PostId, u64> = FxHashMap::default();
    for r in reposts {
        *sizes.entry(r.source_post_id).or_default() += 1;
    }
    sizes
}

/// Credited views a full, unwindowed pass must produce: one per distinct
/// `(reposter, parent repost)` edge whose parent precedes the reposter's
/// first repost of the post.
pub fn expected_credited_views(cascades: &[Cascade]) -> u64 {
    let mut total = 0;
    for c in cascades {
        let mut first: FxHashMap<UserId, i64> = FxHashMap::default();
        let mut pairs = FxHashSet::default();
        for (i, n) in c.nodes.iter().enumerate() {
            first.entry(n.reposter).or_insert(n.timestamp);
            if let Some(p) = n.parent {
                let parent = &c.nodes[p as usize];
                if parent.timestamp < first[&n.reposter] && pairs.insert((n.reposter, parent.repost_id)) {
                    total += 1;
                }
            }
            debug_assert!(n.parent.is_none_or(|p| (p as usize) < i));
        }
    }
    total
}

fn check_summary(s: &MetricsSummary, cascades: &[Cascade], dedup_sender: bool) -> Result<(), CliError> {
    let breach = |m: String| Err(CliError::Invariant(m));
    let expected = expected_credited_views(cascades);
    if (!dedup_sender && s.reposted_views != expected) || s.reposted_views > expected {
        return breach(format!("{} credited views for {} cascade edges", s.reposted_views, expected));
    }
    for acc in &s.crp {
        if let Some(cell) = acc.cells().iter().find(|c| c.reposted > c.viewed) {
            return breach(format!("CRP cell with more reposts than views: {cell:?}"));
        }
    }
    let series_views: u64 = s.series.rows().iter().map(|r| r.viewed).sum();
    if series_views > s.views {
        return breach(format!("series holds {series_views} views out of {}", s.views));
    }
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_influence(
    loaded: &Loaded,
    table: &InfluenceTable,
    cfg: &RunConfig,
    out: &mut OutputDir,
) -> Result<(), CliError> {
    let rows = table.rows();
    out.csv("influence.csv", &["user_id", "h", "g", "hg", "category"], |w| {
        for (u, s) in &rows {
            w.write_record([
                loaded.user(*u),
                s.h.to_string(),
                s.g.to_string(),
                s.hg.to_string(),
                s.category.as_str().to_string(),
            ])?;
        }
        Ok(rows.len() as u64)
    })?;
    if cfg.json {
        #[derive(Serialize)]
        struct Counts {
            category: InfluenceCategory,
            users: usize,
        }
        let counts: Vec<Counts> = InfluenceCategory::ALL
            .iter()
            .zip(table.category_counts())
            .map(|(&category, users)| Counts { category, users })
            .collect();
        out.json("influence.json", &counts)?;
    }
    Ok(())
}

fn write_cascades(
    loaded: &Loaded,
    cascades: &[Cascade],
    influence: Option<&InfluenceTable>,
    out: &mut OutputDir,
) -> Result<(), CliError> {
    let header =
        ["root_post_id", "size", "max_depth", "structural_virality", "first_reposter", "first_reposter_category"];
    out.csv("cascades.csv", &header, |w| {
        for c in cascades {
            let first = c.first_reposter();
            let category = first.and_then(|u| influence.and_then(|t| t.category(u)));
            w.write_record([
                loaded.post(c.root_post),
                c.size().to_string(),
                max_depth(c).to_string(),
                opt(structural_virality(c)),
                first.map(|u| loaded.user(u)).unwrap_or_default(),
                category.map(|k| k.as_str().to_string()).unwrap_or_default(),
            ])?;
        }
        Ok(cascades.len() as u64)
    })?;
    out.csv("cascade_edges.csv", &["root_post_id", "child_repost_id", "parent_repost_id", "fallback"], |w| {
        let mut rows = 0;
        for c in cascades {
            let root = loaded.post(c.root_post);
            for (i, (child, parent)) in c.edges().enumerate() {
                w.write_record([
                    root.clone(),
                    loaded.repost(child),
                    parent.map_or_else(|| "ROOT".to_string(), |p| loaded.repost(p)),
                    u8::from(c.nodes[i].fallback).to_string(),
                ])?;
                rows += 1;
            }
        }
        Ok(rows)
    })
}

fn write_exposures(
    loaded: &Loaded,
    cascades: &[Cascade],
    ctx: &TimelineContext<'_>,
    opts: &ExposureOptions,
    out: &mut OutputDir,
    counts: &mut Counts,
) -> Result<(), CliError> {
    let header = ["viewer", "sender", "root_post_id", "sender_repost_id", "exposure_time_ms", "elapsed_ms", "reposted"];
    let mut credited = 0u64;
    let mut rows = 0u64;
    out.csv("exposures.csv", &header, |w| {
        let mut err = None;
        for c in cascades {
            CascadeIndex::new(c).for_each_exposure(ctx, opts, |e, r| {
                if err.is_some() {
                    return;
                }
                let rec = [
                    loaded.user(e.viewer),
                    loaded.user(e.sender),
                    loaded.post(e.root_post),
                    loaded.repost(e.sender_repost_id),
                    e.exposure_time.to_string(),
                    e.elapsed_since_root.to_string(),
                    u8::from(r).to_string(),
                ];
                match w.write_record(rec) {
                    Ok(()) => {
                        rows += 1;
                        credited += u64::from(r);
                    }
                    Err(e) => err = Some(e),
                }
            });
        }
        err.map_or(Ok(rows), Err)
    })?;
    counts.insert("views", rows);
    counts.insert("reposted_views", credited);
    Ok(())
}

fn write_crp(s: &MetricsSummary, cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let header = ["window_start_ms", "window_end_ms", "category", "popularity", "viewed", "reposted", "crp"];
    let tables: Vec<_> = s.crp.iter().map(|acc| acc.cells()).collect();
    out.csv("crp.csv", &header, |w| {
        let mut rows = 0;
        for cell in tables.iter().flatten() {
            w.write_record([
                cell.window_start_ms.to_string(),
                cell.window_end_ms.to_string(),
                cell.category.map_or("unclassified", InfluenceCategory::as_str).to_string(),
                cell.popularity.to_string(),
                cell.viewed.to_string(),
                cell.reposted.to_string(),
                opt(cell.crp),
            ])?;
            rows += 1;
        }
        Ok(rows)
    })?;
    let series = s.series.rows();
    out.csv("crp_timeseries.csv", &["category", "bucket", "bucket_start_ms", "viewed", "reposted", "crp"], |w| {
        for r in &series {
            w.write_record([
                r.category.map_or("unclassified", InfluenceCategory::as_str).to_string(),
                r.bucket.to_string(),
                r.bucket_start_ms.to_string(),
                r.viewed.to_string(),
                r.reposted.to_string(),
                opt(r.crp),
            ])?;
        }
        Ok(series.len() as u64)
    })?;
    if cfg.json {
        #[derive(Serialize)]
        struct Window<'a> {
            start_ms: i64,
            end_ms: i64,
            cells: &'a [cascadeflow::metrics::CrpCell],
        }
        let windows: Vec<Window> = s
            .crp
            .iter()
            .zip(&tables)
            .map(|(acc, cells)| Window {
                start_ms: acc.window().start_offset(),
                end_ms: acc.window().end_offset(),
                cells,
            })
            .collect();
        out.json("crp.json", &windows)?;
        out.json("crp_timeseries.json", &series)?;
    }
    Ok(())
}

fn write_shares(
    s: &MetricsSummary,
    influence: &InfluenceTable,
    cfg: &RunConfig,
    out: &mut OutputDir,
) -> Result<(), CliError> {
    let table = s.shares.finish(influence);
    for (name, col) in [
        ("user", table.rows.iter().map(|r| r.user_share).collect::<Vec<_>>()),
        ("view", table.rows.iter().map(|r| r.view_share).collect()),
        ("repost", table.rows.iter().map(|r| r.repost_share).collect()),
    ] {
        let present: Vec<f64> = col.into_iter().flatten().collect();
        let sum: f64 = present.iter().sum();
        if !present.is_empty() && (sum - 1.0).abs() > 1e-9 {
            return Err(CliError::Invariant(format!("{name} shares sum to {sum}")));
        }
    }
    let header = ["category", "users", "views", "reposts", "user_share", "view_share", "repost_share"];
    out.csv("shares.csv", &header, |w| {
        for r in &table.rows {
            w.write_record([
                r.category.as_str().to_string(),
                r.users.to_string(),
                r.views.to_string(),
                r.reposts.to_string(),
                opt(r.user_share),
                opt(r.view_share),
                opt(r.repost_share),
            ])?;
        }
        Ok(table.rows.len() as u64)
    })?;
    if cfg.json {
        out.json("shares.json", &table)?;
    }
    Ok(())
}

fn write_behavior(loaded: &Loaded, cfg: &RunConfig, out: &mut OutputDir, counts: &mut Counts) -> Result<(), CliError> {
    let reposts: Vec<RepostEvent> =
        loaded.data.reposts.iter().filter(|r| !loaded.officials.contains(&r.reposter)).copied().collect();
    let b = repost_behavior(&reposts, None, &cfg.behavior_fractions).map_err(|e| CliError::Invalid(e.to_string()))?;
    if b.ccdf.windows(2).any(|w| w[1].1 > w[0].1) {
        return Err(CliError::Invariant("repost CCDF increases".into()));
    }
    counts.insert("reposting_users", b.users);
    out.csv("behavior_share.csv", &["top_fraction", "repost_share"], |w| {
        for (f, s) in &b.cumulative_share {
            w.write_record([f.to_string(), s.to_string()])?;
        }
        Ok(b.cumulative_share.len() as u64)
    })?;
    out.csv("behavior_ccdf.csv", &["reposts", "fraction_of_users"], |w| {
        for (k, f) in &b.ccdf {
            w.write_record([k.to_string(), f.to_string()])?;
        }
        Ok(b.ccdf.len() as u64)
    })?;
    if cfg.json {
        out.json("behavior.json", &b)?;
    }
    Ok(())
}

fn write_virality(
    cascades: &[Cascade],
    influence: &InfluenceTable,
    cfg: &RunConfig,
    out: &mut OutputDir,
) -> Result<(), CliError> {
    // the tree size counts the root as well as every repost
    let min_size = cfg.virality_min_reposts.saturating_add(1) as usize;
    let rows = metrics_by_first_reposter_influence(cascades, influence, min_size);
    let header = [
        "category",
        "count",
        "mean_structural_virality",
        "structural_virality_half_width",
        "mean_max_depth",
        "max_depth_half_width",
    ];
    out.csv("virality.csv", &header, |w| {
        for r in &rows {
            w.write_record([
                r.category.as_str().to_string(),
                r.count.to_string(),
                opt(r.mean_structural_virality),
                opt(r.structural_virality_half_width),
                opt(r.mean_max_depth),
                opt(r.max_depth_half_width),
            ])?;
        }
        Ok(rows.len() as u64)
    })?;
    if cfg.json {
        out.json("virality.json", &rows)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RegressionSidecar<'a> {
    seed: u64,
    positive_rate: f64,
    negative_multiplier: f64,
    hour_bins: &'a HourBins,
    sender_followers_log: Moments,
    user_followers_log: Moments,
    sampled_positives: usize,
    sampled_negatives: usize,
    negative_shortfall: usize,
    dropped_missing_user: usize,
    dropped_unclassified: usize,
    rows: usize,
}

/// Draws the case-control sample by replaying views twice, then codes it.
pub fn sample_and_featurize(
    cascades: &[Cascade],
    ctx: &TimelineContext<'_>,
    opts: &ExposureOptions,
    influence: &InfluenceTable,
    loaded_data: &Dataset,
    cfg: &RunConfig,
) -> Result<(Sample, Featurized), CliError> {
    let sampling = cfg.sampling.as_ref().ok_or_else(|| CliError::Invalid("sampling is not configured".into()))?;
    let sample = sample_cases_with(
        |f: &mut dyn FnMut(&ExposureRecord, bool)| {
            for c in cascades {
                CascadeIndex::new(c).for_each_exposure(ctx, opts, |e, r| f(&e, r));
            }
        },
        sampling.positive_rate,
        sampling.negative_multiplier,
        cfg.seed,
    )
    .map_err(|e| CliError::Invalid(e.to_string()))?;
    let feats = featurize(&sample.cases, influence, &loaded_data.directory, &loaded_data.graph, &cfg.hour_bins);
    Ok((sample, feats))
}

#[allow(clippy::too_many_arguments)]
fn write_regression(
    loaded: &Loaded,
    cascades: &[Cascade],
    ctx: &TimelineContext<'_>,
    opts: &ExposureOptions,
    influence: &InfluenceTable,
    cfg: &RunConfig,
    out: &mut OutputDir,
    counts: &mut Counts,
) -> Result<(), CliError> {
    let (sample, feats) = sample_and_featurize(cascades, ctx, opts, influence, &loaded.data, cfg)?;
    let positive_roots: FxHashSet<PostId> = sample.cases.iter().filter(|c| c.1).map(|c| c.0.root_post).collect();
    if sample.cases.iter().any(|c| !c.1 && !positive_roots.contains(&c.0.root_post)) {
        return Err(CliError::Invariant("a sampled negative has no positive from the same post".into()));
    }
    out.csv("regression.csv", &cascadeflow::regress::RegressionRow::HEADER, |w| {
        for r in &feats.rows {
            w.write_record([
                r.is_retweeted.to_string(),
                r.sender_influence.as_str().to_string(),
                r.repost_hour.as_str().to_string(),
                r.sender_followers_log_z.to_string(),
                r.user_followers_log_z.to_string(),
                loaded.post(r.source_tweet_id),
                r.user_topic.clone().unwrap_or_default(),
                loaded.user(r.viewer),
                loaded.user(r.sender),
            ])?;
        }
        Ok(feats.rows.len() as u64)
    })?;
    let sampling = cfg.sampling.as_ref().expect("checked by sample_and_featurize");
    out.json(
        "regression.json",
        &RegressionSidecar {
            seed: cfg.seed,
            positive_rate: sampling.positive_rate,
            negative_multiplier: sampling.negative_multiplier,
            hour_bins: &cfg.hour_bins,
            sender_followers_log: feats.sender_moments,
            user_followers_log: feats.user_moments,
            sampled_positives: sample.positives,
            sampled_negatives: sample.negatives,
            negative_shortfall: sample.shortfall,
            dropped_missing_user: feats.dropped_missing_user,
            dropped_unclassified: feats.dropped_unclassified,
            rows: feats.rows.len(),
        },
    )?;
    counts.insert("regression_rows", feats.rows.len() as u64);
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: Stage,
    config: &'a C,
    inputs: &'a [FileDigest],
    outputs: &'a [FileDigest],
    counts: &'a Counts,
}

fn write_manifest(
    stage: Stage,
    cfg: &RunConfig,
    loaded: &Loaded,
    out: &mut OutputDir,
    counts: &Counts,
) -> Result<(), CliError> {
    let outputs = out.written().to_vec();
    let manifest = Manifest {
        tool: "cascadeflow",
        version: env!("CARGO_PKG_VERSION"),
        command: stage,
        config: cfg,
        inputs: &loaded.inputs,
        outputs: &outputs,
        counts,
    };
    out.json("manifest.json", &manifest)
}

/// File names `synth` writes, relative to its output directory.
pub const SYNTH_FILES: [&str; 4] = ["posts.ndjson", "reposts.ndjson", "follower_graph.csv", "users.ndjson"];

/// Generates a dataset in the ingest formats, with ground truth and a run
/// config pointing at it.
pub fn synth(cfg: &SynthConfig, out_dir: &std::path::Path) -> Result<(), CliError> {
    let data = generate(cfg).map_err(|e| CliError::Invalid(e.to_string()))?;
    let mut out = OutputDir::create(out_dir)?;
    let mut writer = Ingestor::default();
    for i in 1..=cfg.n_users as u64 {
        let u = UserId(i);
        let followers = data.graph.followers_of(u).len() as u64;
        writer.directory.update(u, UserMeta { followers_count: Some(followers), ..Default::default() });
    }
    let [posts, reposts, graph, users] = SYNTH_FILES;
    out.write(posts, |w| writer.write_posts(&data.posts, w).map(|_| Some(data.posts.len() as u64)))?;
    out.write(reposts, |w| writer.write_reposts(&data.reposts, w).map(|_| Some(data.reposts.len() as u64)))?;
    out.write(graph, |w| writer.write_follower_graph(&data.graph, w).map(|_| Some(data.graph.edge_count() as u64)))?;
    out.write(users, |w| writer.write_users(w).map(|_| Some(cfg.n_users as u64)))?;
    out.csv("ground_truth.csv", &["repost_id", "true_parent_id", "tier"], |w| {
        for r in &data.reposts {
            let parent = data.truth.parent(r.repost_id).flatten();
            let tier = data.truth.tier(r.reposter).map_or("", InfluenceCategory::as_str);
            w.write_record([
                r.repost_id.to_string(),
                parent.map_or_else(|| "ROOT".to_string(), |p| p.to_string()),
                tier.to_string(),
            ])?;
        }
        Ok(data.reposts.len() as u64)
    })?;
    out.json("synth_config.json", cfg)?;
    let run = RunConfig {
        inputs: Some(cascadeflow::ingest::InputPaths {
            posts: posts.into(),
            reposts: reposts.into(),
            follower_graph: graph.into(),
            users: Some(users.into()),
        }),
        seed: cfg.seed,
        out_dir: "results".into(),
        ..RunConfig::default()
    };
    out.json("run_config.json", &run)?;
    let mut counts = Counts::new();
    counts.insert("users", cfg.n_users as u64);
    counts.insert("posts", data.posts.len() as u64);
    counts.insert("reposts", data.reposts.len() as u64);
    counts.insert("follow_edges", data.graph.edge_count() as u64);
    counts.insert("hidden_edges", data.truth.hidden_edges as u64);
    let outputs = out.written().to_vec();
    #[derive(Serialize)]
    struct SynthManifest<'a> {
        tool: &'static str,
        version: &'static str,
        command: &'static str,
        config: &'a SynthConfig,
        outputs: &'a [FileDigest],
        counts: &'a Counts,
    }
    out.json(
        "manifest.json",
        &SynthManifest {
            tool: "cascadeflow",
            version: env!("CARGO_PKG_VERSION"),
            command: "synth",
            config: cfg,
            outputs: &outputs,
            counts: &counts,
        },
    )?;
    log::info!("generated {} posts and {} reposts in {}", data.posts.len(), data.reposts.len(), out_dir.display());
    Ok(())
}

/// Runs `f` on a pool with `workers` threads (all cores when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Invalid(format!("cannot start {workers:?} workers: {e}")))?;
    Ok(pool.install(f))
}
