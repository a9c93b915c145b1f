//! Aggregates over resolved views: cascading repost probability (CRP),
//! view/repost shares and repost-behaviour skew.
//!
//! All accumulators are integer counters with an element-wise `merge`, so
//! partial results from any partitioning of the view stream combine to the
//! same totals.

use std::fmt;

use rustc_hash::FxHashMap;
use serde::{Serialize, Serializer};

use crate::cascade::Cascade;
use crate::influence::InfluenceTable;
use crate::model::{InfluenceCategory, Millis, PostId, RepostEvent, TimeWindow, UserId};
use crate::par_fold;
use crate::timeline::{CascadeIndex, ExposureOptions, ExposureRecord, TimelineContext};

/// Category rows: the six categories plus a trailing "unclassified" row for
/// senders missing from the influence table.
pub const CATEGORY_ROWS: usize = 7;
pub const UNCLASSIFIED: usize = 6;

fn row_of(influence: &InfluenceTable, user: UserId) -> usize {
    influence.category(user).map_or(UNCLASSIFIED, InfluenceCategory::rank)
}

fn category_of_row(row: usize) -> Option<InfluenceCategory> {
    InfluenceCategory::from_rank(row)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("bucket width {bucket_ms} ms must be positive and divide the horizon {horizon_ms} ms")]
    BadBuckets { bucket_ms: Millis, horizon_ms: Millis },
    #[error("top fraction {0} is outside (0, 1]")]
    BadFraction(f64),
}

/// Lower-bound popularity groups. `Below(t)` holds cascades under the
/// smallest threshold; `AtLeast(t)` holds every cascade with at least `t`
/// reposts, so the `AtLeast` groups nest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PopularityBucket {
    Below(u64),
    AtLeast(u64),
}

impl fmt::Display for PopularityBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PopularityBucket::Below(t) => write!(f, "<{t}"),
            PopularityBucket::AtLeast(t) => write!(f, ">={t}"),
        }
    }
}

impl Serialize for PopularityBucket {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct PopularityBuckets {
    thresholds: Vec<u64>,
}

impl Default for PopularityBuckets {
    fn default() -> Self {
        PopularityBuckets { thresholds: vec![1000, 5000, 10000] }
    }
}

impl PopularityBuckets {
    /// Thresholds are sorted and deduplicated; zero is dropped.
    pub fn new(mut thresholds: Vec<u64>) -> Self {
        thresholds.retain(|&t| t > 0);
        thresholds.sort_unstable();
        thresholds.dedup();
        PopularityBuckets { thresholds }
    }

    pub fn thresholds(&self) -> &[u64] {
        &self.thresholds
    }

    /// `[Below(t0), AtLeast(t0), AtLeast(t1), ...]`; a single `AtLeast(0)`
    /// when there are no thresholds.
    pub fn buckets(&self) -> Vec<PopularityBucket> {
        match self.thresholds.first() {
            None => vec![PopularityBucket::AtLeast(0)],
            Some(&t0) => std::iter::once(PopularityBucket::Below(t0))
                .chain(self.thresholds.iter().map(|&t| PopularityBucket::AtLeast(t)))
                .collect(),
        }
    }

    fn len(&self) -> usize {
        self.thresholds.len() + 1
    }

    /// Indices into [`Self::buckets`] that a cascade of `size` reposts
    /// belongs to.
    fn membership(&self, size: u64) -> impl Iterator<Item = usize> + '_ {
        let below = match self.thresholds.first() {
            None => Some(0),
            Some(&t0) => (size < t0).then_some(0),
        };
        let at_least = self.thresholds.iter().enumerate().filter(move |(_, &t)| size >= t).map(|(i, _)| i + 1);
        below.into_iter().chain(at_least)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CrpCounts {
    pub viewed: u64,
    pub reposted: u64,
}

impl CrpCounts {
    pub fn crp(&self) -> Option<f64> {
        (self.viewed > 0).then(|| self.reposted as f64 / self.viewed as f64)
    }

    fn add(&mut self, reposted: bool) {
        self.viewed += 1;
        self.reposted += reposted as u64;
    }

    fn merge(&mut self, other: &CrpCounts) {
        self.viewed += other.viewed;
        self.reposted += other.reposted;
    }
}

fn category_label(c: &Option<InfluenceCategory>) -> &'static str {
    c.map_or("unclassified", InfluenceCategory::as_str)
}

fn serialize_category<S: Serializer>(c: &Option<InfluenceCategory>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(category_label(c))
}

/// One cell of a CRP table. `category` is `None` for unclassified senders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrpCell {
    #[serde(serialize_with = "serialize_category")]
    pub category: Option<InfluenceCategory>,
    pub popularity: PopularityBucket,
    pub window_start_ms: Millis,
    pub window_end_ms: Millis,
    pub viewed: u64,
    pub reposted: u64,
    pub crp: Option<f64>,
}

/// CRP per (sender category, popularity bucket) inside one time window.
#[derive(Debug, Clone, PartialEq)]
pub struct CrpAccumulator {
    buckets: PopularityBuckets,
    window: TimeWindow,
    cells: Vec<CrpCounts>,
}

impl CrpAccumulator {
    pub fn new(buckets: PopularityBuckets, window: TimeWindow) -> Self {
        let cells = vec![CrpCounts::default(); CATEGORY_ROWS * buckets.len()];
        CrpAccumulator { buckets, window, cells }
    }

    pub fn window(&self) -> TimeWindow {
        self.window
    }

    /// `sender_row` from [`InfluenceTable`] via the crate's row mapping.
    pub fn add(&mut self, e: &ExposureRecord, reposted: bool, influence: &InfluenceTable, cascade_size: u64) {
        if !self.window.contains(e.elapsed_since_root) {
            return;
        }
        let row = row_of(influence, e.sender);
        let nb = self.buckets.len();
        for b in self.buckets.membership(cascade_size) {
            self.cells[row * nb + b].add(reposted);
        }
    }

    pub fn merge(mut self, other: &CrpAccumulator) -> Self {
        debug_assert_eq!(self.cells.len(), other.cells.len());
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.merge(b);
        }
        self
    }

    pub fn counts(&self, category: Option<InfluenceCategory>, bucket: usize) -> CrpCounts {
        let row = category.map_or(UNCLASSIFIED, InfluenceCategory::rank);
        self.cells[row * self.buckets.len() + bucket]
    }

    /// Cells ordered by category (low .. very_high, then unclassified) and
    /// bucket. The unclassified row is omitted when it is empty.
    pub fn cells(&self) -> Vec<CrpCell> {
        let buckets = self.buckets.buckets();
        let nb = buckets.len();
        let mut out = Vec::with_capacity(self.cells.len());
        for row in 0..CATEGORY_ROWS {
            let counts = &self.cells[row * nb..(row + 1) * nb];
            if row == UNCLASSIFIED && counts.iter().all(|c| c.viewed == 0) {
                continue;
            }
            for (b, c) in buckets.iter().zip(counts) {
                out.push(CrpCell {
                    category: category_of_row(row),
                    popularity: *b,
                    window_start_ms: self.window.start_offset(),
                    window_end_ms: self.window.end_offset(),
                    viewed: c.viewed,
                    reposted: c.reposted,
                    crp: c.crp(),
                });
            }
        }
        out
    }
}

/// CRP by sender category and popularity bucket over views inside `window`.
/// Cascade size is the post's total repost count; unknown posts count as 0.
pub fn crp(
    outcomes: &[(ExposureRecord, bool)],
    influence: &InfluenceTable,
    cascade_sizes: &FxHashMap<PostId, u64>,
    buckets: &PopularityBuckets,
    window: TimeWindow,
) -> Vec<CrpCell> {
    let mut acc = CrpAccumulator::new(buckets.clone(), window);
    for (e, r) in outcomes {
        let size = cascade_sizes.get(&e.root_post).copied().unwrap_or(0);
        acc.add(e, *r, influence, size);
    }
    acc.cells()
}

/// CRP per category per fixed-width bucket of time since the root post,
/// restricted to cascades with at least `min_reposts` reposts.
#[derive(Debug, Clone, PartialEq)]
pub struct CrpTimeseries {
    bucket_ms: Millis,
    n_buckets: usize,
    min_reposts: u64,
    cells: Vec<CrpCounts>,
}

impl CrpTimeseries {
    pub fn new(min_reposts: u64, bucket_ms: Millis, horizon_ms: Millis) -> Result<Self, MetricsError> {
        if bucket_ms <= 0 || horizon_ms <= 0 || horizon_ms % bucket_ms != 0 {
            return Err(MetricsError::BadBuckets { bucket_ms, horizon_ms });
        }
        let n_buckets = (horizon_ms / bucket_ms) as usize;
        Ok(CrpTimeseries {
            bucket_ms,
            n_buckets,
            min_reposts,
            cells: vec![CrpCounts::default(); CATEGORY_ROWS * n_buckets],
        })
    }

    pub fn bucket_ms(&self) -> Millis {
        self.bucket_ms
    }

    pub fn n_buckets(&self) -> usize {
        self.n_buckets
    }

    pub fn bucket_of(&self, elapsed: Millis) -> Option<usize> {
        if elapsed < 0 {
            return None;
        }
        let b = (elapsed / self.bucket_ms) as usize;
        (b < self.n_buckets).then_some(b)
    }

    pub fn add(&mut self, e: &ExposureRecord, reposted: bool, influence: &InfluenceTable, cascade_size: u64) {
        if cascade_size < self.min_reposts {
            return;
        }
        let Some(b) = self.bucket_of(e.elapsed_since_root) else { return };
        let row = row_of(influence, e.sender);
        self.cells[row * self.n_buckets + b].add(reposted);
    }

    pub fn merge(mut self, other: &CrpTimeseries) -> Self {
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.merge(b);
        }
        self
    }

    pub fn get(&self, category: Option<InfluenceCategory>, bucket: usize) -> CrpCounts {
        let row = category.map_or(UNCLASSIFIED, InfluenceCategory::rank);
        self.cells[row * self.n_buckets + bucket]
    }

    /// Long-format rows `(category, bucket index, counts)`.
    pub fn rows(&self) -> Vec<TimeseriesRow> {
        let mut out = Vec::new();
        for row in 0..CATEGORY_ROWS {
            let counts = &self.cells[row * self.n_buckets..(row + 1) * self.n_buckets];
            if row == UNCLASSIFIED && counts.iter().all(|c| c.viewed == 0) {
                continue;
            }
            for (b, c) in counts.iter().enumerate() {
                out.push(TimeseriesRow {
                    category: category_of_row(row),
                    bucket: b,
                    bucket_start_ms: b as Millis * self.bucket_ms,
                    viewed: c.viewed,
                    reposted: c.reposted,
                    crp: c.crp(),
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeseriesRow {
    #[serde(serialize_with = "serialize_category")]
    pub category: Option<InfluenceCategory>,
    pub bucket: usize,
    pub bucket_start_ms: Millis,
    pub viewed: u64,
    pub reposted: u64,
    pub crp: Option<f64>,
}

pub fn crp_timeseries(
    outcomes: &[(ExposureRecord, bool)],
    influence: &InfluenceTable,
    cascade_sizes: &FxHashMap<PostId, u64>,
    min_reposts: u64,
    bucket_ms: Millis,
    horizon_ms: Millis,
) -> Result<CrpTimeseries, MetricsError> {
    let mut ts = CrpTimeseries::new(min_reposts, bucket_ms, horizon_ms)?;
    for (e, r) in outcomes {
        let size = cascade_sizes.get(&e.root_post).copied().unwrap_or(0);
        ts.add(e, *r, influence, size);
    }
    Ok(ts)
}

/// View and repost counts per sender category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ShareAccumulator {
    min_reposts: u64,
    views: [u64; CATEGORY_ROWS],
    reposts: [u64; CATEGORY_ROWS],
}

impl ShareAccumulator {
    pub fn new(min_reposts: u64) -> Self {
        ShareAccumulator { min_reposts, ..Default::default() }
    }

    pub fn add(&mut self, e: &ExposureRecord, reposted: bool, influence: &InfluenceTable, cascade_size: u64) {
        if cascade_size < self.min_reposts {
            return;
        }
        let row = row_of(influence, e.sender);
        self.views[row] += 1;
        self.reposts[row] += reposted as u64;
    }

    pub fn merge(mut self, other: &ShareAccumulator) -> Self {
        for i in 0..CATEGORY_ROWS {
            self.views[i] += other.views[i];
            self.reposts[i] += other.reposts[i];
        }
        self
    }

    pub fn finish(&self, influence: &InfluenceTable) -> ShareTable {
        let users = influence.category_counts();
        let total_users: usize = users.iter().sum();
        let total_views: u64 = self.views[..6].iter().sum();
        let total_reposts: u64 = self.reposts[..6].iter().sum();
        let frac = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        let rows = InfluenceCategory::ALL
            .iter()
            .map(|&category| {
                let k = category.rank();
                ShareRow {
                    category,
                    users: users[k] as u64,
                    views: self.views[k],
                    reposts: self.reposts[k],
                    user_share: frac(users[k] as u64, total_users as u64),
                    view_share: frac(self.views[k], total_views),
                    repost_share: frac(self.reposts[k], total_reposts),
                }
            })
            .collect();
        ShareTable {
            rows,
            unclassified_views: self.views[UNCLASSIFIED],
            unclassified_reposts: self.reposts[UNCLASSIFIED],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShareRow {
    pub category: InfluenceCategory,
    pub users: u64,
    pub views: u64,
    pub reposts: u64,
    pub user_share: Option<f64>,
    pub view_share: Option<f64>,
    pub repost_share: Option<f64>,
}

/// Shares are over classified senders; views from senders missing from the
/// influence table are reported separately.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShareTable {
    pub rows: Vec<ShareRow>,
    pub unclassified_views: u64,
    pub unclassified_reposts: u64,
}

impl ShareTable {
    pub fn row(&self, category: InfluenceCategory) -> &ShareRow {
        &self.rows[category.rank()]
    }
}

pub fn shares(
    outcomes: &[(ExposureRecord, bool)],
    influence: &InfluenceTable,
    cascade_sizes: &FxHashMap<PostId, u64>,
    min_reposts: u64,
) -> ShareTable {
    let mut acc = ShareAccumulator::new(min_reposts);
    for (e, r) in outcomes {
        let size = cascade_sizes.get(&e.root_post).copied().unwrap_or(0);
        acc.add(e, *r, influence, size);
    }
    acc.finish(influence)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepostBehavior {
    /// `(top fraction of users, share of all reposts they made)`.
    pub cumulative_share: Vec<(f64, f64)>,
    /// `(k, fraction of users with at least k reposts)` for every distinct
    /// positive count, ascending.
    pub ccdf: Vec<(u64, f64)>,
    pub users: u64,
    pub reposts: u64,
}

/// Skew of personal repost counts. `population` is the number of users to
/// rank (users without reposts count as zero); it defaults to the number of
/// distinct reposters and never goes below it.
pub fn repost_behavior(
    reposts: &[RepostEvent],
    population: Option<usize>,
    top_fractions: &[f64],
) -> Result<RepostBehavior, MetricsError> {
    if let Some(&f) = top_fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(MetricsError::BadFraction(f));
    }
    let mut per_user: FxHashMap<UserId, u64> = FxHashMap::default();
    for r in reposts {
        *per_user.entry(r.reposter).or_default() += 1;
    }
    let mut counts: Vec<u64> = per_user.into_values().collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let n = population.unwrap_or(0).max(counts.len());
    let total: u64 = counts.iter().sum();

    let cumulative_share = top_fractions
        .iter()
        .map(|&f| {
            let k = ((f * n as f64) - 1e-9).ceil().max(0.0) as usize;
            let top: u64 = counts.iter().take(k).sum();
            let share = if total > 0 { top as f64 / total as f64 } else { 0.0 };
            (f, share)
        })
        .collect();

    let mut ccdf = Vec::new();
    let mut i = counts.len();
    // walk counts ascending; users at index < i have count >= current k
    let ascending: Vec<u64> = counts.iter().rev().copied().collect();
    let mut j = 0;
    while j < ascending.len() {
        let k = ascending[j];
        if n > 0 {
            ccdf.push((k, i as f64 / n as f64));
        }
        while j < ascending.len() && ascending[j] == k {
            j += 1;
            i -= 1;
        }
    }
    Ok(RepostBehavior { cumulative_share, ccdf, users: n as u64, reposts: total })
}

/// Settings for [`summarize`].
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryConfig {
    pub buckets: PopularityBuckets,
    /// One CRP table is kept per window.
    pub windows: Vec<TimeWindow>,
    /// Cascades below this size are left out of the timeseries and shares.
    pub min_reposts: u64,
    pub series_bucket_ms: Millis,
    pub series_horizon_ms: Millis,
}

/// Every per-view aggregate, filled in one pass over the cascades.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub crp: Vec<CrpAccumulator>,
    pub series: CrpTimeseries,
    pub shares: ShareAccumulator,
    pub views: u64,
    pub reposted_views: u64,
}

impl MetricsSummary {
    pub fn new(cfg: &SummaryConfig) -> Result<Self, MetricsError> {
        Ok(MetricsSummary {
            crp: cfg.windows.iter().map(|&w| CrpAccumulator::new(cfg.buckets.clone(), w)).collect(),
            series: CrpTimeseries::new(cfg.min_reposts, cfg.series_bucket_ms, cfg.series_horizon_ms)?,
            shares: ShareAccumulator::new(cfg.min_reposts),
            views: 0,
            reposted_views: 0,
        })
    }

    pub fn add(&mut self, e: &ExposureRecord, reposted: bool, influence: &InfluenceTable, cascade_size: u64) {
        for acc in &mut self.crp {
            acc.add(e, reposted, influence, cascade_size);
        }
        self.series.add(e, reposted, influence, cascade_size);
        self.shares.add(e, reposted, influence, cascade_size);
        self.views += 1;
        self.reposted_views += u64::from(reposted);
    }

    pub fn merge(self, other: &MetricsSummary) -> Self {
        MetricsSummary {
            crp: self.crp.into_iter().zip(&other.crp).map(|(a, b)| a.merge(b)).collect(),
            series: self.series.merge(&other.series),
            shares: self.shares.merge(&other.shares),
            views: self.views + other.views,
            reposted_views: self.reposted_views + other.reposted_views,
        }
    }
}

/// Streams the views of every cascade into a [`MetricsSummary`] without
/// materializing them. Only views inside `opts.window` are seen at all, so
/// callers usually pass an unbounded window and let each CRP table filter.
/// Popularity is looked up in `cascade_sizes`, falling back to the
/// cascade's own repost count.
pub fn summarize(
    cascades: &[Cascade],
    ctx: &TimelineContext<'_>,
    opts: &ExposureOptions,
    influence: &InfluenceTable,
    cascade_sizes: &FxHashMap<PostId, u64>,
    cfg: &SummaryConfig,
) -> Result<MetricsSummary, MetricsError> {
    let empty = MetricsSummary::new(cfg)?;
    Ok(par_fold(
        cascades,
        || empty.clone(),
        |mut acc, c| {
            let size = cascade_sizes.get(&c.root_post).copied().unwrap_or(c.nodes.len() as u64);
            CascadeIndex::new(c).for_each_exposure(ctx, opts, |e, r| acc.add(&e, r, influence, size));
            acc
        },
        |a, b| a.merge(&b),
    ))
}
