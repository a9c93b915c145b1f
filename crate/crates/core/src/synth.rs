//! Synthetic follower graphs and repost streams from a prestige-biased
//! diffusion model.
//!
//! Graph: every user draws a power-law followee count and picks followees
//! by power-law attractiveness, so follower counts are heavy-tailed too.
//! Users are tiered by follower-count rank with the same six quantile bands
//! the analysis uses.
//!
//! Diffusion, per root post with lognormal appeal `a`: whenever a follower
//! `u` sees a post or repost from `v`, it takes a Bernoulli trial with
//! probability `min(1, base * a * (1 + beta * tier_rank(v) / 5))`. A success
//! schedules a repost after an exponential reaction delay. A newer view
//! replaces any pending reaction, so the scheduled repost always has the
//! latest followee event as its cause, which is exactly what the
//! temporally-closest-parent rule recovers from the emitted stream.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Exp, LogNormal};
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::influence::{assign_categories, InfluenceTable};
use crate::metrics::{CrpCounts, CATEGORY_ROWS, UNCLASSIFIED};
use crate::model::{
    FollowerGraph, InfluenceCategory, Millis, PostEvent, PostId, RepostEvent, RepostId, TimeWindow, UserId, HOUR_MS,
    MINUTE_MS,
};

/// 2021-10-01T00:00:00Z; synthetic clocks start here.
pub const EPOCH_MS: Millis = 1_633_046_400_000;

/// Refusal threshold for [`oracle_crp`].
pub const ORACLE_MAX_EXPOSURES: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("oracle refused: instance has more than {limit} exposures")]
    TooLarge { limit: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_users: usize,
    /// Tail exponent of both the followee-count and attractiveness laws.
    pub follower_degree_exponent: f64,
    pub min_followees: usize,
    pub max_followees: usize,
    pub n_roots: usize,
    /// Reposts later than this after their root are never generated.
    pub horizon_ms: Millis,
    /// Root posts are spread uniformly over this span.
    pub post_span_ms: Millis,
    pub mean_reaction_ms: f64,
    pub base_repost_prob: f64,
    pub prestige_beta: f64,
    pub content_appeal_sd: f64,
    /// Fraction of follow edges left out of the emitted graph. Diffusion
    /// still uses them, so affected reposts become root fallbacks.
    pub hidden_edge_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 10_000,
            follower_degree_exponent: 2.5,
            min_followees: 5,
            max_followees: 1_000,
            n_roots: 10_000,
            horizon_ms: 24 * HOUR_MS,
            post_span_ms: 7 * 24 * HOUR_MS,
            mean_reaction_ms: (20 * MINUTE_MS) as f64,
            base_repost_prob: 0.012,
            prestige_beta: 2.0,
            content_appeal_sd: 0.5,
            hidden_edge_fraction: 0.0,
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.n_users < 2 {
            return bad(format!("n_users must be at least 2, got {}", self.n_users));
        }
        if self.n_users > u32::MAX as usize {
            return bad(format!("n_users {} is too large", self.n_users));
        }
        if !(self.follower_degree_exponent > 1.0 && self.follower_degree_exponent.is_finite()) {
            return bad(format!("follower_degree_exponent must be > 1, got {}", self.follower_degree_exponent));
        }
        if self.min_followees == 0 || self.min_followees > self.max_followees {
            return bad(format!(
                "need 1 <= min_followees <= max_followees, got {}..{}",
                self.min_followees, self.max_followees
            ));
        }
        if self.max_followees > (self.n_users - 1) / 2 + 1 {
            return bad(format!(
                "max_followees {} is infeasible for {} users (at most half the population)",
                self.max_followees, self.n_users
            ));
        }
        if self.n_roots == 0 {
            return bad("n_roots must be positive".into());
        }
        if self.post_span_ms < self.n_roots as Millis {
            return bad(format!(
                "post_span_ms {} cannot hold {} distinct root timestamps",
                self.post_span_ms, self.n_roots
            ));
        }
        if self.horizon_ms <= 0 {
            return bad("horizon_ms must be positive".into());
        }
        if !(self.mean_reaction_ms > 0.0 && self.mean_reaction_ms.is_finite()) {
            return bad("mean_reaction_ms must be positive".into());
        }
        if !(0.0..1.0).contains(&self.base_repost_prob) {
            return bad(format!("base_repost_prob must be in [0, 1), got {}", self.base_repost_prob));
        }
        if !(self.prestige_beta >= 0.0 && self.prestige_beta.is_finite()) {
            return bad(format!("prestige_beta must be >= 0, got {}", self.prestige_beta));
        }
        if !(self.content_appeal_sd >= 0.0 && self.content_appeal_sd.is_finite()) {
            return bad(format!("content_appeal_sd must be >= 0, got {}", self.content_appeal_sd));
        }
        if !(0.0..1.0).contains(&self.hidden_edge_fraction) {
            return bad(format!("hidden_edge_fraction must be in [0, 1), got {}", self.hidden_edge_fraction));
        }
        Ok(())
    }
}

/// Bernoulli trials taken by viewers, split by the sender's tier.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TierTally {
    pub trials: u64,
    pub successes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Generated parent of each repost (`None` = the root post), by repost id.
    pub parents: FxHashMap<RepostId, Option<RepostId>>,
    /// Tier of every user, indexed by `user_id - 1`.
    pub tiers: Vec<InfluenceCategory>,
    /// Trials indexed by sender tier rank, root posts included.
    pub trials: [TierTally; 6],
    /// Follow edges missing from the emitted graph.
    pub hidden_edges: usize,
}

impl GroundTruth {
    pub fn parent(&self, repost: RepostId) -> Option<Option<RepostId>> {
        self.parents.get(&repost).copied()
    }

    pub fn tier(&self, user: UserId) -> Option<InfluenceCategory> {
        (user.0 as usize).checked_sub(1).and_then(|i| self.tiers.get(i)).copied()
    }

    pub fn tier_table(&self) -> InfluenceTable {
        InfluenceTable::from_categories(self.tiers.iter().enumerate().map(|(i, &c)| (UserId(i as u64 + 1), c)))
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    /// Sorted by timestamp; ids ascend with time.
    pub posts: Vec<PostEvent>,
    /// Sorted by timestamp; ids ascend with time.
    pub reposts: Vec<RepostEvent>,
    pub graph: FollowerGraph,
    pub truth: GroundTruth,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(stream)))
}

/// Discrete power law with minimum `k_min`, truncated at `k_max`.
fn power_law(rng: &mut impl Rng, exponent: f64, k_min: usize, k_max: usize) -> usize {
    let u: f64 = rng.random();
    let x = k_min as f64 * (1.0 - u).powf(-1.0 / (exponent - 1.0));
    (x.floor() as usize).clamp(k_min, k_max)
}

/// Returns `(full graph adjacency as followee lists, emitted graph, hidden)`.
fn build_graph(cfg: &SynthConfig) -> (Vec<Vec<u32>>, FollowerGraph, usize) {
    let n = cfg.n_users;
    let mut rng = stream_rng(cfg.seed, u64::MAX);
    let attract: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            (1.0 - u).powf(-1.0 / (cfg.follower_degree_exponent - 1.0))
        })
        .collect();
    let alias = WeightedAliasIndex::new(attract).expect("positive finite weights");

    let mut followees: Vec<Vec<u32>> = Vec::with_capacity(n);
    let mut picked: FxHashSet<u32> = FxHashSet::default();
    for u in 0..n as u32 {
        let k = power_law(&mut rng, cfg.follower_degree_exponent, cfg.min_followees, cfg.max_followees);
        picked.clear();
        // bounded retries; k is at most half the population, but heavy
        // attractiveness can make fresh picks rare
        let mut attempts = 0;
        while picked.len() < k && attempts < 50 * k {
            attempts += 1;
            let v = alias.sample(&mut rng) as u32;
            if v != u {
                picked.insert(v);
            }
        }
        let mut list: Vec<u32> = picked.iter().copied().collect();
        list.sort_unstable();
        followees.push(list);
    }

    let mut hidden = 0;
    let mut edges = Vec::new();
    for (u, list) in followees.iter().enumerate() {
        for &v in list {
            if cfg.hidden_edge_fraction > 0.0 && rng.random::<f64>() < cfg.hidden_edge_fraction {
                hidden += 1;
                continue;
            }
            edges.push((UserId(u as u64 + 1), UserId(v as u64 + 1)));
        }
    }
    let (graph, _) = FollowerGraph::from_edges(edges);
    (followees, graph, hidden)
}

fn followers_from(followees: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let mut followers = vec![Vec::new(); followees.len()];
    for (u, list) in followees.iter().enumerate() {
        for &v in list {
            followers[v as usize].push(u as u32);
        }
    }
    followers
}

struct LocalRepost {
    user: u32,
    time: Millis,
    /// Index into the same cascade's reposts; `None` = root.
    parent: Option<u32>,
}

/// Scheduled reactions: (time, viewer, token, parent), earliest first.
type ReactionQueue = BinaryHeap<Reverse<(Millis, u32, u64, Option<u32>)>>;

struct RootSim<'a> {
    followers: &'a [Vec<u32>],
    tier_rank: &'a [u8],
    cfg: &'a SynthConfig,
    appeal: f64,
    delay: Exp<f64>,
    root_time: Millis,
    author: u32,
}

impl RootSim<'_> {
    fn prob(&self, sender: u32) -> f64 {
        let prestige = 1.0 + self.cfg.prestige_beta * f64::from(self.tier_rank[sender as usize]) / 5.0;
        (self.cfg.base_repost_prob * self.appeal * prestige).min(1.0)
    }

    fn run(&self, rng: &mut ChaCha8Rng, trials: &mut [TierTally; 6]) -> Vec<LocalRepost> {
        let horizon_end = self.root_time + self.cfg.horizon_ms;
        let mut out: Vec<LocalRepost> = Vec::new();
        let mut done: FxHashSet<u32> = FxHashSet::default();
        // viewer -> token of its live scheduled repost
        let mut pending: FxHashMap<u32, u64> = FxHashMap::default();
        let mut used: FxHashSet<Millis> = FxHashSet::default();
        used.insert(self.root_time);
        let mut queue: ReactionQueue = BinaryHeap::new();
        let mut next_token = 0u64;
        done.insert(self.author);

        let mut expose = |sender: u32,
                          at: Millis,
                          parent: Option<u32>,
                          rng: &mut ChaCha8Rng,
                          done: &FxHashSet<u32>,
                          pending: &mut FxHashMap<u32, u64>,
                          used: &mut FxHashSet<Millis>,
                          queue: &mut ReactionQueue| {
            let p = self.prob(sender);
            let tally = &mut trials[self.tier_rank[sender as usize] as usize];
            for &viewer in &self.followers[sender as usize] {
                if done.contains(&viewer) {
                    continue;
                }
                // the newer view displaces any reaction still pending
                pending.remove(&viewer);
                tally.trials += 1;
                if !rng.random_bool(p) {
                    continue;
                }
                tally.successes += 1;
                let mut fire = at + (self.delay.sample(rng).ceil() as Millis).max(1);
                while used.contains(&fire) {
                    fire += 1;
                }
                if fire >= horizon_end {
                    continue;
                }
                used.insert(fire);
                next_token += 1;
                pending.insert(viewer, next_token);
                queue.push(Reverse((fire, viewer, next_token, parent)));
            }
        };

        expose(self.author, self.root_time, None, rng, &done, &mut pending, &mut used, &mut queue);
        while let Some(Reverse((time, viewer, token, parent))) = queue.pop() {
            if pending.get(&viewer) != Some(&token) {
                continue;
            }
            pending.remove(&viewer);
            done.insert(viewer);
            let idx = out.len() as u32;
            out.push(LocalRepost { user: viewer, time, parent });
            expose(viewer, time, Some(idx), rng, &done, &mut pending, &mut used, &mut queue);
        }
        out
    }
}

/// Generates a full synthetic dataset. The result is a pure function of
/// `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput, SynthError> {
    cfg.validate()?;
    let n = cfg.n_users;
    let (followees, graph, hidden_edges) = build_graph(cfg);
    let followers = followers_from(&followees);

    let degree_scores: Vec<(UserId, f64)> =
        followers.iter().enumerate().map(|(i, f)| (UserId(i as u64 + 1), f.len() as f64)).collect();
    let tiers: Vec<InfluenceCategory> =
        assign_categories(&degree_scores).expect("population is non-empty").into_iter().map(|(_, c)| c).collect();
    let tier_rank: Vec<u8> = tiers.iter().map(|c| c.rank() as u8).collect();

    // roots: uniform authors, distinct uniform times over the span
    let mut rng = stream_rng(cfg.seed, u64::MAX - 1);
    let mut root_times: Vec<Millis> = (0..cfg.n_roots).map(|_| rng.random_range(0..cfg.post_span_ms)).collect();
    root_times.sort_unstable();
    for i in 1..root_times.len() {
        if root_times[i] <= root_times[i - 1] {
            root_times[i] = root_times[i - 1] + 1;
        }
    }
    let appeal_dist = LogNormal::new(-cfg.content_appeal_sd.powi(2) / 2.0, cfg.content_appeal_sd)
        .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    let delay = Exp::new(1.0 / cfg.mean_reaction_ms).map_err(|e| SynthError::InvalidConfig(e.to_string()))?;

    let mut posts = Vec::with_capacity(cfg.n_roots);
    let mut trials = [TierTally::default(); 6];
    let mut all: Vec<(Millis, u32, u32, Option<u32>, u32)> = Vec::new();
    for (i, &t) in root_times.iter().enumerate() {
        let author = rng.random_range(0..n as u32);
        let appeal = appeal_dist.sample(&mut rng);
        let root_time = EPOCH_MS + t;
        posts.push(PostEvent {
            post_id: PostId(i as u64 + 1),
            author: UserId(author as u64 + 1),
            timestamp: root_time,
            is_official: false,
        });
        let sim = RootSim { followers: &followers, tier_rank: &tier_rank, cfg, appeal, delay, root_time, author };
        let mut root_rng = stream_rng(cfg.seed, i as u64);
        let local = sim.run(&mut root_rng, &mut trials);
        all.extend(local.into_iter().enumerate().map(|(k, r)| (r.time, i as u32, k as u32, r.parent, r.user)));
    }

    // global ids in (time, root) order
    all.sort_unstable_by_key(|&(t, root, k, _, _)| (t, root, k));
    let mut global: FxHashMap<(u32, u32), RepostId> = FxHashMap::default();
    for (j, &(_, root, k, _, _)) in all.iter().enumerate() {
        global.insert((root, k), RepostId(j as u64 + 1));
    }
    let mut reposts = Vec::with_capacity(all.len());
    let mut parents = FxHashMap::default();
    for (j, &(t, root, _, parent, user)) in all.iter().enumerate() {
        let id = RepostId(j as u64 + 1);
        reposts.push(RepostEvent {
            repost_id: id,
            reposter: UserId(user as u64 + 1),
            source_post_id: PostId(root as u64 + 1),
            timestamp: t,
        });
        parents.insert(id, parent.map(|p| global[&(root, p)]));
    }

    Ok(SynthOutput { posts, reposts, graph, truth: GroundTruth { parents, tiers, trials, hidden_edges } })
}

/// Naive recount of views and credited views per sender category, using
/// ground-truth parents. Rows follow the metrics layout: category rank
/// 0..=5, then unclassified.
///
/// Deliberately independent of the timeline module: every follow edge is
/// scanned for every repost.
pub fn oracle_crp(
    posts: &[PostEvent],
    reposts: &[RepostEvent],
    graph: &FollowerGraph,
    truth: &GroundTruth,
    window: TimeWindow,
    categories: &InfluenceTable,
) -> Result<[CrpCounts; CATEGORY_ROWS], SynthError> {
    let edges: Vec<(UserId, UserId)> = graph.edges().collect();
    let active: FxHashSet<UserId> = reposts.iter().map(|r| r.reposter).collect();
    let root_time: FxHashMap<PostId, Millis> = posts.iter().map(|p| (p.post_id, p.timestamp)).collect();

    let mut out = [CrpCounts::default(); CATEGORY_ROWS];
    let mut exposures = 0u64;
    for s in reposts {
        let Some(&t0) = root_time.get(&s.source_post_id) else { continue };
        if !window.contains(s.timestamp - t0) {
            continue;
        }
        let row = categories.category(s.reposter).map_or(UNCLASSIFIED, |c| c.rank());
        for &(viewer, followee) in &edges {
            if followee != s.reposter || !active.contains(&viewer) {
                continue;
            }
            let mine = reposts.iter().filter(|r| r.reposter == viewer && r.source_post_id == s.source_post_id);
            let first = mine.clone().map(|r| r.timestamp).min();
            if first.is_some_and(|f| f <= s.timestamp) {
                continue;
            }
            exposures += 1;
            if exposures > ORACLE_MAX_EXPOSURES {
                return Err(SynthError::TooLarge { limit: ORACLE_MAX_EXPOSURES });
            }
            let credited = mine.into_iter().any(|r| truth.parent(r.repost_id) == Some(Some(s.repost_id)));
            out[row].viewed += 1;
            out[row].reposted += u64::from(credited);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            n_users: 300,
            max_followees: 100,
            n_roots: 60,
            base_repost_prob: 0.05,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = generate(&small(9)).unwrap();
        let b = generate(&small(9)).unwrap();
        assert_eq!(a.posts, b.posts);
        assert_eq!(a.reposts, b.reposts);
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.graph.edges().collect::<Vec<_>>(), b.graph.edges().collect::<Vec<_>>());
        let c = generate(&small(10)).unwrap();
        assert_ne!(a.reposts, c.reposts);
    }

    #[test]
    fn zero_probability_means_no_reposts() {
        let out = generate(&SynthConfig { base_repost_prob: 0.0, ..small(3) }).unwrap();
        assert!(out.reposts.is_empty());
        assert_eq!(out.posts.len(), 60);
        assert!(out.truth.trials.iter().all(|t| t.successes == 0));
    }

    #[test]
    fn stream_is_consistent() {
        let out = generate(&small(4)).unwrap();
        assert!(!out.reposts.is_empty());
        let times: Vec<_> = out.reposts.iter().map(|r| r.timestamp).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
        let root: FxHashMap<PostId, &PostEvent> = out.posts.iter().map(|p| (p.post_id, p)).collect();
        let by_id: FxHashMap<RepostId, &RepostEvent> = out.reposts.iter().map(|r| (r.repost_id, r)).collect();
        let mut seen = FxHashSet::default();
        for r in &out.reposts {
            let p = root[&r.source_post_id];
            assert!(r.timestamp > p.timestamp && r.timestamp - p.timestamp < HOUR_MS * 24);
            assert!(seen.insert((r.reposter, r.source_post_id)), "one repost per user and post");
            assert_ne!(r.reposter, p.author);
            match out.truth.parent(r.repost_id).unwrap() {
                None => assert!(out.graph.follows(r.reposter, p.author)),
                Some(pid) => {
                    let parent = by_id[&pid];
                    assert_eq!(parent.source_post_id, r.source_post_id);
                    assert!(parent.timestamp < r.timestamp);
                    assert!(out.graph.follows(r.reposter, parent.reposter));
                }
            }
        }
    }

    #[test]
    fn tiers_follow_degree_rank() {
        let out = generate(&small(5)).unwrap();
        let deg = |u: UserId| out.graph.followers_of(u).len();
        let users: Vec<UserId> = (1..=300).map(UserId).collect();
        for a in &users {
            for b in &users {
                if deg(*a) > deg(*b) {
                    assert!(out.truth.tier(*a).unwrap() >= out.truth.tier(*b).unwrap());
                }
            }
        }
        assert_eq!(out.truth.tier(UserId(0)), None);
    }

    #[test]
    fn hidden_edges_are_dropped() {
        let full = generate(&small(6)).unwrap();
        let gappy = generate(&SynthConfig { hidden_edge_fraction: 0.3, ..small(6) }).unwrap();
        assert_eq!(full.truth.hidden_edges, 0);
        assert!(gappy.truth.hidden_edges > 0);
        assert_eq!(gappy.graph.edge_count() + gappy.truth.hidden_edges, full.graph.edge_count());
        assert_eq!(gappy.reposts, full.reposts);
    }

    #[test]
    fn rejects_bad_configs() {
        for cfg in [
            SynthConfig { n_users: 1, ..small(1) },
            SynthConfig { follower_degree_exponent: 1.0, ..small(1) },
            SynthConfig { base_repost_prob: 1.5, ..small(1) },
            SynthConfig { prestige_beta: -0.1, ..small(1) },
            SynthConfig { n_roots: 0, ..small(1) },
            SynthConfig { max_followees: 1000, ..small(1) },
            SynthConfig { post_span_ms: 10, ..small(1) },
        ] {
            assert!(matches!(generate(&cfg), Err(SynthError::InvalidConfig(_))), "{cfg:?}");
        }
    }

    #[test]
    fn oracle_on_two_of_three_fixture() {
        // one sender followed by three active viewers, two of whom repost
        // from it
        let u = UserId;
        let (graph, _) = FollowerGraph::from_edges([
            (u(2), u(1)),
            (u(3), u(1)),
            (u(4), u(1)),
            (u(1), u(9)),
            (u(2), u(9)),
            (u(3), u(9)),
            (u(4), u(9)),
        ]);
        let post =
            |id, author, t| PostEvent { post_id: PostId(id), author: u(author), timestamp: t, is_official: false };
        let rep = |id, who, src, t| RepostEvent {
            repost_id: RepostId(id),
            reposter: u(who),
            source_post_id: PostId(src),
            timestamp: t,
        };
        let posts = vec![post(1, 9, 0), post(2, 9, 0)];
        let reposts = vec![rep(1, 1, 1, 10), rep(2, 2, 1, 20), rep(3, 3, 1, 30), rep(4, 4, 2, 5)];
        let mut parents = FxHashMap::default();
        parents.insert(RepostId(1), None);
        parents.insert(RepostId(2), Some(RepostId(1)));
        parents.insert(RepostId(3), Some(RepostId(1)));
        parents.insert(RepostId(4), None);
        let truth = GroundTruth { parents, tiers: vec![], trials: Default::default(), hidden_edges: 0 };
        let cats = InfluenceTable::from_categories([(u(1), InfluenceCategory::High)]);
        let counts = oracle_crp(&posts, &reposts, &graph, &truth, TimeWindow::hours(24), &cats).unwrap();
        let high = counts[InfluenceCategory::High.rank()];
        assert_eq!((high.reposted, high.viewed), (2, 3));
        assert_eq!(high.crp(), Some(2.0 / 3.0));
        // senders 2 and 3 (unclassified) are seen by nobody active who had
        // not reposted
        assert_eq!(counts[UNCLASSIFIED].viewed, 0);
        assert_eq!(counts[UNCLASSIFIED].crp(), None);
    }
}
