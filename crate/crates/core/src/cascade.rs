//! Repost cascade reconstruction and tree metrics.
//!
//! Every source post roots one cascade. Reposts are attached in timestamp
//! order: a repost by `u` at time `t` takes as parent the most recent earlier
//! repost (strictly before `t`) made by someone `u` follows. Ties on time go
//! to the larger repost id. With no such repost the node hangs off the root,
//! whether or not `u` follows the root author; the latter case is marked as
//! a fallback attachment.

use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;

use crate::influence::InfluenceTable;
use crate::model::{FollowerGraph, InfluenceCategory, Millis, PostEvent, PostId, RepostEvent, RepostId, UserId};
use crate::par_map;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CascadeError {
    #[error("cascade for post {0} has fewer than two nodes")]
    TooSmall(PostId),
    #[error("cascade for post {root}: {message}")]
    InvalidTree { root: PostId, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CascadeNode {
    pub repost_id: RepostId,
    pub reposter: UserId,
    pub timestamp: Millis,
    /// Index of the parent in [`Cascade::nodes`]; `None` is the root.
    pub parent: Option<u32>,
    /// Attached to the root only because no followed participant preceded it.
    pub fallback: bool,
}

/// A rooted repost tree. Nodes are ordered by `(timestamp, repost_id)`, so a
/// parent always precedes its children.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cascade {
    pub root_post: PostId,
    pub root_author: UserId,
    pub root_time: Millis,
    /// Set when this tree is a subtree re-rooted at a repost.
    pub root_repost: Option<RepostId>,
    pub nodes: Vec<CascadeNode>,
}

impl Cascade {
    /// Node count including the root.
    pub fn size(&self) -> usize {
        self.nodes.len() + 1
    }

    /// Author of the earliest repost.
    pub fn first_reposter(&self) -> Option<UserId> {
        self.nodes.first().map(|n| n.reposter)
    }

    pub fn parent_repost(&self, node: usize) -> Option<RepostId> {
        self.nodes[node].parent.map(|p| self.nodes[p as usize].repost_id)
    }

    /// `(child, parent)` pairs; a `None` parent is the root.
    pub fn edges(&self) -> impl Iterator<Item = (RepostId, Option<RepostId>)> + '_ {
        (0..self.nodes.len()).map(|i| (self.nodes[i].repost_id, self.parent_repost(i)))
    }

    pub fn fallback_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.fallback).count()
    }

    /// Checks the tree invariants: parents precede children in order and in
    /// time, and the node order is canonical. Together these rule out cycles
    /// and make every node reachable from the root.
    pub fn check(&self) -> Result<(), CascadeError> {
        let bad = |message: String| CascadeError::InvalidTree { root: self.root_post, message };
        for (i, n) in self.nodes.iter().enumerate() {
            if n.timestamp < self.root_time {
                return Err(bad(format!("repost {} precedes the root", n.repost_id)));
            }
            if i > 0 {
                let prev = &self.nodes[i - 1];
                if (prev.timestamp, prev.repost_id) >= (n.timestamp, n.repost_id) {
                    return Err(bad(format!("nodes out of order at repost {}", n.repost_id)));
                }
            }
            if let Some(p) = n.parent {
                let p = p as usize;
                if p >= i {
                    return Err(bad(format!("repost {} has a later parent", n.repost_id)));
                }
                if self.nodes[p].timestamp > n.timestamp {
                    return Err(bad(format!("repost {} predates its parent", n.repost_id)));
                }
            }
        }
        Ok(())
    }

    /// Builds a cascade from explicit parent links (`None` = root), e.g. a
    /// generator's ground truth.
    pub fn from_parent_links(
        root: &PostEvent,
        mut links: Vec<(RepostEvent, Option<RepostId>)>,
    ) -> Result<Cascade, CascadeError> {
        links.sort_by_key(|(r, _)| (r.timestamp, r.repost_id));
        let index: FxHashMap<RepostId, u32> =
            links.iter().enumerate().map(|(i, (r, _))| (r.repost_id, i as u32)).collect();
        let mut nodes = Vec::with_capacity(links.len());
        for (r, parent) in &links {
            let parent = match parent {
                None => None,
                Some(pid) => Some(*index.get(pid).ok_or_else(|| CascadeError::InvalidTree {
                    root: root.post_id,
                    message: format!("repost {} names unknown parent {pid}", r.repost_id),
                })?),
            };
            nodes.push(CascadeNode {
                repost_id: r.repost_id,
                reposter: r.reposter,
                timestamp: r.timestamp,
                parent,
                fallback: false,
            });
        }
        let c = Cascade {
            root_post: root.post_id,
            root_author: root.author,
            root_time: root.timestamp,
            root_repost: None,
            nodes,
        };
        c.check()?;
        Ok(c)
    }
}

/// A repost left out of every cascade.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectedRepost {
    UnknownSource(RepostId),
    BeforeRoot { repost_id: RepostId, repost_ts: Millis, root_ts: Millis },
}

#[derive(Debug, Clone, Default)]
pub struct CascadeBuild {
    /// One cascade per source post, in post `(timestamp, id)` order.
    pub cascades: Vec<Cascade>,
    pub rejected: Vec<RejectedRepost>,
    /// Reposts dropped because the reposter is an official account.
    pub official_reposts_dropped: usize,
}

/// Reconstructs every cascade. `officials` are removed as reposters but may
/// still author roots.
pub fn build_cascades(
    posts: &[PostEvent],
    reposts: &[RepostEvent],
    graph: &FollowerGraph,
    officials: &FxHashSet<UserId>,
) -> CascadeBuild {
    let mut roots: Vec<&PostEvent> = posts.iter().collect();
    roots.sort_by_key(|p| (p.timestamp, p.post_id));
    let slot: FxHashMap<PostId, usize> = roots.iter().enumerate().map(|(i, p)| (p.post_id, i)).collect();

    let mut grouped: Vec<Vec<RepostEvent>> = vec![Vec::new(); roots.len()];
    let mut rejected = Vec::new();
    let mut official_reposts_dropped = 0;
    for r in reposts {
        let Some(&i) = slot.get(&r.source_post_id) else {
            rejected.push(RejectedRepost::UnknownSource(r.repost_id));
            continue;
        };
        if r.timestamp < roots[i].timestamp {
            rejected.push(RejectedRepost::BeforeRoot {
                repost_id: r.repost_id,
                repost_ts: r.timestamp,
                root_ts: roots[i].timestamp,
            });
            continue;
        }
        if officials.contains(&r.reposter) {
            official_reposts_dropped += 1;
            continue;
        }
        grouped[i].push(*r);
    }
    for r in &rejected {
        log::debug!("rejected repost: {r:?}");
    }

    let work: Vec<(&PostEvent, Vec<RepostEvent>)> = roots.into_iter().zip(grouped).collect();
    let cascades = par_map(&work, |(root, group)| build_one(root, group, graph));
    CascadeBuild { cascades, rejected, official_reposts_dropped }
}

/// Builds a single cascade from the (already filtered) reposts of `root`.
pub fn build_one(root: &PostEvent, reposts: &[RepostEvent], graph: &FollowerGraph) -> Cascade {
    let mut reposts = reposts.to_vec();
    reposts.sort_by_key(|r| (r.timestamp, r.repost_id));
    // latest node per participant, among nodes strictly earlier than the one
    // being placed
    let mut latest: FxHashMap<UserId, ((Millis, RepostId), u32)> = FxHashMap::default();
    let mut nodes: Vec<CascadeNode> = Vec::with_capacity(reposts.len());

    let mut group_start = 0;
    while group_start < reposts.len() {
        let t = reposts[group_start].timestamp;
        let mut group_end = group_start;
        while group_end < reposts.len() && reposts[group_end].timestamp == t {
            group_end += 1;
        }
        for r in &reposts[group_start..group_end] {
            let u = r.reposter;
            let followees = graph.followees_of(u);
            let best = if followees.len() <= latest.len() {
                followees.iter().filter_map(|f| latest.get(f)).max_by_key(|(k, _)| *k).copied()
            } else {
                latest
                    .iter()
                    .filter(|(v, _)| followees.binary_search(v).is_ok())
                    .map(|(_, e)| *e)
                    .max_by_key(|(k, _)| *k)
            };
            let parent = best.map(|(_, idx)| idx);
            let fallback = parent.is_none() && u != root.author && !graph.follows(u, root.author);
            nodes.push(CascadeNode { repost_id: r.repost_id, reposter: u, timestamp: t, parent, fallback });
        }
        for (offset, r) in reposts[group_start..group_end].iter().enumerate() {
            let idx = (group_start + offset) as u32;
            let key = (r.timestamp, r.repost_id);
            let e = latest.entry(r.reposter).or_insert((key, idx));
            if e.0 < key {
                *e = (key, idx);
            }
        }
        group_start = group_end;
    }

    Cascade { root_post: root.post_id, root_author: root.author, root_time: root.timestamp, root_repost: None, nodes }
}

/// Depth of every node in edges from the root (the root itself is depth 0
/// and not included).
fn node_depths(c: &Cascade) -> Vec<u32> {
    let mut depth = vec![0u32; c.nodes.len()];
    for (i, n) in c.nodes.iter().enumerate() {
        depth[i] = match n.parent {
            None => 1,
            Some(p) => depth[p as usize] + 1,
        };
    }
    depth
}

/// Longest root-to-leaf path, in edges.
pub fn max_depth(c: &Cascade) -> u32 {
    node_depths(c).into_iter().max().unwrap_or(0)
}

/// Mean shortest-path distance over all unordered node pairs, root
/// included. `None` for a lone root.
///
/// In a tree every edge lies on the path of exactly `s * (n - s)` pairs,
/// where `s` is the size of the subtree below it, which gives the Wiener
/// index in one pass.
pub fn structural_virality(c: &Cascade) -> Option<f64> {
    let n = c.size() as u128;
    if n < 2 {
        return None;
    }
    let mut subtree = vec![1u64; c.nodes.len()];
    for i in (0..c.nodes.len()).rev() {
        if let Some(p) = c.nodes[i].parent {
            subtree[p as usize] += subtree[i];
        }
    }
    let wiener: u128 = subtree.iter().map(|&s| s as u128 * (n - s as u128)).sum();
    Some(wiener as f64 / (n * (n - 1) / 2) as f64)
}

/// The subtree rooted at the earliest repost, re-rooted there.
pub fn first_reposter_subtree(c: &Cascade) -> Result<Cascade, CascadeError> {
    let Some(first) = c.nodes.first() else {
        return Err(CascadeError::TooSmall(c.root_post));
    };
    // new index of each kept node; node 0 becomes the root
    let mut remap: Vec<Option<Option<u32>>> = vec![None; c.nodes.len()];
    remap[0] = Some(None);
    let mut nodes = Vec::new();
    for i in 1..c.nodes.len() {
        let Some(p) = c.nodes[i].parent else { continue };
        if let Some(new_parent) = remap[p as usize] {
            remap[i] = Some(Some(nodes.len() as u32));
            nodes.push(CascadeNode { parent: new_parent, ..c.nodes[i] });
        }
    }
    Ok(Cascade {
        root_post: c.root_post,
        root_author: first.reposter,
        root_time: first.timestamp,
        root_repost: Some(first.repost_id),
        nodes,
    })
}

/// Mean and 95% normal-approximation half-width. The half-width is absent
/// below two samples.
pub fn mean_and_half_width(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some(1.96 * (var / n as f64).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViralityRow {
    pub category: InfluenceCategory,
    /// Qualifying cascades whose first reposter is in this category.
    pub count: usize,
    pub mean_structural_virality: Option<f64>,
    pub structural_virality_half_width: Option<f64>,
    pub mean_max_depth: Option<f64>,
    pub max_depth_half_width: Option<f64>,
}

/// Structural virality and depth of first-reposter subtrees, grouped by the
/// first reposter's category. Only cascades with at least `min_size` nodes
/// (root included) count. Subtrees that are a single node have no
/// structural virality and only contribute to depth.
pub fn metrics_by_first_reposter_influence(
    cascades: &[Cascade],
    influence: &InfluenceTable,
    min_size: usize,
) -> Vec<ViralityRow> {
    let mut sv: [Vec<f64>; 6] = Default::default();
    let mut depth: [Vec<f64>; 6] = Default::default();
    let mut counts = [0usize; 6];
    for c in cascades.iter().filter(|c| c.size() >= min_size.max(2)) {
        let Ok(sub) = first_reposter_subtree(c) else { continue };
        let Some(cat) = influence.category(sub.root_author) else {
            log::debug!("first reposter {} of post {} has no category", sub.root_author, c.root_post);
            continue;
        };
        let k = cat.rank();
        counts[k] += 1;
        if let Some(v) = structural_virality(&sub) {
            sv[k].push(v);
        }
        depth[k].push(max_depth(&sub) as f64);
    }
    InfluenceCategory::ALL
        .iter()
        .map(|&category| {
            let k = category.rank();
            let (mean_sv, sv_hw) = mean_and_half_width(&sv[k]);
            let (mean_d, d_hw) = mean_and_half_width(&depth[k]);
            ViralityRow {
                category,
                count: counts[k],
                mean_structural_virality: mean_sv,
                structural_virality_half_width: sv_hw,
                mean_max_depth: mean_d,
                max_depth_half_width: d_hw,
            }
        })
        .collect()
}
