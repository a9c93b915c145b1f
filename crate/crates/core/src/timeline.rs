//! Virtual timelines: which followee reposts each user could have seen, and
//! whether a seen repost was the one the user reposted from.
//!
//! A view of sender `v`'s repost by viewer `u` is emitted when `u` follows
//! `v` and
//!
//! 1. `u` reposted something at least once (dormant accounts never view),
//! 2. `v` is not an official account,
//! 3. `u` had not already reposted the same post at or before `v`'s repost.
//!
//! A view counts as reposted when `u`'s repost is a child of `v`'s repost in
//! the cascade, so every viewer repost credits exactly one view.

use std::collections::BTreeMap;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;

use crate::cascade::Cascade;
use crate::model::{FollowerGraph, Millis, PostId, RepostId, TimeWindow, UserId};
use crate::par_map;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ExposureRecord {
    pub viewer: UserId,
    pub sender: UserId,
    pub root_post: PostId,
    pub sender_repost_id: RepostId,
    pub exposure_time: Millis,
    pub elapsed_since_root: Millis,
}

impl ExposureRecord {
    fn sort_key(&self) -> (UserId, Millis, PostId, RepostId) {
        (self.viewer, self.exposure_time, self.root_post, self.sender_repost_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExposureOptions {
    pub window: TimeWindow,
    /// Count a sender at most once per (viewer, post), keeping the earliest.
    pub dedup_sender: bool,
}

impl ExposureOptions {
    pub fn new(window: TimeWindow) -> Self {
        ExposureOptions { window, dedup_sender: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TimelineError {
    #[error("exposure references post {0}, which has no cascade")]
    UnknownCascade(PostId),
}

/// Graph plus the per-user facts conditions 1 and 2 need.
#[derive(Debug, Clone)]
pub struct TimelineContext<'a> {
    pub graph: &'a FollowerGraph,
    pub active: FxHashSet<UserId>,
    pub officials: &'a FxHashSet<UserId>,
}

impl<'a> TimelineContext<'a> {
    /// Users with at least one repost in any cascade are active.
    pub fn new(graph: &'a FollowerGraph, cascades: &[Cascade], officials: &'a FxHashSet<UserId>) -> Self {
        let active = cascades.iter().flat_map(|c| c.nodes.iter().map(|n| n.reposter)).collect();
        TimelineContext { graph, active, officials }
    }
}

/// Per-cascade lookups for condition 3 and for repost credit.
#[derive(Debug)]
pub struct CascadeIndex<'c> {
    cascade: &'c Cascade,
    first_repost: FxHashMap<UserId, Millis>,
    /// `(child reposter, parent repost)` for every non-root edge.
    credited: FxHashSet<(UserId, RepostId)>,
    /// Senders with more than one repost of this post.
    repeat_senders: FxHashSet<UserId>,
}

impl<'c> CascadeIndex<'c> {
    pub fn new(cascade: &'c Cascade) -> Self {
        let mut first_repost: FxHashMap<UserId, Millis> = FxHashMap::default();
        let mut repeat_senders = FxHashSet::default();
        let mut credited = FxHashSet::default();
        for (i, n) in cascade.nodes.iter().enumerate() {
            // nodes are time ordered, so the first insert is the earliest
            if let std::collections::hash_map::Entry::Vacant(e) = first_repost.entry(n.reposter) {
                e.insert(n.timestamp);
            } else {
                repeat_senders.insert(n.reposter);
            }
            if let Some(parent) = cascade.parent_repost(i) {
                credited.insert((n.reposter, parent));
            }
        }
        CascadeIndex { cascade, first_repost, credited, repeat_senders }
    }

    pub fn cascade(&self) -> &Cascade {
        self.cascade
    }

    /// Time of `user`'s first repost of this post.
    pub fn first_repost(&self, user: UserId) -> Option<Millis> {
        self.first_repost.get(&user).copied()
    }

    /// Whether `viewer` reposted from `sender_repost`.
    pub fn is_credited(&self, viewer: UserId, sender_repost: RepostId) -> bool {
        self.credited.contains(&(viewer, sender_repost))
    }

    /// Calls `f(record, was_reposted)` for every view this cascade produces.
    pub fn for_each_exposure<F>(&self, ctx: &TimelineContext<'_>, opts: &ExposureOptions, mut f: F)
    where
        F: FnMut(ExposureRecord, bool),
    {
        let c = self.cascade;
        let mut seen_pairs: FxHashSet<(UserId, UserId)> = FxHashSet::default();
        for n in &c.nodes {
            let elapsed = n.timestamp - c.root_time;
            if !opts.window.contains(elapsed) || ctx.officials.contains(&n.reposter) {
                continue;
            }
            let repeat = opts.dedup_sender && self.repeat_senders.contains(&n.reposter);
            for &viewer in ctx.graph.followers_of(n.reposter) {
                if !ctx.active.contains(&viewer) {
                    continue;
                }
                if let Some(t) = self.first_repost(viewer) {
                    if n.timestamp >= t {
                        continue;
                    }
                }
                let reposted = if repeat {
                    if !seen_pairs.insert((viewer, n.reposter)) {
                        continue;
                    }
                    // credit if the viewer reposted from any of the sender's reposts
                    c.nodes.iter().filter(|m| m.reposter == n.reposter).any(|m| self.is_credited(viewer, m.repost_id))
                } else {
                    self.is_credited(viewer, n.repost_id)
                };
                f(
                    ExposureRecord {
                        viewer,
                        sender: n.reposter,
                        root_post: c.root_post,
                        sender_repost_id: n.repost_id,
                        exposure_time: n.timestamp,
                        elapsed_since_root: elapsed,
                    },
                    reposted,
                );
            }
        }
    }
}

/// All views, sorted by `(viewer, exposure_time)`.
pub fn build_exposures(cascades: &[Cascade], ctx: &TimelineContext<'_>, opts: &ExposureOptions) -> Vec<ExposureRecord> {
    let parts = par_map(cascades, |c| {
        let mut out = Vec::new();
        CascadeIndex::new(c).for_each_exposure(ctx, opts, |rec, _| out.push(rec));
        out
    });
    let mut all: Vec<ExposureRecord> = parts.into_iter().flatten().collect();
    all.sort_unstable_by_key(ExposureRecord::sort_key);
    all
}

/// Marks each view with whether the viewer reposted from it.
pub fn resolve_repost_outcome(
    exposures: &[ExposureRecord],
    cascades: &[Cascade],
) -> Result<Vec<(ExposureRecord, bool)>, TimelineError> {
    let by_root: FxHashMap<PostId, CascadeIndex<'_>> =
        cascades.iter().map(|c| (c.root_post, CascadeIndex::new(c))).collect();
    exposures
        .iter()
        .map(|e| {
            let idx = by_root.get(&e.root_post).ok_or(TimelineError::UnknownCascade(e.root_post))?;
            Ok((*e, idx.is_credited(e.viewer, e.sender_repost_id)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TimelineStats {
    pub exposures: u64,
    pub distinct_posts: u64,
}

pub fn timeline_stats(exposures: &[ExposureRecord]) -> BTreeMap<UserId, TimelineStats> {
    let mut posts: FxHashSet<(UserId, PostId)> = FxHashSet::default();
    let mut out: BTreeMap<UserId, TimelineStats> = BTreeMap::new();
    for e in exposures {
        let s = out.entry(e.viewer).or_default();
        s.exposures += 1;
        if posts.insert((e.viewer, e.root_post)) {
            s.distinct_posts += 1;
        }
    }
    out
}
