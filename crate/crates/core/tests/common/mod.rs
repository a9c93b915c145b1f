//! Brute-force reference implementations shared by the integration and
//! acceptance suites.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use cascadeflow::cascade::Cascade;
use cascadeflow::model::{FollowerGraph, PostEvent, PostId, RepostEvent, RepostId, UserId};
use rand::Rng;
use rustc_hash::{FxHashMap, FxHashSet};

pub type EdgeSet = BTreeSet<(PostId, RepostId, Option<RepostId>)>;

/// Parent of every repost by scanning all reposts of the same post.
pub fn naive_cascade_edges(
    posts: &[PostEvent],
    reposts: &[RepostEvent],
    graph: &FollowerGraph,
    officials: &FxHashSet<UserId>,
) -> EdgeSet {
    let follows: FxHashSet<(UserId, UserId)> = graph.edges().collect();
    let root_time: FxHashMap<PostId, i64> = posts.iter().map(|p| (p.post_id, p.timestamp)).collect();
    let valid = |r: &RepostEvent| {
        root_time.get(&r.source_post_id).is_some_and(|&t| r.timestamp >= t) && !officials.contains(&r.reposter)
    };
    let mut by_post: FxHashMap<PostId, Vec<&RepostEvent>> = FxHashMap::default();
    for r in reposts.iter().filter(|r| valid(r)) {
        by_post.entry(r.source_post_id).or_default().push(r);
    }
    let mut out = EdgeSet::new();
    for group in by_post.values() {
        for r in group {
            let parent = group
                .iter()
                .filter(|s| s.timestamp < r.timestamp && follows.contains(&(r.reposter, s.reposter)))
                .max_by_key(|s| (s.timestamp, s.repost_id))
                .map(|s| s.repost_id);
            out.insert((r.source_post_id, r.repost_id, parent));
        }
    }
    out
}

pub fn cascade_edges(cascades: &[Cascade]) -> EdgeSet {
    cascades.iter().flat_map(|c| c.edges().map(move |(child, parent)| (c.root_post, child, parent))).collect()
}

/// Mean shortest-path distance over all ordered node pairs, by BFS from
/// every node.
pub fn bfs_structural_virality(c: &Cascade) -> Option<f64> {
    let n = c.nodes.len() + 1;
    if n < 2 {
        return None;
    }
    let mut adj = vec![Vec::new(); n];
    for (i, node) in c.nodes.iter().enumerate() {
        let p = node.parent.map_or(0, |p| p as usize + 1);
        adj[i + 1].push(p);
        adj[p].push(i + 1);
    }
    let mut total = 0u64;
    for s in 0..n {
        let mut dist = vec![u64::MAX; n];
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if dist[v] == u64::MAX {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
        total += dist.iter().sum::<u64>();
    }
    Some(total as f64 / (n * (n - 1)) as f64)
}

/// Depth of the deepest node by walking every node up to the root.
pub fn naive_max_depth(c: &Cascade) -> u32 {
    (0..c.nodes.len())
        .map(|i| {
            let mut d = 1;
            let mut cur = c.nodes[i].parent;
            while let Some(p) = cur {
                d += 1;
                cur = c.nodes[p as usize].parent;
            }
            d
        })
        .max()
        .unwrap_or(0)
}

/// A cascade whose node `i` hangs off a uniformly chosen earlier node (or
/// the root).
pub fn random_tree(rng: &mut impl Rng, reposts: usize) -> Cascade {
    let root = PostEvent { post_id: PostId(1), author: UserId(0), timestamp: 0, is_official: false };
    let links = (0..reposts)
        .map(|i| {
            let r = RepostEvent {
                repost_id: RepostId(i as u64 + 1),
                reposter: UserId(i as u64 + 1),
                source_post_id: PostId(1),
                timestamp: i as i64 + 1,
            };
            let p = rng.random_range(0..=i);
            (r, (p > 0).then_some(RepostId(p as u64)))
        })
        .collect();
    Cascade::from_parent_links(&root, links).expect("parents precede children")
}

pub struct RandomStream {
    pub posts: Vec<PostEvent>,
    pub reposts: Vec<RepostEvent>,
    pub graph: FollowerGraph,
    pub officials: FxHashSet<UserId>,
}

/// An adversarial event stream: coarse timestamps (many ties), dense
/// random follows, repeat reposters, a few official accounts, reposts of
/// unknown posts and reposts predating their root.
pub fn random_stream(rng: &mut impl Rng, users: u64, posts: u64, reposts: u64) -> RandomStream {
    let mut edges = Vec::new();
    for u in 0..users {
        let k = rng.random_range(0..users.min(12));
        for _ in 0..k {
            edges.push((UserId(u), UserId(rng.random_range(0..users))));
        }
    }
    let (graph, _) = FollowerGraph::from_edges(edges);
    let officials = (0..users).filter(|_| rng.random_bool(0.03)).map(UserId).collect();
    let post_events: Vec<PostEvent> = (0..posts)
        .map(|i| PostEvent {
            post_id: PostId(i + 1),
            author: UserId(rng.random_range(0..users)),
            timestamp: rng.random_range(0..20),
            is_official: false,
        })
        .collect();
    let mut ids: Vec<u64> = (1..=reposts).collect();
    // ids unrelated to time order
    for i in (1..ids.len()).rev() {
        ids.swap(i, rng.random_range(0..=i));
    }
    let repost_events = ids
        .into_iter()
        .map(|id| RepostEvent {
            repost_id: RepostId(id),
            reposter: UserId(rng.random_range(0..users)),
            source_post_id: PostId(rng.random_range(1..=posts + 1)),
            timestamp: rng.random_range(0..60),
        })
        .collect();
    RandomStream { posts: post_events, reposts: repost_events, graph, officials }
}
