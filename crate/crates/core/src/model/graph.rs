use rustc_hash::FxHashMap;

use super::UserId;

/// Directed follower -> followee adjacency with both directions indexed.
///
/// Stored as two CSR arrays over a dense local index. Adjacency lists are
/// sorted and duplicate-free, self-edges never enter.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FollowerGraph {
    users: Vec<UserId>,
    index: FxHashMap<UserId, u32>,
    followee_offsets: Vec<usize>,
    followees: Vec<UserId>,
    follower_offsets: Vec<usize>,
    followers: Vec<UserId>,
}

impl FollowerGraph {
    /// Builds the graph from `(follower, followee)` pairs. Returns the graph
    /// and the number of self-edges that were dropped.
    pub fn from_edges<I>(edges: I) -> (Self, usize)
    where
        I: IntoIterator<Item = (UserId, UserId)>,
    {
        let mut self_edges = 0;
        let mut pairs: Vec<(UserId, UserId)> = edges
            .into_iter()
            .filter(|(a, b)| {
                let keep = a != b;
                if !keep {
                    self_edges += 1;
                }
                keep
            })
            .collect();
        pairs.sort_unstable();
        pairs.dedup();

        let mut users: Vec<UserId> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        users.sort_unstable();
        users.dedup();
        let index: FxHashMap<UserId, u32> = users.iter().enumerate().map(|(i, &u)| (u, i as u32)).collect();

        let n = users.len();
        let followee_offsets = offsets(n, pairs.iter().map(|(a, _)| index[a] as usize));
        // pairs are sorted by (follower, followee) so each followee run is sorted
        let followees: Vec<UserId> = pairs.iter().map(|&(_, b)| b).collect();

        let mut reversed: Vec<(UserId, UserId)> = pairs.iter().map(|&(a, b)| (b, a)).collect();
        reversed.sort_unstable();
        let follower_offsets = offsets(n, reversed.iter().map(|(b, _)| index[b] as usize));
        let followers: Vec<UserId> = reversed.iter().map(|&(_, a)| a).collect();

        (FollowerGraph { users, index, followee_offsets, followees, follower_offsets, followers }, self_edges)
    }

    /// Accounts `user` follows, sorted ascending.
    pub fn followees_of(&self, user: UserId) -> &[UserId] {
        match self.index.get(&user) {
            Some(&i) => {
                let i = i as usize;
                &self.followees[self.followee_offsets[i]..self.followee_offsets[i + 1]]
            }
            None => &[],
        }
    }

    /// Accounts following `user`, sorted ascending.
    pub fn followers_of(&self, user: UserId) -> &[UserId] {
        match self.index.get(&user) {
            Some(&i) => {
                let i = i as usize;
                &self.followers[self.follower_offsets[i]..self.follower_offsets[i + 1]]
            }
            None => &[],
        }
    }

    /// Whether `follower` follows `followee`.
    pub fn follows(&self, follower: UserId, followee: UserId) -> bool {
        self.followees_of(follower).binary_search(&followee).is_ok()
    }

    /// Every user incident to at least one edge, sorted ascending.
    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn edge_count(&self) -> usize {
        self.followees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.followees.is_empty()
    }

    /// All `(follower, followee)` edges in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (UserId, UserId)> + '_ {
        self.users.iter().enumerate().flat_map(move |(i, &u)| {
            self.followees[self.followee_offsets[i]..self.followee_offsets[i + 1]].iter().map(move |&v| (u, v))
        })
    }
}

fn offsets(n: usize, sources: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut offsets = vec![0usize; n + 1];
    for s in sources {
        offsets[s + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    offsets
}
