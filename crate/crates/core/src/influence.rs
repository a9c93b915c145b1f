//! hg index influence scores and six-way quantile categories.
//!
//! A user's posts are ranked by how often they were reposted. `h` is the
//! largest rank whose post has at least that many reposts, `g` the largest
//! rank whose prefix sums to at least its square, and `hg = sqrt(h * g)`.
//! `g` never exceeds the number of posts the user authored.

use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::model::{InfluenceCategory, PostEvent, PostId, RepostEvent, UserId};
use crate::par_map;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InfluenceError {
    #[error("repost counts must be sorted descending (violated at position {0})")]
    Unsorted(usize),
    #[error("cannot assign influence categories to an empty population")]
    Empty,
}

fn check_sorted(counts: &[u64]) -> Result<(), InfluenceError> {
    match counts.windows(2).position(|w| w[0] < w[1]) {
        Some(i) => Err(InfluenceError::Unsorted(i + 1)),
        None => Ok(()),
    }
}

/// Largest `h` such that `counts[h-1] >= h`.
pub fn h_index(counts: &[u64]) -> Result<u64, InfluenceError> {
    check_sorted(counts)?;
    Ok(counts.iter().enumerate().take_while(|&(i, &c)| c > i as u64).count() as u64)
}

/// Largest `g <= counts.len()` such that the top `g` counts sum to `>= g^2`.
pub fn g_index(counts: &[u64]) -> Result<u64, InfluenceError> {
    check_sorted(counts)?;
    // sum(g) - g^2 is concave in g for descending input, so the feasible set
    // is a prefix of 0..=n and a forward scan finds its end.
    let mut sum: u128 = 0;
    let mut g = 0u64;
    for (i, &c) in counts.iter().enumerate() {
        sum += c as u128;
        let k = i as u128 + 1;
        if sum >= k * k {
            g = k as u64;
        } else {
            break;
        }
    }
    Ok(g)
}

pub fn hg_index(h: u64, g: u64) -> f64 {
    ((h as u128 * g as u128) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfluenceScore {
    pub h: u64,
    pub g: u64,
    pub hg: f64,
    pub category: InfluenceCategory,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InfluenceTable {
    entries: FxHashMap<UserId, InfluenceScore>,
}

impl InfluenceTable {
    pub fn get(&self, user: UserId) -> Option<&InfluenceScore> {
        self.entries.get(&user)
    }

    pub fn category(&self, user: UserId) -> Option<InfluenceCategory> {
        self.entries.get(&user).map(|s| s.category)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rows ordered by user id.
    pub fn rows(&self) -> Vec<(UserId, InfluenceScore)> {
        let mut rows: Vec<_> = self.entries.iter().map(|(&u, &s)| (u, s)).collect();
        rows.sort_unstable_by_key(|(u, _)| *u);
        rows
    }

    /// Population of each category, indexed by [`InfluenceCategory::rank`].
    pub fn category_counts(&self) -> [usize; 6] {
        let mut counts = [0; 6];
        for s in self.entries.values() {
            counts[s.category.rank()] += 1;
        }
        counts
    }

    /// A table with only categories set, for callers that classify users
    /// some other way (e.g. generator tiers).
    pub fn from_categories(cats: impl IntoIterator<Item = (UserId, InfluenceCategory)>) -> Self {
        InfluenceTable {
            entries: cats
                .into_iter()
                .map(|(u, category)| (u, InfluenceScore { h: 0, g: 0, hg: 0.0, category }))
                .collect(),
        }
    }
}

/// Cumulative population fractions (percent) closing each band, from the
/// top: very_high, high, upper_mid, mid, lower_mid. Everything below is low.
const BAND_PERCENT: [u64; 5] = [1, 5, 10, 30, 50];
const BAND_CATEGORY: [InfluenceCategory; 5] = [
    InfluenceCategory::VeryHigh,
    InfluenceCategory::High,
    InfluenceCategory::UpperMid,
    InfluenceCategory::Mid,
    InfluenceCategory::LowerMid,
];

fn category_for_rank(rank: usize, cutoffs: &[usize; 5]) -> InfluenceCategory {
    cutoffs.iter().zip(BAND_CATEGORY).find(|(&k, _)| rank <= k).map(|(_, c)| c).unwrap_or(InfluenceCategory::Low)
}

/// Quantile-bins users by score.
///
/// Users are ranked by score descending, id ascending. A band at fraction
/// `p` takes ranks `1..=ceil(n * p)`. A group of tied scores is placed by
/// its lowest-ranked member, so ties straddling a boundary fall into the
/// lower band.
pub fn assign_categories(scores: &[(UserId, f64)]) -> Result<Vec<(UserId, InfluenceCategory)>, InfluenceError> {
    if scores.is_empty() {
        return Err(InfluenceError::Empty);
    }
    let n = scores.len();
    let cutoffs = BAND_PERCENT.map(|pct| ((n as u64 * pct).div_ceil(100)) as usize);

    let mut ranked: Vec<(UserId, f64)> = scores.to_vec();
    ranked.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && ranked[end].1 == ranked[start].1 {
            end += 1;
        }
        // 1-based rank of the last member of the tie group is `end`
        let category = category_for_rank(end, &cutoffs);
        out.extend(ranked[start..end].iter().map(|&(u, _)| (u, category)));
        start = end;
    }
    out.sort_unstable_by_key(|(u, _)| *u);
    Ok(out)
}

/// Repost counts of each author's posts, sorted descending.
pub fn repost_counts_by_author(posts: &[PostEvent], reposts: &[RepostEvent]) -> FxHashMap<UserId, Vec<u64>> {
    let mut per_post: FxHashMap<PostId, u64> = FxHashMap::default();
    for r in reposts {
        *per_post.entry(r.source_post_id).or_default() += 1;
    }
    let mut by_author: FxHashMap<UserId, Vec<u64>> = FxHashMap::default();
    for p in posts {
        by_author.entry(p.author).or_default().push(per_post.get(&p.post_id).copied().unwrap_or(0));
    }
    for counts in by_author.values_mut() {
        counts.sort_unstable_by(|a, b| b.cmp(a));
    }
    by_author
}

/// Scores every user in `population` (users without posts score zero) and
/// assigns categories over the whole population.
pub fn compute_influence(
    posts: &[PostEvent],
    reposts: &[RepostEvent],
    population: &[UserId],
) -> Result<InfluenceTable, InfluenceError> {
    let counts = repost_counts_by_author(posts, reposts);
    let empty = Vec::new();
    let hg: Vec<(UserId, u64, u64)> = par_map(population, |&u| {
        let c = counts.get(&u).unwrap_or(&empty);
        // sorted above, so these cannot fail
        let h = h_index(c).unwrap_or(0);
        let g = g_index(c).unwrap_or(0);
        (u, h, g)
    });
    let scores: Vec<(UserId, f64)> = hg.iter().map(|&(u, h, g)| (u, hg_index(h, g))).collect();
    let cats: FxHashMap<UserId, InfluenceCategory> = assign_categories(&scores)?.into_iter().collect();
    let entries = hg
        .into_iter()
        .map(|(u, h, g)| {
            let score = InfluenceScore { h, g, hg: hg_index(h, g), category: cats[&u] };
            (u, score)
        })
        .collect();
    Ok(InfluenceTable { entries })
}
