//! Repost cascade reconstruction, virtual timelines and secondary-spread
//! metrics for social-media event logs.
//!
//! The stages mirror the data flow:
//!
//! 1. [`ingest`] reads posts, reposts, users and the follower graph.
//! 2. [`influence`] scores authors with the hg index and bins them into six
//!    [`InfluenceCategory`] levels.
//! 3. [`cascade`] turns the reposts of each source post into a tree using
//!    the temporally-closest-parent rule.
//! 4. [`timeline`] replays followee reposts into per-user virtual timelines
//!    and marks which views led to a repost.
//! 5. [`metrics`] aggregates views into cascading repost probabilities,
//!    view/repost shares and repost-behaviour skew.
//! 6. [`regress`] samples and featurizes a case-control dataset for an
//!    external mixed-effects logistic regression.
//!
//! [`synth`] generates follower graphs and event streams from a
//! prestige-biased diffusion model, with ground truth for every repost.

pub mod cascade;
pub mod influence;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod regress;
pub mod synth;
pub mod timeline;

pub use model::{
    FollowerGraph, InfluenceCategory, Millis, PostEvent, PostId, RepostEvent, RepostId, TimeWindow, UserId,
};

#[cfg(feature = "parallel")]
pub(crate) fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Folds `items` in parallel into per-worker accumulators, then merges them.
/// Callers must supply a commutative, associative `merge` so the result does
/// not depend on how the work was split.
#[cfg(feature = "parallel")]
pub(crate) fn par_fold<T, A, I, F, M>(items: &[T], init: I, fold: F, merge: M) -> A
where
    T: Sync,
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(A, &T) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().fold(&init, fold).reduce(&init, merge)
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_fold<T, A, I, F, M>(items: &[T], init: I, fold: F, _merge: M) -> A
where
    I: Fn() -> A,
    F: Fn(A, &T) -> A,
    M: Fn(A, A) -> A,
{
    items.iter().fold(init(), fold)
}
