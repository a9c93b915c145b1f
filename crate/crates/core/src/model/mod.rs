//! Core domain types shared by every stage of the pipeline.
//!
//! Nothing in here does I/O. Events are plain values; the follower graph is
//! built once and then only read.

mod graph;

use std::fmt;
use std::str::FromStr;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

pub use graph::FollowerGraph;

/// Milliseconds since the Unix epoch.
pub type Millis = i64;

pub const MINUTE_MS: Millis = 60_000;
pub const HOUR_MS: Millis = 60 * MINUTE_MS;

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }

        impl From<u64> for $name {
            fn from(v: u64) -> Self {
                $name(v)
            }
        }
    };
}

id_newtype!(
    /// One account. Stable for the lifetime of a run.
    UserId
);
id_newtype!(
    /// An original (source) post.
    PostId
);
id_newtype!(
    /// A plain repost of some source post.
    RepostId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostEvent {
    pub post_id: PostId,
    pub author: UserId,
    pub timestamp: Millis,
    pub is_official: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepostEvent {
    pub repost_id: RepostId,
    pub reposter: UserId,
    pub source_post_id: PostId,
    pub timestamp: Millis,
}

/// Six quantile bins of the hg index, ordered from `Low` to `VeryHigh`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfluenceCategory {
    Low,
    LowerMid,
    Mid,
    UpperMid,
    High,
    VeryHigh,
}

impl InfluenceCategory {
    pub const ALL: [InfluenceCategory; 6] = [
        InfluenceCategory::Low,
        InfluenceCategory::LowerMid,
        InfluenceCategory::Mid,
        InfluenceCategory::UpperMid,
        InfluenceCategory::High,
        InfluenceCategory::VeryHigh,
    ];

    /// 0 for `Low` up to 5 for `VeryHigh`.
    pub fn rank(self) -> usize {
        self as usize
    }

    pub fn from_rank(rank: usize) -> Option<Self> {
        Self::ALL.get(rank).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InfluenceCategory::Low => "low",
            InfluenceCategory::LowerMid => "lower_mid",
            InfluenceCategory::Mid => "mid",
            InfluenceCategory::UpperMid => "upper_mid",
            InfluenceCategory::High => "high",
            InfluenceCategory::VeryHigh => "very_high",
        }
    }
}

impl fmt::Display for InfluenceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InfluenceCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.iter().copied().find(|c| c.as_str() == s).ok_or_else(|| format!("unknown influence category `{s}`"))
    }
}

/// A half-open interval `[start_offset, end_offset)` measured from the root
/// post's timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    start_offset: Millis,
    end_offset: Millis,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum WindowError {
    #[error("window offsets must satisfy 0 <= start < end, got [{0}, {1})")]
    Invalid(Millis, Millis),
    #[error("unrecognised window `{0}` (expected 30m, 1h, 3h, 6h, 24h or a millisecond count)")]
    Unparseable(String),
}

impl TimeWindow {
    pub fn new(start_offset: Millis, end_offset: Millis) -> Result<Self, WindowError> {
        if start_offset < 0 || start_offset >= end_offset {
            return Err(WindowError::Invalid(start_offset, end_offset));
        }
        Ok(TimeWindow { start_offset, end_offset })
    }

    /// `[0, len)`.
    pub fn first(len: Millis) -> Result<Self, WindowError> {
        Self::new(0, len)
    }

    /// Every non-negative offset.
    pub fn unbounded() -> Self {
        TimeWindow { start_offset: 0, end_offset: Millis::MAX }
    }

    pub fn minutes_30() -> Self {
        TimeWindow { start_offset: 0, end_offset: 30 * MINUTE_MS }
    }

    pub fn hours(h: i64) -> Self {
        assert!(h > 0);
        TimeWindow { start_offset: 0, end_offset: h * HOUR_MS }
    }

    pub fn start_offset(&self) -> Millis {
        self.start_offset
    }

    pub fn end_offset(&self) -> Millis {
        self.end_offset
    }

    pub fn contains(&self, elapsed: Millis) -> bool {
        elapsed >= self.start_offset && elapsed < self.end_offset
    }
}

impl FromStr for TimeWindow {
    type Err = WindowError;

    /// Presets `30m`, `1h`, `3h`, `6h`, `24h`; otherwise a plain millisecond
    /// length, or `start..end` in milliseconds.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "30m" => return Ok(Self::minutes_30()),
            "1h" => return Ok(Self::hours(1)),
            "3h" => return Ok(Self::hours(3)),
            "6h" => return Ok(Self::hours(6)),
            "24h" => return Ok(Self::hours(24)),
            _ => {}
        }
        let bad = || WindowError::Unparseable(s.to_string());
        if let Some((a, b)) = s.split_once("..") {
            let a = a.trim().parse::<Millis>().map_err(|_| bad())?;
            let b = b.trim().parse::<Millis>().map_err(|_| bad())?;
            return Self::new(a, b);
        }
        let len = s.trim_end_matches("ms").parse::<Millis>().map_err(|_| bad())?;
        Self::first(len)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationIssue {
    DuplicatePostId(PostId),
    DuplicateRepostId(RepostId),
    NegativeTimestamp { post_id: PostId },
    DanglingSource { repost_id: RepostId, source: PostId },
    TimeInversion { repost_id: RepostId, repost_ts: Millis, source_ts: Millis },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::DuplicatePostId(id) => write!(f, "duplicate post id {id}"),
            ValidationIssue::DuplicateRepostId(id) => write!(f, "duplicate repost id {id}"),
            ValidationIssue::NegativeTimestamp { post_id } => {
                write!(f, "post {post_id} has a negative timestamp")
            }
            ValidationIssue::DanglingSource { repost_id, source } => {
                write!(f, "repost {repost_id} references unknown post {source}")
            }
            ValidationIssue::TimeInversion { repost_id, repost_ts, source_ts } => {
                write!(f, "repost {repost_id} at {repost_ts} precedes its source post at {source_ts}")
            }
        }
    }
}

/// Everything wrong with an event stream. Empty means accepted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_accepted(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn dangling(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues.iter().filter(|i| matches!(i, ValidationIssue::DanglingSource { .. }))
    }

    pub fn inversions(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues.iter().filter(|i| matches!(i, ValidationIssue::TimeInversion { .. }))
    }
}

pub fn validate_event_stream(posts: &[PostEvent], reposts: &[RepostEvent]) -> ValidationReport {
    let mut issues = Vec::new();
    let mut post_ts: FxHashMap<PostId, Millis> = FxHashMap::default();
    for p in posts {
        if post_ts.insert(p.post_id, p.timestamp).is_some() {
            issues.push(ValidationIssue::DuplicatePostId(p.post_id));
        }
        if p.timestamp < 0 {
            issues.push(ValidationIssue::NegativeTimestamp { post_id: p.post_id });
        }
    }
    let mut seen: FxHashSet<RepostId> = FxHashSet::default();
    for r in reposts {
        if !seen.insert(r.repost_id) {
            issues.push(ValidationIssue::DuplicateRepostId(r.repost_id));
        }
        match post_ts.get(&r.source_post_id) {
            None => issues.push(ValidationIssue::DanglingSource { repost_id: r.repost_id, source: r.source_post_id }),
            Some(&ts) if r.timestamp < ts => issues.push(ValidationIssue::TimeInversion {
                repost_id: r.repost_id,
                repost_ts: r.timestamp,
                source_ts: ts,
            }),
            Some(_) => {}
        }
    }
    ValidationReport { issues }
}
