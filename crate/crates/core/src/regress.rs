//! Case-control sampling and feature coding for a repost regression dataset.
//!
//! Positives (views that led to a repost) are thinned at a fixed rate.
//! Negatives are drawn only from posts and viewers that survive among the
//! positives, then cut down to a fixed multiple of the positive count. Every
//! keep/drop decision is a hash of the seed and the record, so the sample
//! does not depend on input order or partitioning.

use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::influence::InfluenceTable;
use crate::ingest::UserDirectory;
use crate::model::{FollowerGraph, InfluenceCategory, Millis, PostId, UserId, HOUR_MS};
use crate::timeline::ExposureRecord;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegressError {
    #[error("positive rate must be in (0, 1], got {0}")]
    BadRate(f64),
    #[error("negative multiplier must be positive, got {0}")]
    BadMultiplier(f64),
    #[error("no positive cases retained at rate {0}; try a larger rate")]
    NoPositives(f64),
    #[error("invalid hour bins: {0}")]
    BadBins(String),
}

fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn record_hash(seed: u64, salt: u64, e: &ExposureRecord) -> u64 {
    let mut h = mix(seed ^ salt);
    for part in [e.viewer.0, e.sender.0, e.root_post.0, e.sender_repost_id.0, e.exposure_time as u64] {
        h = mix(h ^ part);
    }
    h
}

/// Uniform in [0, 1) from the top 53 bits.
fn unit(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

const POSITIVE_SALT: u64 = 0x706f_7369;
const NEGATIVE_SALT: u64 = 0x6e65_6761;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Positives first, then negatives, each ordered by record.
    pub cases: Vec<(ExposureRecord, bool)>,
    pub positives: usize,
    pub negatives: usize,
    /// Negatives missing from the target because too few were eligible.
    pub shortfall: usize,
}

/// Draws the case-control sample from a materialized outcome list.
pub fn sample_cases(
    outcomes: &[(ExposureRecord, bool)],
    positive_rate: f64,
    negative_multiplier: f64,
    seed: u64,
) -> Result<Sample, RegressError> {
    sample_cases_with(
        |f: &mut dyn FnMut(&ExposureRecord, bool)| {
            for (e, r) in outcomes {
                f(e, *r);
            }
        },
        positive_rate,
        negative_multiplier,
        seed,
    )
}

/// Draws the case-control sample from a replayable stream. `scan` is called
/// twice and must feed the same records both times; memory stays
/// proportional to the sample, not the stream.
pub fn sample_cases_with<S>(
    mut scan: S,
    positive_rate: f64,
    negative_multiplier: f64,
    seed: u64,
) -> Result<Sample, RegressError>
where
    S: FnMut(&mut dyn FnMut(&ExposureRecord, bool)),
{
    if !(positive_rate > 0.0 && positive_rate <= 1.0) {
        return Err(RegressError::BadRate(positive_rate));
    }
    if !(negative_multiplier > 0.0 && negative_multiplier.is_finite()) {
        return Err(RegressError::BadMultiplier(negative_multiplier));
    }

    let mut positives: Vec<ExposureRecord> = Vec::new();
    scan(&mut |e, r| {
        if r && unit(record_hash(seed, POSITIVE_SALT, e)) < positive_rate {
            positives.push(*e);
        }
    });
    if positives.is_empty() {
        return Err(RegressError::NoPositives(positive_rate));
    }
    positives.sort_unstable();
    positives.dedup();

    let roots: FxHashSet<PostId> = positives.iter().map(|e| e.root_post).collect();
    let viewers: FxHashSet<UserId> = positives.iter().map(|e| e.viewer).collect();
    let target = (negative_multiplier * positives.len() as f64).ceil() as usize;
    // the `target` eligible negatives with the smallest hashes: a uniform
    // subsample that no partitioning of the stream can change
    let mut kept: BinaryHeap<(u64, ExposureRecord)> = BinaryHeap::with_capacity(target + 1);
    let mut eligible = 0usize;
    scan(&mut |e, r| {
        if r || !roots.contains(&e.root_post) || !viewers.contains(&e.viewer) {
            return;
        }
        eligible += 1;
        let h = record_hash(seed, NEGATIVE_SALT, e);
        if kept.len() < target {
            kept.push((h, *e));
        } else if kept.peek().is_some_and(|top| (h, *e) < *top) {
            kept.pop();
            kept.push((h, *e));
        }
    });
    let shortfall = target - kept.len();
    if shortfall > 0 {
        log::warn!("only {eligible} eligible negatives for a target of {target}; emitting all of them");
    }
    let mut negatives: Vec<ExposureRecord> = kept.into_iter().map(|(_, e)| e).collect();
    negatives.sort_unstable();

    let (p, n) = (positives.len(), negatives.len());
    let cases = positives.into_iter().map(|e| (e, true)).chain(negatives.into_iter().map(|e| (e, false))).collect();
    Ok(Sample { cases, positives: p, negatives: n, shortfall })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepostHour {
    Morning,
    Noon,
    Night,
    Midnight,
}

impl RepostHour {
    pub const ALL: [RepostHour; 4] = [RepostHour::Morning, RepostHour::Noon, RepostHour::Night, RepostHour::Midnight];

    pub fn as_str(self) -> &'static str {
        match self {
            RepostHour::Morning => "morning",
            RepostHour::Noon => "noon",
            RepostHour::Night => "night",
            RepostHour::Midnight => "midnight",
        }
    }
}

impl fmt::Display for RepostHour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Local-time hour bins. Each bin runs from its start hour up to the next
/// bin's start, wrapping at midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HourBins {
    pub utc_offset_minutes: i32,
    /// Start hours of morning, noon, night and midnight, in that order.
    pub starts: [u8; 4],
}

impl Default for HourBins {
    fn default() -> Self {
        HourBins { utc_offset_minutes: 9 * 60, starts: [6, 12, 18, 0] }
    }
}

impl HourBins {
    pub fn new(utc_offset_minutes: i32, starts: [u8; 4]) -> Result<Self, RegressError> {
        if utc_offset_minutes.abs() > 14 * 60 {
            return Err(RegressError::BadBins(format!("UTC offset {utc_offset_minutes} min is out of range")));
        }
        if starts.iter().any(|&h| h > 23) {
            return Err(RegressError::BadBins(format!("start hours {starts:?} must be 0..=23")));
        }
        // rotated so the earliest start comes first, the starts must climb
        let lo = (0..4).min_by_key(|&i| starts[i]).unwrap_or(0);
        let rotated: Vec<u8> = (0..4).map(|k| starts[(lo + k) % 4]).collect();
        if rotated.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RegressError::BadBins(format!("start hours {starts:?} must be distinct and in cyclic order")));
        }
        Ok(HourBins { utc_offset_minutes, starts })
    }

    pub fn local_hour(&self, utc_ms: Millis) -> u8 {
        let local = utc_ms + self.utc_offset_minutes as Millis * 60_000;
        (local.rem_euclid(24 * HOUR_MS) / HOUR_MS) as u8
    }

    pub fn bin_of_hour(&self, hour: u8) -> RepostHour {
        // the bin whose start is the latest one at or before `hour`, cyclically
        let back = |i: usize| (hour as i32 - self.starts[i] as i32).rem_euclid(24);
        let i = (0..4).min_by_key(|&i| back(i)).unwrap_or(0);
        RepostHour::ALL[i]
    }

    pub fn bin(&self, utc_ms: Millis) -> RepostHour {
        self.bin_of_hour(self.local_hour(utc_ms))
    }
}

impl FromStr for HourBins {
    type Err = RegressError;

    /// `"+09:00"` style offset, optionally followed by `;6,12,18,0`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RegressError::BadBins(format!("cannot parse {s:?}"));
        let (offset, starts) = match s.split_once(';') {
            Some((o, st)) => (o, Some(st)),
            None => (s, None),
        };
        let offset = offset.trim();
        let (sign, rest) = match offset.as_bytes().first() {
            Some(b'+') => (1, &offset[1..]),
            Some(b'-') => (-1, &offset[1..]),
            _ => return Err(bad()),
        };
        let (h, m) = rest.split_once(':').unwrap_or((rest, "0"));
        let h: i32 = h.parse().map_err(|_| bad())?;
        let m: i32 = m.parse().map_err(|_| bad())?;
        let starts = match starts {
            None => HourBins::default().starts,
            Some(st) => {
                let v: Vec<u8> =
                    st.split(',').map(|x| x.trim().parse::<u8>()).collect::<Result<_, _>>().map_err(|_| bad())?;
                v.try_into().map_err(|_| bad())?
            }
        };
        HourBins::new(sign * (h * 60 + m), starts)
    }
}

/// Population moments of a standardized column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
}

impl Moments {
    pub fn of(values: &[f64]) -> Moments {
        if values.is_empty() {
            return Moments { mean: 0.0, sd: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let mut sd = var.sqrt();
        // identical inputs can leave rounding residue in the mean
        if sd <= 8.0 * f64::EPSILON * mean.abs().max(1.0) {
            sd = 0.0;
        }
        Moments { mean, sd }
    }

    /// Zero spread maps everything to 0.
    pub fn z(&self, x: f64) -> f64 {
        if self.sd > 0.0 {
            (x - self.mean) / self.sd
        } else {
            0.0
        }
    }

    pub fn unscale(&self, z: f64) -> f64 {
        self.mean + z * self.sd
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionRow {
    pub is_retweeted: u8,
    pub sender_influence: InfluenceCategory,
    pub repost_hour: RepostHour,
    pub sender_followers_log_z: f64,
    pub user_followers_log_z: f64,
    pub source_tweet_id: PostId,
    pub user_topic: Option<String>,
    pub viewer: UserId,
    pub sender: UserId,
}

impl RegressionRow {
    pub const HEADER: [&'static str; 9] = [
        "is_retweeted",
        "sender_influence",
        "repost_hour",
        "sender_followers_log_z",
        "user_followers_log_z",
        "source_tweet_id",
        "user_topic",
        "viewer",
        "sender",
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub struct Featurized {
    pub rows: Vec<RegressionRow>,
    pub sender_moments: Moments,
    pub user_moments: Moments,
    /// Cases dropped because a viewer or sender had no follower count.
    pub dropped_missing_user: usize,
    /// Cases dropped because the sender had no influence category.
    pub dropped_unclassified: usize,
}

/// Codes sampled cases as regression rows. Follower features are
/// `ln(1 + count)` standardized over the rows actually emitted.
pub fn featurize(
    cases: &[(ExposureRecord, bool)],
    influence: &InfluenceTable,
    directory: &UserDirectory,
    graph: &FollowerGraph,
    bins: &HourBins,
) -> Featurized {
    let mut kept = Vec::with_capacity(cases.len());
    let (mut dropped_missing_user, mut dropped_unclassified) = (0, 0);
    for (e, r) in cases {
        let (Some(sf), Some(uf)) =
            (directory.follower_count(e.sender, graph), directory.follower_count(e.viewer, graph))
        else {
            log::debug!("no follower count for viewer {} or sender {}", e.viewer, e.sender);
            dropped_missing_user += 1;
            continue;
        };
        let Some(cat) = influence.category(e.sender) else {
            dropped_unclassified += 1;
            continue;
        };
        kept.push((e, *r, cat, (sf as f64).ln_1p(), (uf as f64).ln_1p()));
    }
    let sender_moments = Moments::of(&kept.iter().map(|k| k.3).collect::<Vec<_>>());
    let user_moments = Moments::of(&kept.iter().map(|k| k.4).collect::<Vec<_>>());
    let rows = kept
        .into_iter()
        .map(|(e, r, cat, s, u)| RegressionRow {
            is_retweeted: u8::from(r),
            sender_influence: cat,
            repost_hour: bins.bin(e.exposure_time),
            sender_followers_log_z: sender_moments.z(s),
            user_followers_log_z: user_moments.z(u),
            source_tweet_id: e.root_post,
            user_topic: directory.topic(e.viewer).map(str::to_owned),
            viewer: e.viewer,
            sender: e.sender,
        })
        .collect();
    Featurized { rows, sender_moments, user_moments, dropped_missing_user, dropped_unclassified }
}
