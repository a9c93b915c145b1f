//! Run configuration: one JSON file, overridable from the command line.

use std::path::{Path, PathBuf};

use cascadeflow::ingest::{InputPaths, MalformedPolicy, OfficialAccountFilter};
use cascadeflow::metrics::PopularityBuckets;
use cascadeflow::model::{Millis, TimeWindow, HOUR_MS};
use cascadeflow::regress::HourBins;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub positive_rate: f64,
    #[serde(default = "default_multiplier")]
    pub negative_multiplier: f64,
}

fn default_multiplier() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Option<InputPaths>,
    pub official_keywords: Vec<String>,
    /// CRP windows, e.g. `"30m"`, `"24h"` or `"0..5000"` (milliseconds).
    pub windows: Vec<String>,
    pub popularity_thresholds: Vec<u64>,
    /// Size floor for the hourly CRP series and the share table.
    pub min_reposts: u64,
    /// Size floor, in reposts, for the first-reposter virality table.
    pub virality_min_reposts: u64,
    pub series_bucket_ms: Millis,
    pub series_horizon_ms: Millis,
    pub behavior_fractions: Vec<f64>,
    pub hour_bins: HourBins,
    pub sampling: Option<SamplingConfig>,
    /// Count a sender once per (viewer, post) when it reposted repeatedly.
    pub dedup_sender: bool,
    /// Abort on the first malformed input line instead of skipping it.
    pub fail_fast: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Also write nested JSON next to the CSV tables.
    pub json: bool,
    /// Thread count; results never depend on it, so it stays out of the
    /// manifest.
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: None,
            official_keywords: OfficialAccountFilter::default().keywords().to_vec(),
            windows: ["30m", "1h", "3h", "6h", "24h"].map(String::from).to_vec(),
            popularity_thresholds: PopularityBuckets::default().thresholds().to_vec(),
            min_reposts: 1_000,
            virality_min_reposts: 5_001,
            series_bucket_ms: HOUR_MS,
            series_horizon_ms: 24 * HOUR_MS,
            behavior_fractions: vec![0.001, 0.01, 0.1, 0.5],
            hour_bins: HourBins::default(),
            sampling: None,
            dedup_sender: false,
            fail_fast: false,
            seed: 0,
            out_dir: PathBuf::from("out"),
            json: false,
            workers: None,
        }
    }
}

/// Parsed, checked form of a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Settings {
    pub inputs: InputPaths,
    pub filter: OfficialAccountFilter,
    pub policy: MalformedPolicy,
    pub windows: Vec<TimeWindow>,
    pub buckets: PopularityBuckets,
}

impl RunConfig {
    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::MissingInput { path: path.to_path_buf(), source })?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(inputs) = &mut cfg.inputs {
            rebase(&mut inputs.posts);
            rebase(&mut inputs.reposts);
            rebase(&mut inputs.follower_graph);
            if let Some(u) = &mut inputs.users {
                rebase(u);
            }
        }
        rebase(&mut cfg.out_dir);
        Ok(cfg)
    }

    pub fn settings(&self) -> Result<Settings, CliError> {
        let invalid = |m: String| Err(CliError::Invalid(m));
        let Some(inputs) = self.inputs.clone() else {
            return invalid("no input paths given (config `inputs` or --posts/--reposts/--graph)".into());
        };
        if self.windows.is_empty() {
            return invalid("at least one window is required".into());
        }
        let windows = self
            .windows
            .iter()
            .map(|w| w.parse::<TimeWindow>().map_err(|e| CliError::Invalid(format!("window {w:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if self.popularity_thresholds.is_empty() || self.popularity_thresholds.contains(&0) {
            return invalid("popularity thresholds must be a non-empty list of positive sizes".into());
        }
        if self.series_bucket_ms <= 0
            || self.series_horizon_ms <= 0
            || self.series_horizon_ms % self.series_bucket_ms != 0
        {
            return invalid(format!(
                "series bucket {} ms must be positive and divide the horizon {} ms",
                self.series_bucket_ms, self.series_horizon_ms
            ));
        }
        if let Some(f) = self.behavior_fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
            return invalid(format!("behavior fraction {f} is outside (0, 1]"));
        }
        HourBins::new(self.hour_bins.utc_offset_minutes, self.hour_bins.starts)
            .map_err(|e| CliError::Invalid(e.to_string()))?;
        if let Some(s) = &self.sampling {
            if !(s.positive_rate > 0.0 && s.positive_rate <= 1.0) {
                return invalid(format!("positive rate {} is outside (0, 1]", s.positive_rate));
            }
            if !(s.negative_multiplier > 0.0 && s.negative_multiplier.is_finite()) {
                return invalid(format!("negative multiplier {} must be positive", s.negative_multiplier));
            }
        }
        if self.workers == Some(0) {
            return invalid("--workers must be at least 1".into());
        }
        Ok(Settings {
            inputs,
            filter: OfficialAccountFilter::new(&self.official_keywords),
            policy: if self.fail_fast { MalformedPolicy::FailFast } else { MalformedPolicy::SkipAndLog },
            windows,
            buckets: PopularityBuckets::new(self.popularity_thresholds.clone()),
        })
    }
}
