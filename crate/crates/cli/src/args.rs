//! Command-line flags. Every flag overrides the matching config field.

use std::path::PathBuf;

use cascadeflow::ingest::InputPaths;
use cascadeflow::regress::HourBins;
use cascadeflow::synth::SynthConfig;
use clap::{Args, Parser, Subcommand};

use crate::config::{RunConfig, SamplingConfig};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "cascadeflow", version, about = "Repost cascades, virtual timelines and influence metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate the inputs; exits 3 if anything is wrong.
    IngestCheck(Common),
    /// hg-index scores and categories: influence.csv.
    Influence(Common),
    /// Reconstructed trees: cascades.csv and cascade_edges.csv.
    Cascades(Common),
    /// Every view on every virtual timeline: exposures.csv.
    Timeline(Common),
    /// Cascading repost probability tables: crp.csv, crp_timeseries.csv.
    Crp(Common),
    /// View and repost shares per category: shares.csv.
    Shares(Common),
    /// Skew of personal repost counts: behavior_share.csv, behavior_ccdf.csv.
    Behavior(Common),
    /// First-reposter subtree virality by category: virality.csv.
    Virality(Common),
    /// Case-control regression dataset: regression.csv plus a JSON sidecar.
    SampleRegression(SampleArgs),
    /// Generate a synthetic dataset with ground truth.
    Synth(SynthArgs),
    /// The whole pipeline except the per-view dump.
    Run(SampleArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CRP window: 30m, 1h, 3h, 6h, 24h, a length in ms, or START..END ms.
    /// Repeatable; replaces the configured list.
    #[arg(long = "window")]
    pub windows: Vec<String>,
    #[arg(long)]
    pub min_reposts: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write JSON versions of the tables.
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub posts: Option<PathBuf>,
    #[arg(long)]
    pub reposts: Option<PathBuf>,
    /// Follower graph CSV (`follower_id,followee_id`).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Optional user metadata NDJSON.
    #[arg(long)]
    pub users: Option<PathBuf>,
    /// Abort on the first malformed line.
    #[arg(long)]
    pub fail_fast: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Fraction of positive views to keep (required for sample-regression).
    #[arg(long)]
    pub rate: Option<f64>,
    /// Negatives drawn per positive.
    #[arg(long)]
    pub multiplier: Option<f64>,
    /// Local-time bins, e.g. `+09:00;6,12,18,0`.
    #[arg(long)]
    pub hour_bins: Option<HourBins>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SynthArgs {
    /// JSON generator configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_users: Option<usize>,
    #[arg(long)]
    pub max_followees: Option<usize>,
    #[arg(long)]
    pub n_roots: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub base_prob: Option<f64>,
    #[arg(long)]
    pub hidden_edge_fraction: Option<f64>,
    /// Output directory for the dataset.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    /// Config file (if any) with the flags applied on top.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if !self.windows.is_empty() {
            cfg.windows = self.windows.clone();
        }
        if let Some(m) = self.min_reposts {
            cfg.min_reposts = m;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        cfg.json |= self.json;
        cfg.fail_fast |= self.fail_fast;
        let any_input = self.posts.is_some() || self.reposts.is_some() || self.graph.is_some();
        if any_input || self.users.is_some() {
            let base = cfg.inputs.clone();
            let pick = |flag: &Option<PathBuf>, from: Option<PathBuf>, name: &str| {
                flag.clone()
                    .or(from)
                    .ok_or_else(|| CliError::Invalid(format!("--{name} is required with the other input flags")))
            };
            cfg.inputs = Some(InputPaths {
                posts: pick(&self.posts, base.as_ref().map(|b| b.posts.clone()), "posts")?,
                reposts: pick(&self.reposts, base.as_ref().map(|b| b.reposts.clone()), "reposts")?,
                follower_graph: pick(&self.graph, base.as_ref().map(|b| b.follower_graph.clone()), "graph")?,
                users: self.users.clone().or(base.and_then(|b| b.users)),
            });
        }
        Ok(cfg)
    }
}

impl SampleArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = self.common.resolve()?;
        if let Some(rate) = self.rate {
            let multiplier = self.multiplier.or(cfg.sampling.as_ref().map(|s| s.negative_multiplier)).unwrap_or(2.0);
            cfg.sampling = Some(SamplingConfig { positive_rate: rate, negative_multiplier: multiplier });
        } else if let (Some(m), Some(s)) = (self.multiplier, cfg.sampling.as_mut()) {
            s.negative_multiplier = m;
        }
        if let Some(b) = self.hour_bins {
            cfg.hour_bins = b;
        }
        Ok(cfg)
    }
}

impl SynthArgs {
    pub fn resolve(&self) -> Result<SynthConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|source| CliError::MissingInput { path: path.clone(), source })?;
                serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?
            }
            None => SynthConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.n_users {
            cfg.n_users = n;
        }
        if let Some(n) = self.max_followees {
            cfg.max_followees = n;
        }
        if let Some(n) = self.n_roots {
            cfg.n_roots = n;
        }
        if let Some(b) = self.beta {
            cfg.prestige_beta = b;
        }
        if let Some(p) = self.base_prob {
            cfg.base_repost_prob = p;
        }
        if let Some(h) = self.hidden_edge_fraction {
            cfg.hidden_edge_fraction = h;
        }
        cfg.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Command {
        Cli::try_parse_from(std::iter::once("cascadeflow").chain(args.iter().copied())).unwrap().command
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"seed": 3, "windows": ["1h"], "inputs": {"posts": "p", "reposts": "r", "follower_graph": "g"},
                "sampling": {"positive_rate": 0.5}}"#,
        )
        .unwrap();
        let Command::Run(a) = parse(&[
            "run",
            "--config",
            path.to_str().unwrap(),
            "--seed",
            "9",
            "--window",
            "30m",
            "--window",
            "0..5",
            "--graph",
            "/x/g.csv",
            "--multiplier",
            "3",
        ]) else {
            panic!()
        };
        let cfg = a.resolve().unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.windows, ["30m", "0..5"]);
        let inputs = cfg.inputs.unwrap();
        assert_eq!(inputs.follower_graph, PathBuf::from("/x/g.csv"));
        assert_eq!(inputs.posts, dir.path().join("p"));
        let s = cfg.sampling.unwrap();
        assert_eq!((s.positive_rate, s.negative_multiplier), (0.5, 3.0));
    }

    #[test]
    fn partial_inputs_need_the_rest() {
        let Command::Crp(c) = parse(&["crp", "--posts", "p.ndjson"]) else { panic!() };
        assert!(matches!(c.resolve(), Err(CliError::Invalid(_))));
    }

    #[test]
    fn synth_overrides_and_validates() {
        let Command::Synth(s) =
            parse(&["synth", "--n-users", "300", "--max-followees", "50", "--n-roots", "20", "--beta", "0"])
        else {
            panic!()
        };
        let cfg = s.resolve().unwrap();
        assert_eq!((cfg.n_users, cfg.n_roots, cfg.prestige_beta), (300, 20, 0.0));
        let Command::Synth(s) = parse(&["synth", "--base-prob", "1.5"]) else { panic!() };
        assert!(matches!(s.resolve(), Err(CliError::Invalid(_))));
    }
}
