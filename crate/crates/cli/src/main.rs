use std::process::ExitCode;

use cascadeflow_cli::args::{Cli, Command};
use cascadeflow_cli::pipeline::{execute, synth, with_workers, Stage};
use cascadeflow_cli::CliError;
use clap::Parser;

fn dispatch(command: Command) -> Result<(), CliError> {
    let (stage, cfg) = match command {
        Command::Synth(args) => {
            let cfg = args.resolve()?;
            let out = args.out.clone().unwrap_or_else(|| "synth".into());
            return with_workers(args.workers, || synth(&cfg, &out))?;
        }
        Command::IngestCheck(c) => (Stage::IngestCheck, c.resolve()?),
        Command::Influence(c) => (Stage::Influence, c.resolve()?),
        Command::Cascades(c) => (Stage::Cascades, c.resolve()?),
        Command::Timeline(c) => (Stage::Timeline, c.resolve()?),
        Command::Crp(c) => (Stage::Crp, c.resolve()?),
        Command::Shares(c) => (Stage::Shares, c.resolve()?),
        Command::Behavior(c) => (Stage::Behavior, c.resolve()?),
        Command::Virality(c) => (Stage::Virality, c.resolve()?),
        Command::SampleRegression(a) => (Stage::SampleRegression, a.resolve()?),
        Command::Run(a) => (Stage::Run, a.resolve()?),
    };
    with_workers(cfg.workers, || execute(stage, &cfg))?
}

/// Peak resident set size in KiB, where the platform reports it.
fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CASCADEFLOW_LOG", "warn")).init();
    let cli = Cli::parse();
    let started = std::time::Instant::now();
    let result = dispatch(cli.command);
    if let Some(kib) = peak_rss_kib() {
        log::info!("finished in {:.2} s, peak resident memory {kib} KiB", started.elapsed().as_secs_f64());
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
