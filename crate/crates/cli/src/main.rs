//! `hedgelab` command line: one training subcommand per experiment, the
//! untrained baselines, and evaluation/comparison/export over saved runs.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime failure
//! (divergence, bad data), 3 I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hedgelab::config::{iter_pairs, ENV_PREFIX};
use hedgelab::runner::{self, COMPARISON_FILE};
use hedgelab::{Error, ExperimentConfig, ExperimentMode, Result};

#[derive(Parser)]
#[command(name = "hedgelab", version, about = "Market-making reinforcement-learning laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags shared by the training and baseline subcommands. Precedence, lowest
/// first: mode preset, config file, `HEDGELAB_*` environment variables,
/// `--set` overrides, then the dedicated flags.
#[derive(Args)]
struct RunFlags {
    /// Plain-text key=value config file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Training epochs.
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
    /// Run directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Evaluation episode count.
    #[arg(long, value_name = "N")]
    episodes: Option<usize>,
    /// Per-key override, e.g. --set market.sigma=0.02. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the single-asset hedger (hedge action only).
    TrainSingle(RunFlags),
    /// Train the hedger with client-quote skew.
    TrainSkew(RunFlags),
    /// Train the price-of-risk model (skew with non-elastic flow).
    TrainPriceOfRisk(RunFlags),
    /// Train the two-asset portfolio hedger.
    TrainPortfolio(RunFlags),
    /// Evaluate an untrained baseline: the flatten heuristic by default,
    /// uniform-random actions with --set mode=random.
    RunDummy(RunFlags),
    /// Evaluate a checkpoint over fresh episodes; prints a JSON summary.
    Eval {
        checkpoint: PathBuf,
        /// Evaluation episode count.
        #[arg(long, value_name = "N", default_value_t = 50)]
        episodes: usize,
        /// Evaluation seed.
        #[arg(long, value_name = "N", default_value_t = 0)]
        seed: u64,
    },
    /// Run two checkpoints on shared-seed market data; writes comparison.csv.
    Compare {
        checkpoint_a: PathBuf,
        checkpoint_b: PathBuf,
        /// Shared-seed episodes, one per seed.
        #[arg(long, value_name = "N", default_value_t = 20)]
        episodes: usize,
        /// Base seed for the shared realizations.
        #[arg(long, value_name = "N", default_value_t = 0)]
        seed: u64,
        /// Directory for comparison.csv.
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
    },
    /// Render dashboard.svg from a run directory's episode.csv.
    Export { run_dir: PathBuf },
}

fn parse_sets(raw: &[String]) -> Result<Vec<(String, String)>> {
    raw.iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Config(format!("--set expects key=value, got '{s}'")))
        })
        .collect()
}

/// Build the config for a run subcommand. `default_mode` applies only when
/// no source sets a mode; the resolved mode must be in `allowed`.
fn resolve_config(
    default_mode: ExperimentMode,
    allowed: &[ExperimentMode],
    flags: &RunFlags,
) -> Result<ExperimentConfig> {
    let mut sets = parse_sets(&flags.set)?;
    let env_vars: Vec<(String, String)> = std::env::vars().collect();
    let mode_key = format!("{ENV_PREFIX}MODE");
    let mode_mentioned = sets.iter().any(|(k, _)| k == "mode")
        || env_vars.iter().any(|(k, _)| *k == mode_key)
        || match &flags.config {
            Some(p) => {
                iter_pairs(&std::fs::read_to_string(p)?)?.iter().any(|(k, _)| k == "mode")
            }
            None => false,
        };
    if !mode_mentioned {
        sets.insert(0, ("mode".into(), default_mode.to_string()));
    }
    let mut cfg =
        ExperimentConfig::from_sources(flags.config.as_deref(), env_vars.into_iter(), &sets)?;
    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    if let Some(epochs) = flags.epochs {
        cfg.hyper.epochs = epochs;
    }
    if let Some(out) = &flags.out {
        cfg.out_dir = out.clone();
    }
    if let Some(episodes) = flags.episodes {
        cfg.eval_episodes = episodes;
    }
    if !allowed.contains(&cfg.mode) {
        return Err(Error::Config(format!(
            "mode '{}' is not valid for this subcommand",
            cfg.mode
        )));
    }
    Ok(cfg)
}

fn run_subcommand(mode: ExperimentMode, allowed: &[ExperimentMode], flags: &RunFlags) -> Result<()> {
    let cfg = resolve_config(mode, allowed, flags)?;
    let artifacts = runner::run_training(&cfg)?;
    println!("run directory: {}", artifacts.dir.display());
    if let Some(ckpt) = &artifacts.checkpoint {
        println!("checkpoint: {}", ckpt.display());
    }
    Ok(())
}

fn run(cmd: Cmd) -> Result<()> {
    use ExperimentMode as M;
    match cmd {
        Cmd::TrainSingle(f) => run_subcommand(M::Single, &[M::Single], &f),
        Cmd::TrainSkew(f) => run_subcommand(M::Skew, &[M::Skew], &f),
        Cmd::TrainPriceOfRisk(f) => run_subcommand(M::PriceOfRisk, &[M::PriceOfRisk], &f),
        Cmd::TrainPortfolio(f) => run_subcommand(M::Portfolio, &[M::Portfolio], &f),
        Cmd::RunDummy(f) => run_subcommand(M::Dummy, &[M::Dummy, M::Random], &f),
        Cmd::Eval { checkpoint, episodes, seed } => {
            let summary = runner::evaluate(&checkpoint, episodes, seed)?;
            let text = serde_json::to_string_pretty(&summary)
                .map_err(|e| Error::Data(format!("summary serialization: {e}")))?;
            println!("{text}");
            Ok(())
        }
        Cmd::Compare { checkpoint_a, checkpoint_b, episodes, seed, out } => {
            let report = runner::compare(&checkpoint_a, &checkpoint_b, episodes, seed)?;
            std::fs::create_dir_all(&out)?;
            let path = out.join(COMPARISON_FILE);
            runner::write_comparison_csv(&path, &report)?;
            println!(
                "seeds: {}  sharpe wins a/b: {}/{}  reward wins a/b: {}/{}",
                report.rows.len(),
                report.sharpe_wins_a,
                report.sharpe_wins_b,
                report.reward_wins_a,
                report.reward_wins_b
            );
            println!("report: {}", path.display());
            Ok(())
        }
        Cmd::Export { run_dir } => {
            let svg = runner::export_run(&run_dir)?;
            println!("dashboard: {}", svg.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version go to stdout with exit 0; usage errors are exit 1
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
