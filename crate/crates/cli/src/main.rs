use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use mvprof::{run_experiment, ConfigMap, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(
    name = "mvprof",
    version,
    about = "Mean-variance portfolio experiments with estimated profitability"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Standard deviation of the two premium estimators over a dt x mu grid.
    Table1(Shared),
    /// Constant GBM campaign: terminal wealth and mean CP per path.
    Gbm(Shared),
    /// Heston campaign over the {iota, kappa} grid: CEQ, SR and TR tables.
    Heston(Shared),
    /// AP estimate trajectories next to the truth-fed estimate and true AP.
    ApTraces(Shared),
    /// Rolling one-year horizons over a `date,close` price file.
    Real {
        #[command(flatten)]
        shared: Shared,
        /// Price file with header `date,close`.
        #[arg(long)]
        prices: Option<PathBuf>,
        /// Close type recorded in the manifest (e.g. raw, adjusted).
        #[arg(long)]
        close_kind: Option<String>,
    },
}

#[derive(Args)]
struct Shared {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of simulated paths (repetitions for table1).
    #[arg(long)]
    paths: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated strategy tags: A, B, N, T, A+N.
    #[arg(long)]
    strategies: Option<String>,
    /// Also write per-step ledgers (steps.csv).
    #[arg(long)]
    keep_ledgers: bool,
    /// Override any configuration key, e.g. `--set gamma=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn resolve(
    kind: ExperimentKind,
    shared: &Shared,
    extra: &[(&str, Option<String>)],
) -> Result<ExperimentConfig> {
    let file = match &shared.config {
        Some(p) => ConfigMap::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ConfigMap::default(),
    };
    let mut cli = ConfigMap::default();
    for pair in &shared.overrides {
        cli.set_pair(pair)?;
    }
    let mut flags = vec![
        ("seed", shared.seed.map(|v| v.to_string())),
        ("paths", shared.paths.map(|v| v.to_string())),
        ("strategies", shared.strategies.clone()),
        (
            "keep_ledgers",
            shared.keep_ledgers.then(|| "true".to_string()),
        ),
    ];
    flags.extend(extra.iter().cloned());
    for (k, v) in flags {
        if let Some(v) = v {
            cli.set(k, v)?;
        }
    }
    Ok(ExperimentConfig::resolve(kind, &[&file, &cli])?)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let (kind, shared, extra) = match &cli.command {
        Command::Table1(s) => (ExperimentKind::Table1, s, vec![]),
        Command::Gbm(s) => (ExperimentKind::Gbm, s, vec![]),
        Command::Heston(s) => (ExperimentKind::Heston, s, vec![]),
        Command::ApTraces(s) => (ExperimentKind::ApTraces, s, vec![]),
        Command::Real {
            shared,
            prices,
            close_kind,
        } => (
            ExperimentKind::Real,
            shared,
            vec![
                ("prices", prices.as_ref().map(|p| p.display().to_string())),
                ("close_kind", close_kind.clone()),
            ],
        ),
    };
    let cfg = resolve(kind, shared, &extra)?;
    let files = run_experiment(&cfg, &shared.out, env!("CARGO_PKG_VERSION"))
        .with_context(|| format!("{kind} experiment failed"))?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}
