use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use soh_cli::snapshot::{read_snapshot, Snapshot};
use soh_cli::{parse_config, run, sweep, CliError, ConfigError, RunConfig, Scenario};

#[derive(Parser)]
#[command(name = "soh", version, about = "Asymptotic-preserving solver for self-organized hydrodynamics with congestion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Run {
        config: PathBuf,
        /// Output directory (default: `output_dir` from the config, then $SOH_OUTPUT_DIR/<scenario>, then ./soh-output/<scenario>).
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override the seed of stochastic initial data.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the snapshot interval in steps.
        #[arg(long)]
        snapshot_every: Option<usize>,
    },
    /// Collision runs over a list of epsilons at fixed step sizes.
    Sweep {
        config: PathBuf,
        /// Comma-separated epsilons, e.g. 1e-2,1e-4,1e-8.
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Print the header and field statistics of a snapshot.
    Inspect { snapshot: PathBuf },
}

fn load(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(path, e))
        .with_context(|| format!("reading config {}", path.display()))?;
    let cfg = parse_config(&text)
        .map_err(CliError::from)
        .with_context(|| format!("in config {}", path.display()))?;
    Ok(cfg)
}

fn output_root(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| {
        let root = std::env::var_os("SOH_OUTPUT_DIR").map_or_else(|| PathBuf::from("soh-output"), PathBuf::from);
        root.join(cfg.scenario.name())
    })
}

fn inspect(path: &Path) -> anyhow::Result<()> {
    let snap: Snapshot = read_snapshot(path)
        .map_err(CliError::from)
        .with_context(|| format!("reading snapshot {}", path.display()))?;
    let kind = snap.data.kind();
    println!("kind      {kind:?}");
    println!("grid      {} x {} (dx = {}, dy = {})", snap.nx, snap.ny, snap.dx, snap.dy);
    println!("origin    ({}, {})", snap.origin.0, snap.origin.1);
    println!("time      {}", snap.time());
    println!("params    {}", snap.digest_hex());
    println!("{:<10} {:>24} {:>24} {:>24} {:>24}", "field", "min", "max", "mean", "sum");
    for (name, f) in kind.field_names().iter().zip(snap.data.fields()) {
        let stats = soh_core::twofluid::FieldStats::of(f);
        let sum: f64 = f.iter().sum();
        println!(
            "{name:<10} {:>24.16e} {:>24.16e} {:>24.16e} {:>24.16e}",
            stats.min, stats.max, stats.mean, sum
        );
    }
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            config,
            output_dir,
            seed,
            snapshot_every,
        } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.params.seed = s;
            }
            if let Some(k) = snapshot_every {
                cfg.snapshot_every = k;
            }
            let out = output_root(output_dir, &cfg);
            let summary = run(&cfg, &out).with_context(|| format!("running {}", config.display()))?;
            print!("{}", summary.to_text());
            println!("output = {}", out.display());
        }
        Command::Sweep {
            config,
            epsilons,
            output_dir,
        } => {
            let mut cfg = load(&config)?;
            if !matches!(cfg.scenario, Scenario::Collision | Scenario::Sweep) {
                return Err(CliError::from(ConfigError::Constraint {
                    key: "scenario".into(),
                    reason: format!("sweeps run the collision scenario, config has {}", cfg.scenario),
                })
                .into());
            }
            if let Some(eps) = epsilons {
                if let Some(e) = eps.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
                    return Err(CliError::from(ConfigError::Constraint {
                        key: "--epsilons".into(),
                        reason: format!("entries must be > 0, got {e}"),
                    })
                    .into());
                }
                cfg.sweep.epsilons = eps;
            }
            cfg.scenario = Scenario::Sweep;
            let out = output_root(output_dir, &cfg);
            let summary = sweep(&cfg, &out).with_context(|| format!("sweeping {}", config.display()))?;
            print!("{}", summary.to_text());
            println!("output = {}", out.display());
        }
        Command::Inspect { snapshot } => inspect(&snapshot)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.downcast_ref::<CliError>().map_or(1, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
