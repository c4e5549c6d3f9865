//! `trapclock` batch front end.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 runtime cap exceeded,
//! 1 any other failure.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use trapclock::experiment::{run_command, Command, ExperimentConfig, ExperimentError};

#[derive(Parser)]
#[command(name = "trapclock", version, about = "Trap-model clock processes and aging experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; all fields are optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Trajectories, clocks and block series.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_traj: Option<u64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        n: Option<u64>,
    },
    /// Condition functionals over (n, t, u, eps) grids.
    Conditions {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_traj: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<u64>>,
        #[arg(long, value_delimiter = ',')]
        t: Option<Vec<f64>>,
    },
    /// Subordinator overshoots and fractional kinetics.
    Overshoot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_paths: Option<u64>,
        #[arg(long)]
        fk_paths: Option<u64>,
    },
    /// Correlation functions against the arcsine law.
    Aging {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_env: Option<u64>,
        #[arg(long)]
        n_traj: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        s: Option<Vec<f64>>,
        #[arg(long)]
        fk_samples: Option<u64>,
    },
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn prepare(common: &Common) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_path(p)?,
        None => ExperimentConfig::default(),
    };
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    set(&mut cfg.workers, common.workers);
    set(&mut cfg.master_seed, common.master_seed);
    set(&mut cfg.env.d, common.d);
    set(&mut cfg.env.alpha, common.alpha);
    set(&mut cfg.env.theta, common.theta);
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), ExperimentError> {
    let (command, cfg) = match cli.command {
        Cmd::Simulate { common, n_traj, horizon, n } => {
            let mut cfg = prepare(&common)?;
            set(&mut cfg.simulate.n_traj, n_traj);
            set(&mut cfg.simulate.horizon, horizon);
            set(&mut cfg.simulate.n, n);
            (Command::Simulate, cfg)
        }
        Cmd::Conditions { common, n_traj, n, t } => {
            let mut cfg = prepare(&common)?;
            set(&mut cfg.conditions.n_traj, n_traj);
            set(&mut cfg.conditions.n, n);
            set(&mut cfg.conditions.t, t);
            (Command::Conditions, cfg)
        }
        Cmd::Overshoot { common, n_paths, fk_paths } => {
            let mut cfg = prepare(&common)?;
            set(&mut cfg.overshoot.n_paths, n_paths);
            set(&mut cfg.overshoot.fk_paths, fk_paths);
            (Command::Overshoot, cfg)
        }
        Cmd::Aging { common, n_env, n_traj, s, fk_samples } => {
            let mut cfg = prepare(&common)?;
            set(&mut cfg.aging.n_env, n_env);
            set(&mut cfg.aging.n_traj, n_traj);
            set(&mut cfg.aging.s, s);
            set(&mut cfg.aging.fk_samples, fk_samples);
            (Command::Aging, cfg)
        }
    };
    let out = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("trapclock-{command}")));
    let manifest = run_command(command, &cfg, &out)?;
    eprintln!(
        "{command}: wrote {} files to {} in {:.2}s",
        manifest.files.len() + 1,
        out.display(),
        manifest.wall_clock_seconds
    );
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
