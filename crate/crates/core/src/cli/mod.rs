//! Command-line front end: `aqem train|sweep|fit|report --config <file>`.

pub mod commands;
pub mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::Result;
use config::{Overrides, Preset, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "aqem", version, about = "Adaptive phase-estimation simulator and scaling benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train Markov policies for each configured noise setting.
    Train(Common),
    /// Estimate Holevo variances over the photon range and noise grid.
    Sweep(Common),
    /// Fit piecewise power laws to every curve in the results file.
    Fit(Common),
    /// Write plot tables and robustness verdicts from the fit summary.
    Report(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Fixed trial count per sweep point.
    #[arg(long)]
    pub trials: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let ov = Overrides { preset: self.preset, seed: self.seed, workers: self.workers, trials: self.trials };
        RunConfig::load(&self.config, ov)
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train(c) => {
            let cfg = c.load()?;
            let files = commands::train(&cfg)?;
            println!("trained {} policies under {}", files.len(), cfg.output_dir.join("policies").display());
        }
        Command::Sweep(c) => {
            let cfg = c.load()?;
            let s = commands::sweep(&cfg)?;
            println!("{} rows from {} curves appended to {}", s.rows, s.curves.len(), cfg.results_path().display());
        }
        Command::Fit(c) => {
            let cfg = c.load()?;
            let s = commands::fit(&cfg)?;
            println!("{:<6} {:<17} {:>5} {:>7} {:>6} {:>8} {:>8}", "policy", "model", "V", "gamma", "family", "2wp", "adj_R2");
            for f in &s.curves {
                println!(
                    "{:<6} {:<17} {:>5} {:>7} {:>6} {:>8.4} {:>8}",
                    f.policy,
                    f.noise.model.name(),
                    f.noise.variance,
                    f.noise.skewness,
                    f.report.chosen.name(),
                    f.report.two_wp,
                    f.adj_r2().map_or("-".into(), |r| format!("{r:.4}"))
                );
            }
        }
        Command::Report(c) => {
            let cfg = c.load()?;
            let r = commands::report(&cfg)?;
            for p in &r.policies {
                let t = p.joint_threshold.map_or("none".into(), |t| t.to_string());
                println!("{}: robust up to V = {t}; jointly robust at {:?}", p.policy, p.jointly_robust);
            }
        }
    }
    Ok(())
}

/// Parse the process arguments, run, and map errors to exit codes.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
