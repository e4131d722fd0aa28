use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vimlab::experiment::{self, ExperimentConfig};
use vimlab::VimError;

#[derive(Parser)]
#[command(name = "vimlab", version, about = "Variable-importance experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulated `figure1` / `poly_sim` experiments.
    Simulate(Common),
    /// Repeated resplits of a CSV file.
    Analyze(Common),
    /// Exact identity suite on enumerated joints.
    OracleCheck(Common),
    /// Scores over a grid of sample sizes.
    Convergence(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output CSV; a `.json` sidecar with the resolved configuration is
    /// written next to it. Defaults to the config's `output`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, VimError> {
        if let Some(j) = self.jobs {
            if j == 0 {
                return Err(VimError::Config("--jobs must be >= 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build_global()
                .map_err(|e| VimError::Config(e.to_string()))?;
        }
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        Ok(cfg)
    }
}

fn emit<T: serde::Serialize>(cfg: &ExperimentConfig, rows: &[T], header: &[&str]) -> Result<(), VimError> {
    match &cfg.output {
        Some(path) => {
            experiment::write_outputs(cfg, rows, header, path)?;
            log::info!("wrote {} rows to {}", rows.len(), path.display());
            Ok(())
        }
        None => experiment::write_rows(rows, header, std::io::stdout().lock()),
    }
}

fn run(cli: Cli) -> Result<ExitCode, VimError> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = c.load()?;
            emit(&cfg, &experiment::run_simulate(&cfg)?, &experiment::RESULT_HEADER)?;
        }
        Command::Analyze(c) => {
            let cfg = c.load()?;
            emit(&cfg, &experiment::run_analyze(&cfg)?, &experiment::RESULT_HEADER)?;
        }
        Command::Convergence(c) => {
            let cfg = c.load()?;
            emit(&cfg, &experiment::run_convergence(&cfg)?, &experiment::CONVERGENCE_HEADER)?;
        }
        Command::OracleCheck(c) => {
            let cfg = c.load()?;
            let checks = experiment::run_oracle_check(&cfg)?;
            for check in &checks {
                println!("{check}");
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
