use std::path::PathBuf;
use std::process::ExitCode;

use bhs_cli::config::ConfigError;
use bhs_cli::{cmd_benchmark, cmd_gentest, cmd_run, cmd_truth, ExperimentConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bhs", version, about = "Bouncy hybrid samplers: run, benchmark and check")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for replicated runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Replaces the seed from the config file.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Replaces `output.dir` from the config file.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one chain and write skeleton, samples, histogram and summary.
    Run(Common),
    /// QBHS against Gibbs under a matched budget, scored against quadrature.
    Benchmark(Common),
    /// Generator-invariance z-scores; exits nonzero above the threshold.
    Gentest {
        #[command(flatten)]
        common: Common,
        /// Run with a bounce kernel that skips the reflection.
        #[arg(long)]
        corrupt_kernel: bool,
    },
    /// Moments of the configured truncated Gaussian by quadrature.
    Truth(Common),
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_THRESHOLD: u8 = 3;

fn load(common: &Common) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed_override {
        cfg.seed = seed;
    }
    let dir = common.out_dir.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok((cfg, dir))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Run(c) | Command::Benchmark(c) | Command::Truth(c) => c,
        Command::Gentest { common, .. } => common,
    };
    if common.jobs == 0 {
        eprintln!("error: --jobs must be at least 1");
        return ExitCode::from(EXIT_CONFIG);
    }
    let (cfg, dir) = match load(common) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let result = match &cli.command {
        Command::Run(_) => cmd_run(&cfg, &dir).map(|s| {
            println!("{} samples, {:?}", s.n_samples, s.event_counts);
            true
        }),
        Command::Benchmark(c) => cmd_benchmark(&cfg, &dir, c.jobs).map(|r| {
            println!("{:<12} {:>14} {:>14}", "", "Gibbs", "QBHS");
            for (label, g, q) in r.rows() {
                println!("{label:<12} {g:>14.6} {q:>14.6}");
            }
            true
        }),
        Command::Gentest { corrupt_kernel, .. } => cmd_gentest(&cfg, &dir, *corrupt_kernel).map(|r| {
            for z in &r.results {
                println!("{:<16} z = {:+.3}", z.function, z.z);
            }
            r.pass
        }),
        Command::Truth(_) => cmd_truth(&cfg, &dir).map(|t| {
            println!("means {:?} variances {:?}", t.means, t.variances);
            true
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("generator test: |z| above threshold");
            ExitCode::from(EXIT_THRESHOLD)
        }
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
