use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use tmt_cli::{load_config, run, Format, Mode, RunOptions};

/// Template margin thresholding: simulation, denoising and benchmarks for
/// NV-center Ramsey photoluminescence.
#[derive(Parser)]
#[command(name = "tmt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an ensemble of PL traces.
    Simulate(Common),
    /// Denoise simulated traces, or `experiment.input`, at `filter.beta`.
    Denoise(Common),
    /// MSE, squared bias and variance over the filter-order grid.
    SweepBeta(Common),
    /// Raw and TMT SNR over durations and repetition counts.
    Benchmark(Common),
    /// Calibration-transfer gain for windows of 1..n_sd_max detection points.
    GainProfile(Common),
    /// Power-law fits of SNR against total integration time.
    FitScaling(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; required for the benchmark modes.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Table format; repeat for several.
    #[arg(long, value_enum)]
    format: Vec<Format>,
    /// Worker threads. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let (mode, common) = match cli.command {
        Command::Simulate(c) => (Mode::Simulate, c),
        Command::Denoise(c) => (Mode::Denoise, c),
        Command::SweepBeta(c) => (Mode::SweepBeta, c),
        Command::Benchmark(c) => (Mode::Benchmark, c),
        Command::GainProfile(c) => (Mode::GainProfile, c),
        Command::FitScaling(c) => (Mode::FitScaling, c),
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cfg = load_config(&common.config)
        .with_context(|| format!("loading {}", common.config.display()))?;
    let opts = RunOptions {
        seed: common.seed,
        out: common.out,
        formats: (!common.format.is_empty()).then_some(common.format),
    };
    let report = run(&cfg, mode, &opts)?;
    for f in &report.files {
        println!("{}", f.display());
    }
    Ok(())
}
