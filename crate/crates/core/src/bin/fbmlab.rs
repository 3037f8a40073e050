use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use fbmlab::bounds::ChMode;
use fbmlab::harness::{run, write_outputs, Experiment, ExperimentConfig, Overrides};
use fbmlab::sampler::ExportLayout;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ChModeArg {
    Literal,
    Derived,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LayoutArg {
    PerPath,
    SingleFile,
}

/// Fractional Brownian motion experiments.
#[derive(Debug, Parser)]
#[command(name = "fbmlab", version)]
struct Cli {
    /// verify-kernel, verify-covariance, verify-bounds, mc-modulus, mc-lil,
    /// mc-nondiff, mc-doublepoint, mc-mgf or estimate-hurst.
    experiment: Experiment,
    /// JSON config; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    ch_mode: Option<ChModeArg>,
    #[arg(long)]
    no_renormalize: bool,
    /// Also write every sampled path as CSV.
    #[arg(long, value_enum, num_args = 0..=1, default_missing_value = "per-path")]
    export_paths: Option<LayoutArg>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let overrides = Overrides {
        experiment: Some(cli.experiment),
        seed: cli.seed,
        workers: cli.workers,
        out_dir: cli.out,
        ch_mode: cli.ch_mode.map(|m| match m {
            ChModeArg::Literal => ChMode::Literal,
            ChModeArg::Derived => ChMode::Derived,
        }),
        no_renormalize: cli.no_renormalize,
        export_paths: cli.export_paths.map(|l| match l {
            LayoutArg::PerPath => ExportLayout::PerPath,
            LayoutArg::SingleFile => ExportLayout::SingleFile,
        }),
    };
    let file = match &cli.config {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    };
    let config = match file
        .map(|c| c.apply(&overrides))
        .and_then(ExperimentConfig::resolve)
    {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match run(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let dir = config.out_path();
    if let Err(e) = write_outputs(&report, dir) {
        eprintln!("error: writing outputs to {}: {e}", dir.display());
        return ExitCode::from(2);
    }
    for v in &report.verdicts {
        println!(
            "{} {} observed={:e} threshold={}",
            if v.passed { "PASS" } else { "FAIL" },
            v.name,
            v.observed,
            serde_json::to_string(&v.threshold).unwrap_or_default()
        );
    }
    if let Some(err) = &report.error {
        eprintln!("error [{}]: {}", err.module, err.message);
    }
    if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
