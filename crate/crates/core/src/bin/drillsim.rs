use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use drillsim_core::harness::{ablation_suite, run_batch, write_outputs, ExperimentConfig, Profile};
use drillsim_core::{Arm, SimError};

/// Closed-loop drilling simulator: batch runs and ablations.
#[derive(Debug, Parser)]
#[command(name = "drillsim", version)]
struct Cli {
    /// JSON experiment document; every field is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ablation arm to run.
    #[arg(long, value_parser = ["baseline", "force", "plane", "full"])]
    arm: Option<String>,
    #[arg(long, value_parser = ["egg", "mouse"])]
    profile: Option<String>,
    /// Trials per arm.
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed; trial i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run all four arms on shared seeds.
    #[arg(long)]
    ablation: bool,
    /// Write the sampled shell of every trial.
    #[arg(long)]
    dump_surface: bool,
    /// Write a per-cycle trace for every trial.
    #[arg(long)]
    traces: bool,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, SimError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(a) = &cli.arm {
        cfg.arm = a.parse::<Arm>()?;
    }
    if let Some(p) = &cli.profile {
        cfg.profile = p.parse::<Profile>()?;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    cfg.dump_surface |= cli.dump_surface;
    cfg.write_traces |= cli.traces;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), SimError> {
    let cfg = build_config(cli)?;
    let result = if cli.ablation { ablation_suite(&cfg)? } else { run_batch(&cfg)? };
    write_outputs(&cfg, &result)?;
    println!("{:<10} {:>8} {:>8} {:>8} {:>8} {:>10}", "arm", "success", "under", "over_m", "over_h", "time_min");
    for a in &result.summary.arms {
        let time = a.mean_time_min.map_or("-".to_string(), |t| format!("{t:.2}"));
        println!(
            "{:<10} {:>8.1} {:>8.1} {:>8.1} {:>8.1} {:>10}",
            a.arm.as_str(),
            a.success_pct,
            a.under_drill_pct,
            a.over_drill_model_pct,
            a.over_drill_intervened_pct,
            time
        );
    }
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("drillsim: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
