//! `hwopt`: run power- and memory-constrained hyper-parameter searches on
//! the deterministic simulator, manage profiling datasets and hardware
//! models, and emit report files from persisted run journals.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hwopt_core::config::ExperimentConfig;
use hwopt_core::error::Error;
use hwopt_core::experiment::{
    fit_hw_to_file, profiling_samples, report_from_journals_dir, run_experiment, RunOptions,
};
use hwopt_core::report::{emit, render_summary_text};
use hwopt_core::rng::stream_for;

#[derive(Parser)]
#[command(
    name = "hwopt",
    version,
    about = "Hardware-constrained hyper-parameter optimization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an offline profiling dataset for the configured scenario.
    Profile {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Number of samples (defaults to the config's profiling section).
        #[arg(long)]
        samples: Option<usize>,
        /// Profiling seed override.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the linear power/memory models from a profiling dataset.
    FitHw {
        /// Profiling dataset CSV.
        #[arg(long)]
        profile: PathBuf,
        /// Output model file (TOML).
        #[arg(long)]
        out: PathBuf,
        /// Cross-validation shuffle seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Accept models whose cross-validated RMSPE exceeds the refusal
        /// threshold.
        #[arg(long)]
        force: bool,
    },
    /// Run the configured experiment matrix and emit reports.
    Run {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for journals, models, and reports.
        #[arg(long)]
        out: PathBuf,
        /// Replace the config's seed list with a single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Continue partial journals instead of failing on them.
        #[arg(long)]
        resume: bool,
        /// Measure the time budget on the host clock instead of the
        /// simulated clock.
        #[arg(long)]
        real_clock: bool,
    },
    /// Re-aggregate report files from the journals in an output directory.
    Report {
        /// Output directory of a previous run.
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err.category() {
        "config" => 2,
        "data" => 3,
        "model" => 4,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Profile {
            config,
            out,
            samples,
            seed,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let n = samples.unwrap_or(cfg.profiling.samples);
            let profile_seed = seed.unwrap_or(cfg.profiling.seed);
            let mut rng = stream_for(profile_seed, "profile", 0);
            let samples = cfg.scenario.profile_offline(n, &mut rng)?;
            hwopt_core::experiment::write_profile_csv(
                &out,
                &cfg.scenario.space.structural_names(),
                &samples,
            )?;
            println!(
                "wrote {} profiling samples for `{}` to {}",
                samples.len(),
                cfg.scenario.name,
                out.display()
            );
            Ok(())
        }
        Command::FitHw {
            profile,
            out,
            seed,
            force,
        } => {
            let (power, memory) = fit_hw_to_file(&profile, &out, seed, force)?;
            println!(
                "power:  weights {:?} residual_std {:.6} cv rmspe {:.3}%",
                power.weights, power.residual_std, power.rmspe
            );
            println!(
                "memory: weights {:?} residual_std {:.6} cv rmspe {:.3}%",
                memory.weights, memory.residual_std, memory.rmspe
            );
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Run {
            config,
            out,
            seed,
            resume,
            real_clock,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seeds = vec![seed];
            }
            let opts = RunOptions { resume, real_clock };
            // touch the profiling pipeline early so config problems surface
            // before long runs
            std::fs::create_dir_all(&out)?;
            profiling_samples(&cfg, &out)?;
            let bundle = run_experiment(&cfg, &out, &opts)?;
            print!("{}", render_summary_text(&bundle));
            println!("reports written under {}", out.join("reports").display());
            Ok(())
        }
        Command::Report { out } => {
            let bundle = report_from_journals_dir(&out)?;
            emit(&bundle, &out.join("reports"))?;
            print!("{}", render_summary_text(&bundle));
            println!("reports written under {}", out.join("reports").display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error ({}): {err}", err.category());
            ExitCode::from(exit_code_for(&err))
        }
    }
}
