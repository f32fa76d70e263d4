use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use embsurr::artifacts::StudyDir;
use embsurr::config::{SeedRange, StudyConfig};
use embsurr::core::synth::{generate, SynthConfig};
use embsurr::study;
use embsurr::{embd, table, Result};

#[derive(Parser)]
#[command(name = "embsurr", version, about = "Symbolic surrogate models of embedding classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StudyArgs {
    /// Study configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Study output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SeedArgs {
    /// Seed range `a..b`; defaults to the config's range.
    #[arg(long)]
    seeds: Option<SeedRange>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (EMBD, or CSV for a .csv path).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1200)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        d: usize,
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 8)]
        informative: usize,
        #[arg(long, default_value_t = 2.0)]
        shift: f64,
        #[arg(long, default_value_t = 240)]
        test: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Standardize on train rows and build the feature views.
    Partition(StudyArgs),
    /// Evolve one surrogate per seed; finished runs are kept.
    Train {
        #[command(flatten)]
        study: StudyArgs,
        #[command(flatten)]
        seeds: SeedArgs,
        /// Runs evolved in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Pick the canonical model with the one-standard-error rule.
    Select {
        #[command(flatten)]
        study: StudyArgs,
        #[command(flatten)]
        seeds: SeedArgs,
    },
    /// Fit the temperature of the canonical model on validation rows.
    Calibrate(StudyArgs),
    /// Score every run and the calibrated canonical model on test rows.
    Evaluate {
        #[command(flatten)]
        study: StudyArgs,
        #[command(flatten)]
        seeds: SeedArgs,
    },
    /// Importance, usage and effect curves of the canonical model.
    Analyze(StudyArgs),
    /// Collect the artifacts into report.md.
    Report(StudyArgs),
}

fn open(args: &StudyArgs) -> Result<(StudyConfig, StudyDir)> {
    Ok((StudyConfig::load(&args.config)?, StudyDir::new(&args.out)))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Synth { out, n, d, classes, informative, shift, test, seed } => {
            let synth = generate(&SynthConfig { n, d, classes, informative, shift, test, seed })?;
            if out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                table::save(&synth.dataset, &out)?;
            } else {
                embd::save(&synth.dataset, &out)?;
            }
            let dims: Vec<String> = synth.informative.iter().map(|j| format!("d{j}")).collect();
            println!("wrote {} ({n} x {d}, informative {})", out.display(), dims.join(" "));
        }
        Command::Partition(args) => {
            let (config, dir) = open(&args)?;
            let p = study::partition_stage(&config, &dir)?;
            println!(
                "{} views of sizes {:?} (budget {}), partition digest {:016x}",
                p.partition.len(),
                p.partition.sizes(),
                p.partition.budget,
                p.partition_digest
            );
        }
        Command::Train { study: args, seeds, jobs } => {
            let (config, dir) = open(&args)?;
            let range = seeds.seeds.unwrap_or(config.seeds);
            let s = study::train_stage(&config, &dir, range, jobs)?;
            println!("trained {} runs, reused {} finished runs", s.trained.len(), s.reused.len());
        }
        Command::Select { study: args, seeds } => {
            let (config, dir) = open(&args)?;
            let sel = study::select_stage(&config, &dir, seeds.seeds.unwrap_or(config.seeds))?;
            println!("canonical seed {} (best val F1 {:.4}, threshold {:.4})", sel.chosen_seed, sel.best_f1, sel.threshold);
        }
        Command::Calibrate(args) => {
            let (config, dir) = open(&args)?;
            let c = study::calibrate_stage(&config, &dir)?;
            println!("T = {:.4}, val NLL {:.4} -> {:.4}", c.temperature, c.val_nll_before, c.val_nll_after);
        }
        Command::Evaluate { study: args, seeds } => {
            let (config, dir) = open(&args)?;
            let e = study::evaluate_stage(&config, &dir, seeds.seeds.unwrap_or(config.seeds))?;
            for s in &e.summary {
                let hw = s.halfwidth.map_or_else(|| "NA".to_string(), |h| format!("{h:.4}"));
                println!("{:<10} {:.4} +- {hw}", s.metric, s.mean);
            }
        }
        Command::Analyze(args) => {
            let (config, dir) = open(&args)?;
            let a = study::analyze_stage(&config, &dir)?;
            println!("{} unique dims, {} effect curves", a.sparsity.unique_dims, a.effects.len());
        }
        Command::Report(args) => {
            let (config, dir) = open(&args)?;
            study::report_stage(&config, &dir)?;
            println!("wrote {}", dir.path(embsurr::artifacts::REPORT).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
