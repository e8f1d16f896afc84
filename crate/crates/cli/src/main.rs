//! Command-line experiment runner: train, sample, evaluate, self-check.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use mgpinn::config::RunConfig;
use mgpinn::gradestack::GradeStack;
use mgpinn::runner;
use mgpinn::sampling::build_samples;
use mgpinn::selfcheck;

#[derive(Parser)]
#[command(name = "mgpinn", about = "Two-stage multi-grade PINN trainer for Burgers benchmarks")]
struct Cli {
    /// Worker threads (overrides the MGPINN_THREADS variable and the config).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a configuration and write loss CSVs, summary, checkpoint, and
    /// test-grid predictions.
    Run {
        config: PathBuf,
        /// Output directory for all artifacts.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Replace architecture/epochs/sampling with the desk-scale preset.
        #[arg(long)]
        desk_scale: bool,
        /// Force deterministic evaluation regardless of the config.
        #[arg(long)]
        deterministic: bool,
        /// Suppress the training heartbeat on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// Run one oracle suite (gradients, jets, hammersley, exact-residual,
    /// quadrature, or all) and print a pass/fail table.
    Check { suite: String },
    /// Generate the training point set of a config and dump it to CSV.
    Sample {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Evaluate a stack checkpoint on a config's test grid.
    Eval {
        checkpoint: PathBuf,
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn configure_threads(cli_threads: Option<usize>, config_threads: Option<usize>) {
    let n = cli_threads
        .or_else(|| std::env::var("MGPINN_THREADS").ok().and_then(|v| v.parse().ok()))
        .or(config_threads);
    if let Some(n) = n {
        // ignore the error if a pool already exists (tests, repeat calls)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, desk_scale, deterministic, quiet } => {
            let (mut cfg, hash) = RunConfig::from_file(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            if desk_scale {
                cfg.apply_desk_scale()?;
            }
            if deterministic {
                cfg.deterministic = true;
            }
            configure_threads(cli.threads, cfg.threads);
            let artifacts = runner::run_to_dir(&cfg, &hash, &out, !quiet)?;
            println!("run complete: {}", out.display());
            for phase in &artifacts.summary.phases {
                println!(
                    "  {}: best loss {:.6e} (epoch {}), relative L2 {:.6e}, {:.1}s",
                    phase.label,
                    phase.best_loss,
                    phase.best_epoch,
                    phase.relative_l2,
                    phase.duration_secs
                );
            }
            println!(
                "  monotone chain: {} | final relative L2: {:.6e}",
                if artifacts.summary.monotone_chain_ok { "ok" } else { "VIOLATED" },
                artifacts.summary.final_relative_l2
            );
        }
        Command::Check { suite } => {
            configure_threads(cli.threads, None);
            let results = selfcheck::run_suite(&suite)?;
            let mut failed = 0;
            for r in &results {
                println!(
                    "[{}] {:<36} {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.detail
                );
                failed += usize::from(!r.passed);
            }
            if failed > 0 {
                bail!("{failed} of {} checks failed", results.len());
            }
            println!("all {} checks passed", results.len());
        }
        Command::Sample { config, out } => {
            let (cfg, _) = RunConfig::from_file(&config)?;
            configure_threads(cli.threads, cfg.threads);
            let problem = cfg.build_problem()?;
            let samples = build_samples(&problem.geometry(), &cfg.samples, cfg.seed);
            std::fs::create_dir_all(&out)?;
            let path = out.join("samples.csv");
            runner::write_samples_csv(&path, &samples)?;
            println!(
                "wrote {} ({} collocation, {} initial, {} boundary)",
                path.display(),
                samples.collocation.len(),
                samples.initial.len(),
                samples.boundary.len()
            );
        }
        Command::Eval { checkpoint, config, out } => {
            let (cfg, _) = RunConfig::from_file(&config)?;
            configure_threads(cli.threads, cfg.threads);
            let bytes = std::fs::read(&checkpoint)
                .with_context(|| format!("reading {}", checkpoint.display()))?;
            let stack = GradeStack::from_checkpoint(&bytes)?;
            let (grid, exact, predictions, summary) = runner::eval_checkpoint(&stack, &cfg)?;
            std::fs::create_dir_all(&out)?;
            runner::write_predictions_csv(&out.join("predictions.csv"), &grid, &exact, &predictions)?;
            std::fs::write(
                out.join("error_summary.json"),
                serde_json::to_string_pretty(&summary)?,
            )?;
            println!(
                "relative L2 {:.6e}, max abs error {:.6e}; artifacts in {}",
                summary.relative_l2,
                summary.max_abs_error,
                out.display()
            );
        }
    }
    Ok(())
}
