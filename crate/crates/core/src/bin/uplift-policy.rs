use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uplift_policy::pipeline::{self, RunConfig};
use uplift_policy::{Error, Result};

#[derive(Parser)]
#[command(name = "uplift-policy", version, about = "Uplift modeling, policy optimization and offline evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic experiment and its ground-truth manifest
    Simulate(Common),
    /// Fit the CATE model and score its uplift curve
    Fit(Common),
    /// Optimize a treatment policy from the fitted model
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Evaluate policies offline against baselines
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Proposed policy first, then extra policies to compare
        #[arg(long = "policy")]
        policies: Vec<PathBuf>,
    },
    /// Render the summary tables
    Report(Common),
    /// Run every stage in order
    Run(Common),
}

fn config(c: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &c.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = config(&c)?;
            pipeline::cmd_simulate(&cfg)?;
            println!("wrote {}", cfg.out_dir.join(pipeline::DATASET_FILE).display());
        }
        Command::Fit(c) => {
            let report = pipeline::cmd_fit(&config(&c)?)?;
            for a in &report.arms {
                println!("arm {} ({}): AUC {:.6} (random {:.6})", a.arm, a.label, a.auc, a.random_ranking_auc);
            }
        }
        Command::Optimize { common, model } => {
            let art = pipeline::cmd_optimize(&config(&common)?, model.as_deref())?;
            println!(
                "{:?}: objective {:.6}, targeting proportion {:.4}",
                art.report.solver, art.report.objective, art.report.targeting_proportion
            );
        }
        Command::Evaluate { common, policies } => {
            pipeline::cmd_evaluate(&config(&common)?, &policies)?;
        }
        Command::Report(c) => print!("{}", pipeline::cmd_report(&config(&c)?)?),
        Command::Run(c) => print!("{}", pipeline::cmd_run(&config(&c)?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
