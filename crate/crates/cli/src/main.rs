use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use virtual_cooling::experiment::{run_experiment, ExperimentConfig, ExperimentError};
use virtual_cooling::verify::{run_suite, Mutation, VerifyOptions};

#[derive(Parser)]
#[command(
    name = "vcool",
    version,
    about = "Virtual cooling experiments on small lattice systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Sampler threads; results do not depend on this.
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (overrides `output` in the config).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Seed (overrides `seed` in the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the acceptance criteria and print one line per criterion.
    Verify {
        #[arg(long)]
        workers: Option<usize>,
        /// Comma-separated criterion numbers to run.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
        #[arg(long, hide = true)]
        mutate: Option<Mutation>,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    let err = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{err}");
    ExitCode::from(code)
}

fn error_kind(e: &ExperimentError) -> &'static str {
    match e {
        ExperimentError::Parse(_) => "parse",
        ExperimentError::Invalid(_) => "invalid_config",
        ExperimentError::Infeasible { .. } => "infeasible",
        ExperimentError::Output(_) | ExperimentError::Io(_) => "output",
        _ => "numerics",
    }
}

fn run(config: PathBuf, workers: Option<usize>, output: Option<PathBuf>, seed: Option<u64>) -> ExitCode {
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => return fail("io", format!("{}: {e}", config.display()), 2),
    };
    let mut cfg = match ExperimentConfig::from_toml(&text) {
        Ok(c) => c,
        Err(e) => return fail(error_kind(&e), e.to_string(), 2),
    };
    if seed.is_some() {
        cfg.seed = seed;
    }
    let workers = workers.or(cfg.workers).unwrap_or_else(default_workers);
    let dir = output
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.kind.name()));
    log::info!("running {} with {workers} workers", cfg.kind.name());
    // everything is computed in memory first, so a failure leaves no files
    let out = match run_experiment(&cfg, workers) {
        Ok(o) => o,
        Err(e) => {
            let code = if matches!(e, ExperimentError::Parse(_) | ExperimentError::Invalid(_)) {
                2
            } else {
                1
            };
            return fail(error_kind(&e), e.to_string(), code);
        }
    };
    match out.write_to(&dir) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail("output", e.to_string(), 1),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            workers,
            output,
            seed,
        } => run(config, workers, output, seed),
        Command::Verify { workers, only, mutate } => {
            let opts = VerifyOptions {
                mutation: mutate,
                workers: workers.unwrap_or_else(default_workers),
                only,
            };
            let results = run_suite(&opts, |r| println!("{}", r.line()));
            let failed = results.iter().filter(|r| !r.passed).count();
            println!("{} of {} criteria passed", results.len() - failed, results.len());
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
