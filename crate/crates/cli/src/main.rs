use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oplab_cli::{run, Command, Context};

/// Structured-operator recovery and operator-learning experiments.
///
/// Logging is controlled by the OPLAB_LOG environment variable
/// (error, warn, info, debug, trace; default warn).
#[derive(Parser)]
#[command(name = "oplab", version)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Generate operator datasets with the PDE solvers.
    Generate(Common),
    /// Recover a structured matrix from matvec queries and report the cost.
    Recover(Common),
    /// Fit a kernel model to a dataset and write the model and metrics.
    Fit(Common),
    /// Evaluate a fitted model on one or more datasets and write a CSV table.
    Eval(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory that relative output and input paths resolve against.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("OPLAB_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error[config]: cannot start {threads} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let (command, common) = match cli.command {
        Sub::Generate(c) => (Command::Generate, c),
        Sub::Recover(c) => (Command::Recover, c),
        Sub::Fit(c) => (Command::Fit, c),
        Sub::Eval(c) => (Command::Eval, c),
    };
    let ctx = Context {
        out_dir: common.out,
        seed: common.seed,
    };
    match run(command, &common.config, &ctx) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
