//! `befair`: train, audit and verify best-effort fair classifiers.

mod audit;
mod config;
mod error;
mod manifest;
mod train;
mod verify;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "befair", version, about = "Best-effort fair classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a classifier and write model.json plus a run manifest.
    Train(train::TrainArgs),
    /// Accuracy, MAE_δ and accuracy curves for a saved model.
    Audit(audit::AuditArgs),
    /// Check the fairness guarantees on seeded instances and the worked examples.
    Verify(verify::VerifyArgs),
}

fn init_threads() -> Result<(), error::CliError> {
    let Ok(v) = std::env::var("BEFAIR_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| error::CliError::Usage(format!("BEFAIR_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| error::CliError::Failed(e.to_string()))
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = init_threads().and_then(|()| match &cli.command {
        Command::Train(a) => train::run(a),
        Command::Audit(a) => audit::run(a),
        Command::Verify(a) => verify::run(a),
    });
    if let Err(e) = res {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
