mod commands;
mod config;
mod logging;
mod output;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Trigonometric Calogero-Moser / KP hierarchy batch tool.
#[derive(Parser)]
#[command(name = "kpcm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured flows and write trajectory tables.
    Simulate(CommonArgs),
    /// Run named verification suites over seeded ensembles.
    Verify(CommonArgs),
    /// Compare integrated pole positions against the determinant route.
    TauCompare(CommonArgs),
    /// Solve the Bäcklund map per configured μ and tabulate its defects.
    Backlund(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: config output_dir, else "out").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent checks/rows.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Simulate(a) => ("simulate", a),
        Command::Verify(a) => ("verify", a),
        Command::TauCompare(a) => ("tau-compare", a),
        Command::Backlund(a) => ("backlund", a),
    };

    let loaded = match config::load(&args.config) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(commands::EXIT_CONFIG_ERROR);
        }
    };
    let seed = args.seed.unwrap_or(loaded.config.seed);
    let out = args
        .out
        .clone()
        .or_else(|| loaded.config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("cannot create output directory {out:?}: {e}");
        return ExitCode::from(commands::EXIT_CONFIG_ERROR);
    }
    logging::log(
        logging::Level::Info,
        &format!("{name}: config digest {}", loaded.digest),
    );

    let code = match &cli.command {
        Command::Simulate(_) => commands::simulate(&loaded, &out, seed),
        Command::Verify(_) => commands::verify(&loaded, &out, seed, args.jobs),
        Command::TauCompare(_) => commands::tau_compare(&loaded, &out, seed),
        Command::Backlund(_) => commands::backlund_cmd(&loaded, &out, seed),
    };
    ExitCode::from(code)
}
