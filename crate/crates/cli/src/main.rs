use std::io::{self, Write as _};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ofdm_shaper_cli::{run, CliError, Command, RunOptions, THREADS_ENV};

/// Generalized-pulse spectral shaping for OFDM.
#[derive(Parser)]
#[command(
    name = "ofdm-shaper",
    version,
    after_help = "Set OFDM_SHAPER_THREADS to limit the worker threads."
)]
struct Args {
    command: Command,
    /// Scenario TOML file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory, overriding the scenario's.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Analytic PSD points per carrier spacing.
    #[arg(long)]
    grid_density: Option<usize>,
    /// Also write SVG plots.
    #[arg(long)]
    plot: bool,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .map_err(|_| CliError::Validation(format!("{THREADS_ENV}={value} is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Validation(e.to_string()))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let options = RunOptions {
        scenario: args.scenario,
        out: args.out,
        seed: args.seed,
        grid_density: args.grid_density,
        plot: args.plot,
    };
    match init_threads().and_then(|()| run(args.command, &options)) {
        Ok(outcome) => {
            // A closed pipe is not an error for a report printed after the work is done.
            let mut stdout = io::stdout().lock();
            let _ = stdout.write_all(outcome.summary.as_bytes());
            for f in &outcome.files {
                let _ = writeln!(stdout, "wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
