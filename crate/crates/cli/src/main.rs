use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gaugesim_cli::{exit, plot, run, CliError, RunConfig, RunOptions};

#[derive(Parser)]
#[command(name = "gaugesim", version, about = "Synthetic gauge field simulations on driven lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run {
        config: PathBuf,
        /// Output directory (default: the config's `output`, then `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; overrides the config.
        #[arg(long, env = "GAUGESIM_THREADS")]
        threads: Option<usize>,
    },
    /// Render a three-column CSV as an SVG heatmap.
    Plot {
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a configuration file without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { exit::INVALID_CONFIG } else { exit::OK };
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gaugesim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config, out, seed, threads } => {
            let cfg = RunConfig::load(&config)?;
            let output = run(&cfg, &RunOptions { out, seed, threads })?;
            for a in &output.artifacts {
                println!("{}", output.dir.join(&a.name).display());
            }
            Ok(())
        }
        Command::Plot { csv, out } => plot::plot_file(&csv, &out),
        Command::Validate { config } => {
            let cfg = RunConfig::load(&config)?;
            println!("ok: {:?} experiment, config sha256 {}", cfg.experiment, cfg.hash()?);
            Ok(())
        }
    }
}
