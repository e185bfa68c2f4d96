use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qcollide::bench::{run_experiment, RunOptions};

#[derive(Parser)]
#[command(name = "qcollide", version, about = "Collision-model trajectory simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence experiment described by a JSON config file.
    Run {
        config: PathBuf,
        /// Master seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory, overriding the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Suppress progress output.
        #[arg(long)]
        quiet: bool,
    },
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
    match cli.command {
        Command::Run {
            config,
            seed,
            out_dir,
            threads,
            quiet,
        } => {
            let opts = RunOptions {
                seed,
                out_dir,
                threads,
                quiet,
            };
            match run_experiment(&config, &opts) {
                Ok(summary) => {
                    if !quiet {
                        eprintln!("wrote {}", summary.out_dir.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
