use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use loewner_branch::scenario::{self, Overrides};

#[derive(Parser)]
#[command(
    name = "loewner-branch",
    version,
    about = "Time-inhomogeneous branching processes via reverse evolution families"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON scenario file and write report.json plus CSV tables.
    Run {
        scenario: PathBuf,
        /// Output directory (overrides `output.directory`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed for every simulate command.
        #[arg(long)]
        seed: Option<u64>,
        /// Solver tolerance: rtol = TOL, atol = TOL·1e-4.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run the built-in property suite.
    Verify {
        #[arg(long)]
        quick: bool,
    },
    /// Print the JSON Schema for scenario files.
    Schema,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario: path, out, seed, tol } => {
            let overrides = Overrides { out, seed, tol };
            match scenario::run_scenario(&path, &overrides) {
                Ok(outcome) => {
                    println!("wrote {}", outcome.output_dir.display());
                    if let Some(e) = &outcome.error {
                        eprintln!("error: {e}");
                    }
                    ExitCode::from(outcome.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Verify { quick } => match loewner_branch::verify::run(quick) {
            Ok(r) => {
                print!("{}", r.to_csv());
                if r.passed() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(if e.is_numeric() { 1 } else { 2 })
            }
        },
        Command::Schema => {
            println!("{}", serde_json::to_string_pretty(&scenario::schema()).expect("schema serializes"));
            ExitCode::SUCCESS
        }
    }
}
