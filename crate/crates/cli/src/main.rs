use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polariton_cli::{run_file, Task};

#[derive(Parser)]
#[command(
    name = "polariton",
    version,
    about = "Collective polariton dynamics with 1/N corrections"
)]
struct Cli {
    #[command(subcommand)]
    task: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Absorption spectrum from the survival amplitude.
    Spectrum(RunArgs),
    /// Survival amplitude and norm on the time grid.
    Dynamics(RunArgs),
    /// Radiative-pumping rate of a dark state.
    Rate(RunArgs),
    /// Vibrational densities of zeroth-block eigenstates.
    Densities(RunArgs),
    /// Brute-force oracle against the symmetric assembly.
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, args) = match cli.task {
        Command::Spectrum(a) => (Task::Spectrum, a),
        Command::Dynamics(a) => (Task::Dynamics, a),
        Command::Rate(a) => (Task::Rate, a),
        Command::Densities(a) => (Task::Densities, a),
        Command::Validate(a) => (Task::Validate, a),
    };
    match run_file(task, &args.config, args.out.as_deref()) {
        Ok(summary) => {
            println!("{}", summary.message);
            if summary.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("polariton: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
