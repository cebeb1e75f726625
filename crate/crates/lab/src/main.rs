use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qspace_lab::{exit, experiments, validate, RunReport};

#[derive(Parser)]
#[command(name = "qspace", version, about = "Run q-space walk experiments from JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts and report.
    Run {
        config: PathBuf,
        /// Run directory; overrides the output root and the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Print the summary of a finished run.
    Report { run_dir: PathBuf },
}

fn load(path: &PathBuf) -> Result<qspace_lab::ExperimentConfig, i32> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        exit::VALIDATION_ERROR
    })?;
    validate(&text).map_err(|findings| {
        for f in &findings {
            eprintln!("{}: {f}", path.display());
        }
        exit::VALIDATION_ERROR
    })
}

fn verdict(report: &RunReport) -> i32 {
    if report.passed {
        exit::PASS
    } else {
        exit::CRITERION_FAILURE
    }
}

fn main_code(cli: Cli) -> i32 {
    match cli.command {
        Command::Validate { config } => match load(&config) {
            Ok(_) => {
                println!("{}: ok", config.display());
                exit::PASS
            }
            Err(code) => code,
        },
        Command::Run { config, out } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let dir = out.unwrap_or_else(|| experiments::output_dir(&cfg));
            match experiments::run(&cfg, &dir) {
                Ok(report) => {
                    print!("{}", report.summary());
                    println!("report: {}", dir.join(qspace_lab::report::REPORT_FILE).display());
                    verdict(&report)
                }
                Err(e) => {
                    eprintln!("{}: {e}", dir.display());
                    exit::CRITERION_FAILURE
                }
            }
        }
        Command::Report { run_dir } => match RunReport::read(&run_dir) {
            Ok(report) => {
                print!("{}", report.summary());
                verdict(&report)
            }
            Err(e) => {
                eprintln!("{}: {e}", run_dir.display());
                exit::VALIDATION_ERROR
            }
        },
    }
}

fn main() -> ExitCode {
    ExitCode::from(main_code(Cli::parse()) as u8)
}
