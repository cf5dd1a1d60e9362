use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kerflow::{catalog, parse_config, run_experiment, validate, ConfigError, RunOptions};

#[derive(Parser)]
#[command(
    name = "kerflow",
    version,
    about = "Run kernel and flow experiments from JSON configs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config and print the JSON report.
    Run {
        config: PathBuf,
        /// Omit timings so the report is byte-stable.
        #[arg(long)]
        stable_output: bool,
        /// Also write each curve as CSV into this directory.
        #[arg(long, value_name = "DIR")]
        csv_dir: Option<PathBuf>,
        /// Override the config seed (also read from KERFLOW_SEED).
        #[arg(long, env = "KERFLOW_SEED")]
        seed: Option<u64>,
    },
    /// Parse a config and resolve its builtins without running it.
    Validate { config: PathBuf },
    /// List builtin kernels, algebras, fields, actions and example configs.
    ListBuiltins,
    /// Print one of the shipped example configs.
    Example { name: String },
}

fn config_failure(e: &ConfigError) -> ExitCode {
    eprintln!("config error: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            stable_output,
            csv_dir,
            seed,
        } => {
            let options = RunOptions {
                seed_override: seed,
                stable_output,
            };
            let report = match parse_config(&config).and_then(|c| run_experiment(&c, &options)) {
                Ok(r) => r,
                Err(e) => return config_failure(&e),
            };
            print!("{}", report.to_json());
            if let Some(dir) = csv_dir {
                if let Err(e) = report.write_csv(&dir) {
                    eprintln!("cannot write curves to {}: {e}", dir.display());
                    return ExitCode::from(2);
                }
            }
            for check in report.failed_checks() {
                eprintln!("FAIL {}", check.name);
            }
            if let Some(err) = &report.error {
                eprintln!("error: {}", err.message);
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Command::Validate { config } => match parse_config(&config).and_then(|c| validate(&c)) {
            Ok(()) => {
                println!("ok");
                ExitCode::SUCCESS
            }
            Err(e) => config_failure(&e),
        },
        Command::ListBuiltins => {
            println!("{}", catalog::render());
            ExitCode::SUCCESS
        }
        Command::Example { name } => match catalog::example(&name) {
            Some(e) => {
                print!("{}", e.json);
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("no example named `{name}`");
                ExitCode::from(2)
            }
        },
    }
}
