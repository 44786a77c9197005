use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};
use krig_core::io::{self, Config};
use krig_core::Error;

/// Bayesian kriging by iterative normal-mixture importance sampling.
///
/// KRIG_THREADS caps the number of worker threads.
#[derive(Parser)]
#[command(name = "krig", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the posterior approximation described by a config file.
    Fit { config: PathBuf },
    /// Simulate the field on the configured grid from a fitted mixture.
    Simulate { config: PathBuf },
    /// Print the iteration history stored in a mixture file.
    Diagnose { mixture: PathBuf },
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("KRIG_THREADS") else {
        return Ok(());
    };
    let n: usize = match v.trim().parse() {
        Ok(n) if n > 0 => n,
        _ => {
            return Err(Failure::Usage(format!(
                "KRIG_THREADS must be a positive integer, got '{v}'"
            )))
        }
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot set up {n} worker threads: {e}")))
}

fn load_config(path: &Path) -> Result<Config, Failure> {
    if !path.is_file() {
        return Err(Failure::Usage(format!("config file {} not found", path.display())));
    }
    Ok(Config::load(path)?)
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Fit { config } => {
            let config = load_config(&config)?;
            let report = io::fit(&config)?;
            let last = report.output.diagnostics.last().expect("at least one iteration");
            println!(
                "{} iterations, final gamma = {:.4}, d_l1 = {:.4}",
                report.output.diagnostics.len(),
                last.gamma,
                last.d_l1
            );
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Simulate { config } => {
            let config = load_config(&config)?;
            if !config.io.mixture.is_file() {
                return Err(Failure::Usage(format!(
                    "mixture file {} not found; run `krig fit` first",
                    config.io.mixture.display()
                )));
            }
            let report = io::simulate(&config)?;
            println!(
                "{} realizations on {} cells",
                report.ensemble.len(),
                report.ensemble.cells()
            );
            for f in report.files.iter().take(3) {
                println!("wrote {}", f.display());
            }
            if report.files.len() > 3 {
                println!("wrote {} realization files", report.files.len() - 3);
            }
        }
        Command::Diagnose { mixture } => {
            if !mixture.is_file() {
                return Err(Failure::Usage(format!("mixture file {} not found", mixture.display())));
            }
            print!("{}", io::diagnose(&mixture)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error[usage]: {}", one_line(&msg));
            eprintln!("{}", Cli::command().render_usage());
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error[{}]: {}", e.kind(), one_line(&e.to_string()));
            ExitCode::from(1)
        }
    }
}
