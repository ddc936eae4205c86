use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use membrane_lab::lab::{
    run_experiment, validate_experiment, write_report, ExperimentConfig, REGISTERED,
};
use membrane_lab::solver::WORKERS_ENV;

/// Numerical lab for the N-membrane obstacle problem.
#[derive(Parser)]
#[command(name = "membrane-lab", version, after_help = after_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file and write its report.
    Run {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// List the registered experiments.
    ListExperiments,
    /// Resolve a config and check its preconditions without solving.
    Validate { config: PathBuf },
}

fn after_help() -> String {
    format!(
        "Exit codes: 0 all verdicts pass, 2 some verdict fails, 1 error.\n\
         {WORKERS_ENV} sets the worker count; results do not depend on it."
    )
}

fn run(config: &Path, output: Option<PathBuf>) -> membrane_lab::Result<bool> {
    let cfg = ExperimentConfig::load(config)?;
    let bundle = run_experiment(&cfg)?;
    let dir = output.unwrap_or_else(|| PathBuf::from(&cfg.output));
    let paths = write_report(&bundle, &dir)?;
    for (name, pass) in &bundle.verdicts {
        println!("{} {name}", if *pass { "PASS" } else { "FAIL" });
    }
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(bundle.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, output } => run(&config, output),
        Command::ListExperiments => {
            for (name, about) in REGISTERED {
                println!("{name:<18} {about}");
            }
            Ok(true)
        }
        Command::Validate { config } => ExperimentConfig::load(&config).and_then(|cfg| {
            validate_experiment(&cfg)?;
            print!("{}", cfg.to_toml());
            Ok(true)
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
