use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flockbench::scenario::{self, Scenario, StudyScenario};
use flockbench::FlockError;

#[derive(Parser)]
#[command(
    name = "flockbench",
    version,
    about = "Cucker-Smale flocking laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file, or preset:NAME for an embedded preset.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides the sampling seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for studies (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Suppress the report on standard output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write diagnostics and a report.
    Run,
    /// Evaluate the flocking conditions on the initial data only.
    Check,
    /// Run a particle-number convergence study.
    Study,
    /// List the embedded presets.
    Presets,
}

fn execute(cli: &Cli) -> Result<String, FlockError> {
    if let Command::Presets = cli.command {
        let names: Vec<&str> = scenario::PRESETS
            .iter()
            .chain(scenario::STUDY_PRESETS)
            .map(|(n, _)| *n)
            .collect();
        return Ok(names.join("\n") + "\n");
    }
    let arg = cli.config.as_deref().ok_or_else(|| {
        FlockError::Config("--config PATH or --config preset:NAME is required".into())
    })?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(FlockError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| FlockError::Config(e.to_string()))?;
    }
    let (text, base) = scenario::load_config(arg)?;
    match cli.command {
        Command::Run => {
            let s = Scenario::from_toml(&text, &base, cli.seed)?;
            Ok(scenario::run(&s, &cli.out)?.report)
        }
        Command::Check => scenario::check(&Scenario::from_toml(&text, &base, cli.seed)?),
        Command::Study => {
            let s = StudyScenario::from_toml(&text, cli.seed)?;
            Ok(scenario::study_summary(&scenario::study(&s, &cli.out)?))
        }
        Command::Presets => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(report) => {
            if !cli.quiet {
                print!("{report}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", scenario::error_line(&e));
            ExitCode::from(scenario::exit_code(&e) as u8)
        }
    }
}
