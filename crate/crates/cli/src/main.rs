use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nfchan::{bundled, load_scenario, run_experiment, verify, write_outputs, Error, Experiment, RunOptions};

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

#[derive(Parser)]
#[command(name = "nfchan", version, about = "Near-field channel experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write CSV tables plus a JSON sidecar.
    Run {
        /// regimes | pdf | correlation | length-correlation | sinr-tradeoff | smr | sumrate
        experiment: String,
        /// Scenario JSON file, or the name of a bundled scenario (paper_va, paper_vb, two_user_line).
        #[arg(long)]
        scenario: String,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Fewer realizations and a coarser integration grid.
        #[arg(long)]
        fast: bool,
    },
    /// Run the acceptance checks and print one line per criterion.
    Verify {
        #[arg(long)]
        fast: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Criterion ids to run (default: all).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
    /// Print a bundled scenario to stdout.
    Scenario { name: String },
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_VALIDATION,
    }
}

fn resolve_scenario(arg: &str) -> nfchan::Result<nfchan::ScenarioConfig> {
    let path = PathBuf::from(arg);
    if path.exists() {
        load_scenario(&path)
    } else if bundled::ALL.iter().any(|(n, _)| *n == arg || n.trim_end_matches(".json") == arg) {
        let cfg = bundled::load(arg)?;
        cfg.validate()?;
        Ok(cfg)
    } else {
        Err(Error::Validation(format!("scenario file '{arg}' not found")))
    }
}

fn run(cli: Cli) -> Result<(), u8> {
    match cli.command {
        Command::Run { experiment, scenario, out, seed, fast } => {
            let fail = |e: Error| {
                eprintln!("nfchan: {e}");
                exit_for(&e)
            };
            let exp: Experiment = experiment.parse().map_err(fail)?;
            let cfg = resolve_scenario(&scenario).map_err(fail)?;
            let opts = RunOptions { seed, fast };
            let output = run_experiment(exp, &cfg, &opts).map_err(fail)?;
            let written = write_outputs(&out, &cfg, &opts, &output).map_err(fail)?;
            for p in written {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Verify { fast, seed, only } => {
            let results = verify::run(&only, &RunOptions { seed, fast }).map_err(|e| {
                eprintln!("nfchan: {e}");
                exit_for(&e)
            })?;
            for r in &results {
                println!("{}", r.line());
            }
            if results.iter().all(|r| r.passed) {
                Ok(())
            } else {
                Err(EXIT_ACCEPTANCE)
            }
        }
        Command::Scenario { name } => {
            let key = if name.ends_with(".json") { name.clone() } else { format!("{name}.json") };
            match bundled::ALL.iter().find(|(n, _)| *n == key) {
                Some((_, text)) => {
                    print!("{text}");
                    Ok(())
                }
                None => {
                    eprintln!("nfchan: no bundled scenario '{name}'");
                    Err(EXIT_VALIDATION)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_VALIDATION) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}
