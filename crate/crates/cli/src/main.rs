use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scalar_ald::scenario::{run, RunKind, RunOptions, RunReport, Scenario};
use scalar_ald::Error;

#[derive(Parser)]
#[command(name = "scalar-ald", about = "Semiclassical and stochastic scalar radiation reaction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the renormalization coefficient table for the scenario's field.
    Coeffs(RunArgs),
    /// Run a scenario as written.
    Run(RunArgs),
    /// Run the invariant suite for the scenario's field.
    Check(RunArgs),
    /// Print the version.
    Version,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    allow_unstable: bool,
}

const VALIDATION: u8 = 2;
const NUMERICAL: u8 = 3;
const CHECK_FAILED: u8 = 4;

fn execute(args: &RunArgs, kind: Option<RunKind>) -> Result<RunReport, Error> {
    let text = std::fs::read_to_string(&args.scenario).map_err(|e| Error::Config(format!("{}: {e}", args.scenario.display())))?;
    let mut scenario = Scenario::parse(&text, args.allow_unstable)?;
    if let Some(kind) = kind {
        scenario.kind = kind;
    }
    if args.threads == Some(0) {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    let opts = RunOptions {
        seed: args.seed,
        out_dir: args.out.clone(),
        threads: args.threads,
    };
    run(&scenario, &opts)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, kind) = match &cli.command {
        Command::Version => {
            println!("scalar-ald {}", env!("CARGO_PKG_VERSION"));
            return ExitCode::SUCCESS;
        }
        Command::Coeffs(a) => (a, Some(RunKind::Coeffs)),
        Command::Run(a) => (a, None),
        Command::Check(a) => (a, Some(RunKind::Check)),
    };
    match execute(args, kind) {
        Ok(report) => {
            println!("{}", report.summary.trim_end());
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(CHECK_FAILED)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { VALIDATION } else { NUMERICAL })
        }
    }
}
