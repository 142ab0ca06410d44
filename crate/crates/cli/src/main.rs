use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use dirform_cli::config::ExperimentConfig;
use dirform_cli::{cmd_audit, cmd_flow, cmd_slopes, Outcome, EXIT_OK, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "dirform", version, about = "Audits, gradient flows and slope enclosures for 2-homogeneous Dirichlet forms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the characterization inequalities and write report.json/report.txt.
    Audit(Args),
    /// Run implicit Euler and write trajectory.csv/trajectory.json.
    Flow(Args),
    /// Enclose directional slopes and write enclosures.json.
    Slopes(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Proximal solver tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the config, with flags applied, as TOML and exit.
    #[arg(long)]
    dump_config: bool,
}

fn emit(o: Outcome) -> ExitCode {
    print!("{}", o.stdout);
    eprint!("{}", o.stderr);
    ExitCode::from(o.status as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE as u8),
            };
        }
    };
    let (args, run): (&Args, fn(&ExperimentConfig, &std::path::Path) -> Outcome) = match &cli.command {
        Command::Audit(a) => (a, cmd_audit),
        Command::Flow(a) => (a, cmd_flow),
        Command::Slopes(a) => (a, cmd_slopes),
    };
    let mut config = match ExperimentConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(tol) = args.tol {
        config.solver.tolerance = tol;
    }
    if let Some(n) = args.max_iters {
        config.solver.max_iterations = n;
    }
    if let Some(out) = &args.out {
        config.out = Some(out.clone());
    }
    if let Err(e) = config.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE as u8);
    }
    if args.dump_config {
        print!("{}", config.to_toml());
        return ExitCode::from(EXIT_OK as u8);
    }
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from("dirform-out"));
    emit(run(&config, &out))
}
