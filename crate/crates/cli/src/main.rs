use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use interplab_cli::{run, Command, EXIT_IO, EXIT_SCHEMA};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    Kfunc,
    InterpNorm,
    MeanMin,
    ComplexCheck,
    SteinCheck,
    WeightedDemo,
    SectorScan,
    SemigroupScan,
    Rademacher,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Command {
        match s {
            Sub::Kfunc => Command::Kfunc,
            Sub::InterpNorm => Command::InterpNorm,
            Sub::MeanMin => Command::MeanMin,
            Sub::ComplexCheck => Command::ComplexCheck,
            Sub::SteinCheck => Command::SteinCheck,
            Sub::WeightedDemo => Command::WeightedDemo,
            Sub::SectorScan => Command::SectorScan,
            Sub::SemigroupScan => Command::SemigroupScan,
            Sub::Rademacher => Command::Rademacher,
        }
    }
}

/// Numerical real and complex interpolation experiments.
#[derive(Debug, Parser)]
#[command(name = "interplab", version)]
struct Args {
    #[arg(value_enum)]
    subcommand: Sub,
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the report and tables.
    #[arg(long, default_value = "interplab-out")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_SCHEMA as u8 } else { 0 });
        }
    };
    if let Ok(v) = std::env::var("INTERPLAB_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("INTERPLAB_THREADS: expected a positive integer, got {v:?}");
                return ExitCode::from(EXIT_SCHEMA as u8);
            }
        }
    }
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", args.config.display());
            return ExitCode::from(EXIT_IO as u8);
        }
    };
    let status = run(args.subcommand.into(), &text, args.seed, &args.out_dir);
    eprintln!("{}", status.message);
    ExitCode::from(status.code as u8)
}
