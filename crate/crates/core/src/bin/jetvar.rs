use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use jetvar::io::{parse_input, run, Command, LagrangianInput, RunOptions};
use jetvar::Error;

#[derive(Parser)]
#[command(
    name = "jetvar",
    version,
    about = "Cartan forms, projectability and constraint chains of jet-bundle Lagrangians"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Sub {
    /// Cartan coefficients and projectability level.
    Analyze {
        /// Lagrangian input file, or `-` for stdin.
        input: PathBuf,
    },
    /// Coefficients, projectability and the constraint chain.
    Constraints {
        /// Lagrangian input file, or `-` for stdin.
        input: PathBuf,
    },
    /// Checks the Hilbert Lagrangian pipeline against independent formulas.
    GravityVerify {
        /// Optional `builtin:hilbert` input file.
        input: Option<PathBuf>,
    },
    /// Compares against an oracle fixture file.
    FixturesCheck,
}

#[derive(clap::Args)]
struct Flags {
    /// Cap on constraint generations.
    #[arg(long, global = true)]
    max_generations: Option<usize>,
    /// Random points per identity check.
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Seed for the random points.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Metric dimension for gravity commands.
    #[arg(long, visible_alias = "d", global = true)]
    dim: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Fixture file for `fixtures-check`.
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    /// Include per-phase wall-clock times in the report.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

fn read_input(path: &PathBuf) -> Result<LagrangianInput, Error> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        s
    } else {
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?
    };
    parse_input(&text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let f = &cli.flags;
    let opts = RunOptions {
        max_generations: f.max_generations,
        points: f.points,
        seed: f.seed,
        dim: f.dim,
        fixtures: f.fixtures.clone(),
        timing: f.timing,
    };
    let result = (|| {
        let (command, input) = match &cli.command {
            Sub::Analyze { input } => (Command::Analyze, Some(input)),
            Sub::Constraints { input } => (Command::Constraints, Some(input)),
            Sub::GravityVerify { input } => (Command::GravityVerify, input.as_ref()),
            Sub::FixturesCheck => (Command::FixturesCheck, None),
        };
        let lagrangian = input.map(read_input).transpose()?;
        run(command, lagrangian.as_ref(), &opts)
    })();
    match result {
        Ok(doc) => {
            let out = match f.format {
                Format::Json => doc.to_json(),
                Format::Text => doc.to_text(),
            };
            print!("{out}");
            ExitCode::from(doc.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("jetvar: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
