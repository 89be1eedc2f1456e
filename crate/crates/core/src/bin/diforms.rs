use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use diforms::cli::{self, CliError, Options, Outcome, Suite, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "diforms", version, about = "Quadratic forms on atomic direct integrals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral representation report for every sample section of a model.
    Represent {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run one property suite on a model.
    Check {
        config: PathBuf,
        #[arg(long, value_enum)]
        suite: Suite,
        #[command(flatten)]
        common: Common,
    },
    /// Isotypic decomposition and invariant-form report for a finite group.
    Group {
        /// Cayley table file or built-in name (Z2, Z3, Z4, Z6, S3, D4, Q8).
        cayley: String,
        /// JSON file with `coefficients` and optional `left_coefficients`.
        #[arg(long)]
        coefficients: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Omit the timestamp so reports are byte-identical across runs.
    #[arg(long)]
    no_timestamp: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn options(&self) -> Options {
        Options {
            tolerance: self.tolerance,
            seed: self.seed,
            timestamp: !self.no_timestamp,
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let (outcome, out): (Outcome, Option<PathBuf>) = match cli.command {
        Command::Represent { config, common } => (cli::cmd_represent(&config, &common.options())?, common.out),
        Command::Check { config, suite, common } => (cli::cmd_check(&config, suite, &common.options())?, common.out),
        Command::Group {
            cayley,
            coefficients,
            common,
        } => (
            cli::cmd_group(&cayley, coefficients.as_deref(), &common.options())?,
            common.out,
        ),
    };
    cli::emit(&outcome, out.as_deref())?;
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
