use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pcsft_cli::{
    load_plan, run, Command, CommandError, Format, EXIT_CHECK_FAILURE, EXIT_CONFIG_ERROR,
    EXIT_PASS,
};

#[derive(Parser)]
#[command(name = "pcsft", version, about = "Seeded experiments on Gaussian phase-space fields")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Run the property suite and report every check.
    Verify,
    /// Classical (exact and sampled) against quantum averages.
    Correspondence,
    /// Classical/quantum gap over the h grid with a log-log slope fit.
    Scaling,
    /// Point trajectory, dispersion and observable average over time.
    Dynamics,
    /// Sampled fields evolved in time against the exact covariance.
    Ensemble,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Verify => Command::Verify,
            Cmd::Correspondence => Command::Correspondence,
            Cmd::Scaling => Command::Scaling,
            Cmd::Dynamics => Command::Dynamics,
            Cmd::Ensemble => Command::Ensemble,
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes())
        }
    }
}

fn summary_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".summary.json");
    PathBuf::from(name)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let plan = match load_plan(cli.config.as_deref(), cli.seed) {
        Ok(plan) => plan,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG_ERROR as u8);
        }
    };
    let output = match run(cli.command.into(), &plan, cli.format) {
        Ok(o) => o,
        Err(e @ CommandError::Config(_)) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG_ERROR as u8);
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CHECK_FAILURE as u8);
        }
    };
    let written = write_output(cli.out.as_deref(), &output.body).and_then(|()| {
        match (&output.summary, cli.out.as_deref()) {
            (Some(s), Some(out)) => std::fs::write(summary_path(out), s),
            (Some(s), None) => {
                eprint!("{s}");
                Ok(())
            }
            (None, _) => Ok(()),
        }
    });
    if let Err(e) = written {
        eprintln!("cannot write output: {e}");
        return ExitCode::from(EXIT_CHECK_FAILURE as u8);
    }
    if output.passed {
        ExitCode::from(EXIT_PASS as u8)
    } else {
        eprintln!("one or more checks failed");
        ExitCode::from(EXIT_CHECK_FAILURE as u8)
    }
}
