//! `matscale`: scale matrices, generate lower-bound instances, decode them,
//! and run the numerical verification suites.
//!
//! Exit status: 0 on success, 1 when `verify` finds a failing check, 2 on
//! unreadable or invalid input, 3 when a solver aborts.

mod bench;
mod gen;
mod io;
mod scale;
mod verify;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Matrix scaling experiments.
#[derive(Debug, Parser)]
#[command(name = "matscale", version, about)]
struct Cli {
    /// Worker threads for `--trials` and `bench` fan-out.
    #[arg(long, global = true, env = "MATSCALE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scale a Matrix Market file to target marginals.
    Scale(scale::ScaleArgs),
    /// Generate a dense planted-sign instance.
    GenHard(gen::GenHardArgs),
    /// Generate a block-diagonal planted-sign instance.
    GenSparseHard(gen::GenSparseHardArgs),
    /// Generate a row-sum lower-bound instance.
    GenRowsumLb(gen::GenRowsumArgs),
    /// Decode planted signs from a scaling result and score them.
    Recover(gen::RecoverArgs),
    /// Run a lemma verification suite and write the report CSV.
    Verify(verify::VerifyArgs),
    /// Run a solver over a grid of sizes and precisions.
    Bench(bench::BenchArgs),
}

/// Why a command stopped early.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable, malformed or inconsistent input.
    Input(anyhow::Error),
    /// A solver or check aborted with an error.
    Solver(anyhow::Error),
    /// Every check ran but some failed.
    Checks { failed: usize, total: usize },
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Checks { .. } => 1,
            Failure::Input(_) => 2,
            Failure::Solver(_) => 3,
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

/// Tags an error with the exit status it maps to.
pub trait Classify<T> {
    fn input(self) -> CmdResult<T>;
    fn solver(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Input(e.into()))
    }

    fn solver(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Solver(e.into()))
    }
}

/// Shorthand for an input failure with a message.
pub fn bad_input<T>(msg: impl std::fmt::Display) -> CmdResult<T> {
    Err(Failure::Input(anyhow::anyhow!("{msg}")))
}

fn run(cli: Cli) -> CmdResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return bad_input("MATSCALE_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().solver()?;
    }
    match cli.command {
        Command::Scale(a) => scale::run(&a),
        Command::GenHard(a) => gen::run_hard(&a),
        Command::GenSparseHard(a) => gen::run_sparse_hard(&a),
        Command::GenRowsumLb(a) => gen::run_rowsum(&a),
        Command::Recover(a) => gen::run_recover(&a),
        Command::Verify(a) => verify::run(&a),
        Command::Bench(a) => bench::run(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Input(e) => eprintln!("error: {e:#}"),
                Failure::Solver(e) => eprintln!("solver error: {e:#}"),
                Failure::Checks { failed, total } => eprintln!("{failed} of {total} checks failed"),
            }
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn failure_codes() {
        assert_eq!(Failure::Checks { failed: 1, total: 2 }.code(), 1);
        assert_eq!(Failure::Input(anyhow::anyhow!("x")).code(), 2);
        assert_eq!(Failure::Solver(anyhow::anyhow!("x")).code(), 3);
    }
}
