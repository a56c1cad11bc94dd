use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod report;

use commands::{build, cover, dim, export, map, precode, space, verify};
use report::{exit_code, Outcome};

#[derive(Debug, Parser)]
#[command(name = "coarsetk", version, about = "Exact large-scale geometry checks on finite metric spaces")]
struct Cli {
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Search budgets, e.g. `cliques=200000,coloring=5000` or a single clique count.
    #[arg(long, global = true, env = coarsetk::budget::BUDGET_ENV)]
    budget: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate, import, inspect and validate spaces.
    #[command(subcommand)]
    Space(space::SpaceCommand),
    /// Cover invariants, disjoint families and expansions.
    #[command(subcommand)]
    Cover(cover::CoverCommand),
    /// Dimension witnesses.
    #[command(subcommand)]
    Dim(dim::DimCommand),
    /// Moduli and finite-to-one conditions of maps.
    #[command(subcommand)]
    Map(map::MapCommand),
    /// Precode structures, their ultrametrics and quotient maps.
    #[command(subcommand)]
    Precode(precode::PrecodeCommand),
    /// Inductive precode constructions.
    Build(build::BuildArgs),
    /// Acceptance sweeps.
    Verify(verify::VerifyArgs),
    /// Tree and distance-matrix exports of a precode.
    Export(export::ExportArgs),
}

fn run(cli: Cli) -> coarsetk::Result<Outcome> {
    let budgets = match &cli.budget {
        None => coarsetk::Budgets::default(),
        Some(spec) => coarsetk::Budgets::parse(spec)
            .ok_or_else(|| coarsetk::Error::Precondition(format!("cannot parse budget {spec:?}")))?,
    };
    match cli.command {
        Command::Space(c) => space::run(c),
        Command::Cover(c) => cover::run(c, budgets),
        Command::Dim(c) => dim::run(c),
        Command::Map(c) => map::run(c, budgets),
        Command::Precode(c) => precode::run(c, budgets),
        Command::Build(a) => build::run(a, budgets),
        Command::Verify(a) => verify::run(a, budgets),
        Command::Export(a) => export::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(outcome) => outcome.emit(),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
