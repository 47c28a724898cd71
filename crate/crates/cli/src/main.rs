//! `hexamer` — batch front end for the circuit, dynamics, noise, ringdown,
//! disorder and estimation models. Every subcommand writes CSV/JSON files
//! into `--out` and prints a short summary.

mod cmd;
mod ctx;

use clap::{Parser, Subcommand};
use hexamer::error::ErrorKind;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "hexamer", version, about = "Multimode optomechanics toolkit for a six-site microwave ring")]
struct Cli {
    /// Device configuration: a JSON file or the name of a built-in device.
    #[arg(long, global = true, default_value = "hexamer_paper")]
    config: String,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Random seed; defaults to the configuration's run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for grids and Monte Carlo draws (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Cooperativity grid `start:stop:count[:log|lin]`.
    #[arg(long, global = true)]
    grid: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Microwave normal modes, feedline rates and tight-binding couplings.
    Circuit(cmd::circuit::Args),
    /// Collective eigenmodes over the cooperativity grid and OMIT traces.
    Omit(cmd::omit::Args),
    /// Collective-mode occupations under sideband cooling.
    Cool(cmd::cool::Args),
    /// Simulated ringdown and modeshape extraction of one collective mode.
    Modeshape(cmd::modeshape::Args),
    /// Monte Carlo statistics of microwave or mechanical frequency disorder.
    Disorder(cmd::disorder::Args),
    /// Fit measured (or shipped synthetic) traces.
    Fit(cmd::fit::Args),
    /// Occupation from sideband asymmetry.
    Asym(cmd::asym::Args),
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Io => 1,
        ErrorKind::Config => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Fit => 4,
    }
}

fn run(cli: Cli) -> hexamer::Result<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| hexamer::Error::Config(format!("worker pool: {e}")))?;
    }
    let name = match &cli.command {
        Command::Circuit(_) => "circuit",
        Command::Omit(_) => "omit",
        Command::Cool(_) => "cool",
        Command::Modeshape(_) => "modeshape",
        Command::Disorder(_) => "disorder",
        Command::Fit(_) => "fit",
        Command::Asym(_) => "asym",
    };
    let ctx = ctx::Ctx::new(&cli.config, cli.out, cli.seed, cli.grid, name)?;
    match cli.command {
        Command::Circuit(a) => cmd::circuit::run(&ctx, &a),
        Command::Omit(a) => cmd::omit::run(&ctx, &a),
        Command::Cool(a) => cmd::cool::run(&ctx, &a),
        Command::Modeshape(a) => cmd::modeshape::run(&ctx, &a),
        Command::Disorder(a) => cmd::disorder::run(&ctx, &a),
        Command::Fit(a) => cmd::fit::run(&ctx, &a),
        Command::Asym(a) => cmd::asym::run(&ctx, &a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
