use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use metacurv::chart::ChartFile;
use metacurv::cli::{self, Command, Options, EXIT_PRECONDITION};

#[derive(Parser)]
#[command(name = "metacurv", version, about = "Contravariant connections, metacurvature and action reconstruction on charts")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Antisymmetry, Jacobi, metric, split-form and action checks
    Validate(Common),
    /// Connection of the chart with torsion and curvature verdicts
    Connection(Common),
    /// Conditions H1-H3 and the T classification
    Hawkins(Common),
    /// Metacurvature components in the flat coframe
    Metacurvature(Common),
    /// Components of the tensor T in the flat coframe
    TensorT(Common),
    /// Reconstructs the Lie-algebra action behind the connection
    Reconstruct(Common),
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    chart: PathBuf,
    #[arg(long, value_enum, default_value_t = Output::Json)]
    output: Output,
    #[arg(long)]
    tol: Option<f64>,
    /// Nodes per axis of the reconstruction grid
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Output {
    Json,
    Text,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (cmd, c) = match args.command {
        Cmd::Validate(c) => (Command::Validate, c),
        Cmd::Connection(c) => (Command::Connection, c),
        Cmd::Hawkins(c) => (Command::Hawkins, c),
        Cmd::Metacurvature(c) => (Command::Metacurvature, c),
        Cmd::TensorT(c) => (Command::TensorT, c),
        Cmd::Reconstruct(c) => (Command::Reconstruct, c),
    };
    let file = match ChartFile::load(&c.chart) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("metacurv: {e}");
            return ExitCode::from(EXIT_PRECONDITION as u8);
        }
    };
    let opts = Options {
        tol: c.tol,
        grid: c.grid,
        step: c.step,
        seed: c.seed,
    };
    let out = cli::run(cmd, file, &opts);
    match c.output {
        Output::Json => println!("{}", out.json()),
        Output::Text => print!("{}", cli::render_text(&out.report)),
    }
    ExitCode::from(out.exit as u8)
}
