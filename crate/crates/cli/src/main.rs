use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jetflow_cli::commands::{DEFAULT_EPS, DEFAULT_POINTS, DEFAULT_SEED, DEFAULT_TRIALS};
use jetflow_cli::{run, Command, RunOptions};

#[derive(Parser)]
#[command(
    name = "jetflow",
    version,
    about = "Constrained time-dependent mechanics on jet bundles"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Metric symmetry, compatibility, admissibility and frame checks at the probes.
    Validate(Flags),
    /// Constrained second-order trajectory with monitors, as CSV.
    Simulate(Flags),
    /// Invariant suite at random points.
    Check(Flags),
    /// Constrained Hamilton equations on the momentum phase space, as CSV.
    Hamsim(Flags),
    /// Vertical extension with a finite-difference comparison, as CSV.
    Jacobi(Flags),
    /// Energy, energy-balance residual and reaction power, as CSV.
    Energy(Flags),
}

#[derive(Args)]
struct Flags {
    /// Model file.
    model: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    t0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    /// Initial jet point `q1,..,qm,v1,..,vm`.
    #[arg(long, allow_hyphen_values = true)]
    state: Option<String>,
    /// Initial vertical vector `dq1,..,dqm,dp1,..,dpm` (jacobi).
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<String>,
    /// Finite-difference perturbation size (jacobi).
    #[arg(long, default_value_t = DEFAULT_EPS)]
    eps: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Random kernel vectors per point (check).
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    /// Random points (check).
    #[arg(long, default_value_t = DEFAULT_POINTS)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Decomposition method: metric, kkt or composite.
    #[arg(long, default_value = "metric")]
    method: String,
    /// Also write a gnuplot script next to the CSV.
    #[arg(long)]
    gnuplot: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, f) = match cli.command {
        Cmd::Validate(f) => (Command::Validate, f),
        Cmd::Simulate(f) => (Command::Simulate, f),
        Cmd::Check(f) => (Command::Check, f),
        Cmd::Hamsim(f) => (Command::Hamsim, f),
        Cmd::Jacobi(f) => (Command::Jacobi, f),
        Cmd::Energy(f) => (Command::Energy, f),
    };
    let opts = RunOptions {
        t0: f.t0,
        t1: f.t1,
        dt: f.dt,
        state: f.state,
        delta: f.delta,
        eps: f.eps,
        seed: f.seed,
        trials: f.trials,
        points: f.points,
        out: f.out,
        method: f.method,
        gnuplot: f.gnuplot,
    };
    let code = run(
        cmd,
        &f.model,
        &opts,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    ExitCode::from(code as u8)
}
