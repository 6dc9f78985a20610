use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};
use netlwr_core::SolverKind;

#[derive(Debug, Parser)]
#[command(name = "netlwr", version, about = "Traffic flow on road networks with priority junctions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write density and junction-flux CSV files.
    Run(RunArgs),
    /// Run several junction solvers on the same scenario and grid.
    Compare(CompareArgs),
    /// Run the randomized wave-interaction and consistency sweeps.
    Verify(VerifyArgs),
    /// Solve a single junction Riemann problem and print the recursion.
    Riemann(RiemannArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["builtin", "scenario"])))]
pub struct SourceArgs {
    /// Built-in scenario (case1, case2, case3).
    #[arg(long)]
    pub builtin: Option<String>,
    /// Scenario TOML file.
    #[arg(long, value_name = "PATH")]
    pub scenario: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Uniform cell size for every road.
    #[arg(long)]
    pub dx: Option<f64>,
    /// Final time.
    #[arg(long = "T", value_name = "T")]
    pub t_final: Option<f64>,
    /// CFL safety factor in (0, 1].
    #[arg(long)]
    pub cfl: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Junction solver; defaults to the scenario's choice.
    #[arg(long)]
    pub solver: Option<SolverKind>,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Output directory.
    #[arg(long, env = "NETLWR_OUT", value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Comma-separated solvers; differences are reported against the first.
    #[arg(long, value_delimiter = ',', default_value = "prs,sprs")]
    pub solvers: Vec<SolverKind>,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Output directory.
    #[arg(long, env = "NETLWR_OUT", value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Seed for the random experiments.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of experiments per sweep.
    #[arg(long, default_value_t = 10_000)]
    pub sweeps: usize,
    /// Fail when a property is violated (default).
    #[arg(long, conflicts_with = "report_only")]
    pub assert: bool,
    /// Report the observed constants without failing.
    #[arg(long)]
    pub report_only: bool,
    #[arg(long, default_value_t = 2)]
    pub incoming: usize,
    #[arg(long, default_value_t = 2)]
    pub outgoing: usize,
    /// Allow zero entries in the random distribution matrices.
    #[arg(long)]
    pub zero_entries: bool,
    #[arg(long, default_value = "prs")]
    pub solver: SolverKind,
    /// Largest accepted cell change of a Godunov step started at the traces.
    #[arg(long, default_value_t = 1e-14)]
    pub fixed_point_tol: f64,
    /// Output directory.
    #[arg(long, env = "NETLWR_OUT", value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("problem").required(true).args(["builtin", "scenario", "matrix"])))]
pub struct RiemannArgs {
    /// Built-in scenario (case1, case2, case3).
    #[arg(long)]
    pub builtin: Option<String>,
    /// Scenario TOML file.
    #[arg(long, value_name = "PATH")]
    pub scenario: Option<PathBuf>,
    /// Junction id within the scenario; required when it has several.
    #[arg(long)]
    pub junction: Option<String>,
    /// Distribution matrix, rows separated by ';' and entries by ','.
    #[arg(long, requires_all = ["priority", "data"], allow_hyphen_values = true)]
    pub matrix: Option<String>,
    /// Priority vector, comma-separated.
    #[arg(long, value_delimiter = ',', requires = "matrix", allow_hyphen_values = true)]
    pub priority: Option<Vec<f64>>,
    /// Initial densities, incoming roads first, comma-separated.
    #[arg(long, value_delimiter = ',', requires = "matrix", allow_hyphen_values = true)]
    pub data: Option<Vec<f64>>,
    /// Junction solver; defaults to the scenario's choice or prs.
    #[arg(long)]
    pub solver: Option<SolverKind>,
}
