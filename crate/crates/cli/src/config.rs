//! Command-line arguments and the run configuration they map to.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Check the model axioms (conservative rates, discount, initial law).
    Validate,
    /// Evaluate the Lyapunov drift inequality over all pairs or a state grid.
    DriftCheck,
    /// Solve the occupation-measure LP for an optimal (constrained) policy.
    Solve,
    /// Exact value, costs and occupation measure of a given stationary policy.
    EvalPolicy,
    /// Monte Carlo estimate of the discounted reward under a policy.
    Simulate,
    /// Occupation measure of a policy, optionally with a Monte Carlo estimate.
    Occupation,
    /// Write the constrained optimum as a mixture of deterministic policies.
    Decompose,
    /// Closed forms, residual profiles and drift checks of the benchmarks.
    Bench,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::DriftCheck => "drift-check",
            Command::Solve => "solve",
            Command::EvalPolicy => "eval-policy",
            Command::Simulate => "simulate",
            Command::Occupation => "occupation",
            Command::Decompose => "decompose",
            Command::Bench => "bench",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "ctmdp", version, about = "Constrained discounted continuous-time MDPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// Finite model in the JSON interchange format.
    #[arg(long, global = true, conflicts_with = "example")]
    pub model: Option<PathBuf>,
    /// Benchmark model id (1, 2 or 3).
    #[arg(long, global = true)]
    pub example: Option<u8>,
    /// Benchmark parameter overrides, e.g. `p=1,delta=1,alpha=2`.
    #[arg(long, global = true)]
    pub params: Option<String>,
    /// Stationary policy file: `{"probs": [[...]]}` or `{"choice": [labels]}`.
    #[arg(long, global = true)]
    pub policy: Option<PathBuf>,
    /// Master seed of the simulation streams.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Number of simulated trajectories.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Truncation error target used to pick the simulation horizon.
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Simulation horizon; overrides `--eps`.
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// Replacement constraint bounds `d_1,...,d_N`.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub constraints: Option<Vec<f64>>,
    /// Tabulated Lyapunov function for `drift-check` on a finite model.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub w: Option<Vec<f64>>,
    /// Drift rate for `drift-check`.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    /// Half-width of the state grid for benchmark checks.
    #[arg(long, global = true)]
    pub x_max: Option<f64>,
    /// Number of grid states for benchmark checks.
    #[arg(long, global = true)]
    pub nx: Option<usize>,
    /// Add a Monte Carlo estimate to `occupation`.
    #[arg(long, global = true)]
    pub mc: bool,
    /// Include wall-clock timings (makes reports run-dependent).
    #[arg(long, global = true)]
    pub timings: bool,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

/// Everything a run depends on. Echoed verbatim in the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub model: Option<PathBuf>,
    pub example: Option<u8>,
    pub params: Option<String>,
    pub policy: Option<PathBuf>,
    pub seed: u64,
    pub n: Option<usize>,
    pub eps: Option<f64>,
    pub horizon: Option<f64>,
    pub constraints: Option<Vec<f64>>,
    pub w: Option<Vec<f64>>,
    pub rho: Option<f64>,
    pub x_max: Option<f64>,
    pub nx: Option<usize>,
    pub mc: bool,
    pub timings: bool,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            model: None,
            example: None,
            params: None,
            policy: None,
            seed: 0,
            n: None,
            eps: None,
            horizon: None,
            constraints: None,
            w: None,
            rho: None,
            x_max: None,
            nx: None,
            mc: false,
            timings: false,
            out: None,
            format: Format::Json,
        }
    }
}

impl From<Cli> for RunConfig {
    fn from(cli: Cli) -> Self {
        let o = cli.options;
        Self {
            command: cli.command,
            model: o.model,
            example: o.example,
            params: o.params,
            policy: o.policy,
            seed: o.seed,
            n: o.n,
            eps: o.eps,
            horizon: o.horizon,
            constraints: o.constraints,
            w: o.w,
            rho: o.rho,
            x_max: o.x_max,
            nx: o.nx,
            mc: o.mc,
            timings: o.timings,
            out: o.out,
            format: o.format,
        }
    }
}
