use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use otf_core::config::{Algorithm, RunParams};
use otf_core::ObjectiveId;

#[derive(Debug, Parser)]
#[command(name = "otf", version, about = "Optimizers and samplers with on-the-fly parameter control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its record as JSON.
    #[command(allow_negative_numbers = true)]
    Run(RunArgs),
    /// Run repetitions under the parameter controller and write the table.
    #[command(allow_negative_numbers = true)]
    Tune(TuneArgs),
    /// Run independent seeded repetitions and write the result table.
    #[command(allow_negative_numbers = true)]
    Batch(BatchArgs),
    /// Export a record as JSON or as a CSV table.
    Report(ReportArgs),
    /// Render a record as an SVG plot.
    Plot(PlotArgs),
    /// Serve the live tuning API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    Gd,
    Nm,
    Mh,
    Sa,
    Ea,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Gd => Algorithm::Gd,
            AlgoArg::Nm => Algorithm::Nm,
            AlgoArg::Mh => Algorithm::Mh,
            AlgoArg::Sa => Algorithm::Sa,
            AlgoArg::Ea => Algorithm::Ea,
        }
    }
}

fn parse_objective(s: &str) -> Result<ObjectiveId, String> {
    s.parse::<ObjectiveId>().map_err(|e| e.to_string())
}

/// Comma-separated coordinates such as `-3,2`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitPoint(pub Vec<f64>);

fn parse_point(s: &str) -> Result<InitPoint, String> {
    s.split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| format!("`{c}`: {e}")))
        .collect::<Result<_, _>>()
        .map(InitPoint)
}

fn parse_flag(s: &str) -> Result<bool, String> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(format!("expected 0 or 1, got `{s}`")),
    }
}

/// Algorithm selection shared by run, tune and batch.
#[derive(Debug, Args)]
pub struct Target {
    #[arg(long, value_enum)]
    pub algo: AlgoArg,
    /// Objective id; defaults to the algorithm's paired objective.
    #[arg(long, value_parser = parse_objective)]
    pub objective: Option<ObjectiveId>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl Target {
    pub fn algorithm(&self) -> Algorithm {
        self.algo.into()
    }

    pub fn objective(&self) -> ObjectiveId {
        self.objective.unwrap_or_else(|| self.algorithm().default_objective())
    }
}

/// Per-algorithm settings; unset flags take the defaults.
#[derive(Debug, Default, Args)]
pub struct AlgoFlags {
    /// Initial point as comma-separated coordinates (gd, nm, mh, sa).
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub init: Option<InitPoint>,
    /// Gradient-descent step size.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Gradient-descent iterations.
    #[arg(long)]
    pub iters: Option<u64>,
    /// Nelder-Mead convergence tolerance.
    #[arg(long)]
    pub atol: Option<f64>,
    #[arg(long)]
    pub maxiter: Option<u64>,
    /// Chain length for mh and sa.
    #[arg(long)]
    pub n: Option<u64>,
    /// Proposal std (mh, sa) or mutation std (ea).
    #[arg(long)]
    pub std: Option<f64>,
    /// Initial annealing temperature.
    #[arg(long)]
    pub t0: Option<f64>,
    /// Geometric cooling factor.
    #[arg(long)]
    pub cool: Option<f64>,
    #[arg(long)]
    pub pop: Option<usize>,
    #[arg(long)]
    pub gens: Option<u64>,
    /// Recombination on (1) or off (0).
    #[arg(long, value_parser = parse_flag)]
    pub recomb: Option<bool>,
    /// Mutation on (1) or off (0).
    #[arg(long = "mut", value_parser = parse_flag)]
    pub mutate: Option<bool>,
}

impl AlgoFlags {
    pub fn to_params(&self, algorithm: Algorithm) -> RunParams {
        let (proposal_std, mutation_std) = match algorithm {
            Algorithm::Ea => (None, self.std),
            _ => (self.std, None),
        };
        RunParams {
            init: self.init.as_ref().map(|p| p.0.clone()),
            alpha: self.alpha,
            iterations: self.iters,
            clip_to_domain: None,
            atol: self.atol,
            maxiter: self.maxiter,
            n_iterations: self.n,
            proposal_std,
            t0: self.t0,
            cooling: self.cool,
            pop_size: self.pop,
            generations: self.gens,
            mutation_std,
            recomb: self.recomb,
            mutate: self.mutate,
            parent_fraction: None,
            replacement_count: None,
        }
    }
}

/// Flag that sets a configuration field, for error messages.
pub fn flag_for(field: &str) -> &str {
    match field {
        "alpha" => "--alpha",
        "iterations" => "--iters",
        "atol" => "--atol",
        "maxiter" => "--maxiter",
        "n_iterations" => "--n",
        "proposal_std" | "mutation_std" => "--std",
        "t0" => "--t0",
        "cooling" => "--cool",
        "pop_size" => "--pop",
        "generations" => "--gens",
        "recomb" => "--recomb",
        "mutate" => "--mut",
        "objective" | "target" => "--objective",
        "init" => "--init",
        "reps" => "--reps",
        "kind" => "--kind",
        "replacement_count" => "--pop",
        other => other,
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub target: Target,
    #[command(flatten)]
    pub flags: AlgoFlags,
    #[arg(long)]
    pub out: PathBuf,
    /// Run on a tuning service at this URL instead of in-process.
    #[arg(long)]
    pub server: Option<String>,
    /// Per-iteration delay requested from the service.
    #[arg(long, default_value_t = 0, requires = "server")]
    pub tick_ms: u64,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub target: Target,
    #[command(flatten)]
    pub flags: AlgoFlags,
    #[arg(long, default_value_t = 20)]
    pub reps: u32,
    /// Table CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Adjustment log (JSON lines) path.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Loss at or below which a repetition counts as converged.
    #[arg(long)]
    pub target_loss: Option<f64>,
    #[arg(long)]
    pub iteration_cap: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    #[command(flatten)]
    pub target: Target,
    #[command(flatten)]
    pub flags: AlgoFlags,
    #[arg(long, default_value_t = 20)]
    pub reps: u32,
    /// Result table CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Mean/std summary JSON path.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Table {
    /// One result row in the algorithm's table schema.
    Summary,
    /// iteration,value per trace event.
    Trace,
    /// bin_x,bin_y,count of accepted sampler points.
    Histogram,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: Format,
    #[arg(long)]
    pub out: PathBuf,
    /// Which CSV table to export.
    #[arg(long, value_enum, default_value_t = Table::Summary)]
    pub table: Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKindArg {
    Loss,
    Temperature,
    Heatmap,
    Fitness,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub kind: PlotKindArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub title: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    #[arg(long, default_value_t = otf_core::api::DEFAULT_TICK_MS)]
    pub tick_ms: u64,
    /// Directory of console assets to serve under `/`.
    #[arg(long)]
    pub assets: Option<PathBuf>,
}
