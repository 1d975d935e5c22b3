use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polarstar::sim::DEFAULT_SEED;

#[derive(Debug, Parser)]
#[command(name = "polarstar", version, about = "Build, check and evaluate PolarStar network topologies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Construct a topology and write its graph.
    Generate {
        #[command(flatten)]
        topo: TopologyArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Run structural and factor-property checks on a graph.
    Verify(VerifyArgs),
    /// Best PolarStar per radix against Moore bound and baselines.
    DesignSpace(DesignSpaceArgs),
    /// Path lengths, bisection and link-failure resilience.
    Analyze(AnalyzeArgs),
    /// Cluster and bundle decomposition of a PolarStar.
    Layout {
        #[command(flatten)]
        topo: TopologyArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Flit-level traffic simulation.
    Simulate(SimulateArgs),
    /// Convert a graph file between formats.
    Export {
        #[command(flatten)]
        topo: TopologyArgs,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Destination file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Dot,
    Edgelist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TopologyKind {
    Polarstar,
    Er,
    Iq,
    Paley,
    Dragonfly,
    Hyperx,
    Fattree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SupernodeArg {
    Iq,
    Paley,
    Complete,
}

/// Where a graph comes from: a file, or construction parameters.
#[derive(Debug, Args)]
pub struct TopologyArgs {
    /// Graph file (edge list or JSON envelope).
    #[arg(long, conflicts_with = "topology")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub topology: Option<TopologyKind>,
    #[arg(long)]
    pub q: Option<u32>,
    /// Supernode degree.
    #[arg(long)]
    pub dprime: Option<usize>,
    #[arg(long, value_enum)]
    pub supernode: Option<SupernodeArg>,
    /// Router radix; picks the largest design when other parameters are absent.
    #[arg(long)]
    pub radix: Option<usize>,
    /// Endpoints per router for simulation; a third of the radix by default.
    #[arg(long)]
    pub endpoints: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    All,
    Diameter,
    Degree,
    Order,
    Regular,
    R,
    RStar,
    R1,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub topo: TopologyArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    pub check: Vec<Check>,
    /// Upper bound for diameter or degree checks (default 3 for diameter).
    #[arg(long)]
    pub max: Option<usize>,
    /// Expected vertex count for the order check.
    #[arg(long)]
    pub order: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DesignSpaceArgs {
    #[arg(long, conflicts_with_all = ["radix_min", "radix_max"])]
    pub radix: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub radix_min: usize,
    #[arg(long, default_value_t = 128)]
    pub radix_max: usize,
    /// List every feasible configuration instead of the best per radix.
    #[arg(long)]
    pub all: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Distances,
    Bisection,
    Faults,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub topo: TopologyArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "distances,bisection")]
    pub metrics: Vec<Metric>,
    /// Local-search restarts for the bisection estimate.
    #[arg(long, default_value_t = polarstar::analysis::DEFAULT_BISECTION_STARTS)]
    pub starts: usize,
    #[arg(long, default_value_t = polarstar::analysis::DEFAULT_FAULT_TRIALS)]
    pub trials: usize,
    /// Failure-fraction increment of the fault sweep.
    #[arg(long, default_value_t = polarstar::analysis::DEFAULT_FAULT_STEP)]
    pub step: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PatternArg {
    Uniform,
    Perm,
    Shuffle,
    Reverse,
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoutingArg {
    Min,
    Mmin,
    Ugal,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub topo: TopologyArgs,
    /// Campaign file (JSON, or TOML by `.toml` extension); overrides topology flags.
    #[arg(long, conflicts_with_all = ["topology", "input"])]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "uniform")]
    pub pattern: Vec<PatternArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "mmin")]
    pub routing: Vec<RoutingArg>,
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    pub load: Vec<f64>,
    /// Length of each of the two measurement windows.
    #[arg(long)]
    pub cycles: Option<u64>,
    #[arg(long)]
    pub warmup: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}
