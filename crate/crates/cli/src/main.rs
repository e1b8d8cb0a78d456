//! `xhoi`: generate synthetic data, run permutation-free interaction tests,
//! benchmark them against permutation baselines, rank causal DAGs and
//! profile interaction orders across variable groups.
//!
//! Exit codes: 0 when the command completed (whether or not a test rejected),
//! 2 for invalid input, 3 for numerical failures.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<xhoi::Error> for CliError {
    fn from(e: xhoi::Error) -> Self {
        match e {
            xhoi::Error::NotPsd { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "xhoi", version, about = "Permutation-free kernel tests for high-order interactions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV plus a variable manifest.
    Generate(GenerateArgs),
    /// Run one test on a CSV dataset and write a JSON report.
    Test(TestArgs),
    /// Time permutation-free tests against permutation baselines.
    Bench(BenchArgs),
    /// Rank candidate DAGs by residual independence.
    Dag(DagArgs),
    /// Rejection rates of k-way interaction tests within variable groups.
    Profile(ProfileArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Generator {
    Mvg,
    Xor,
    VstructureA,
    VstructureB,
    AnmDag,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub kind: Generator,
    /// Total number of samples.
    #[arg(long, default_value_t = 512)]
    pub n: usize,
    /// Number of variables (mvg, xor, anm-dag).
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    /// Correlated block of 1-based variables, comma separated; repeatable (mvg).
    #[arg(long = "blocks")]
    pub blocks: Vec<String>,
    /// Within-block correlation (mvg).
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Share of samples following the XOR rule (xor).
    #[arg(long, default_value_t = 1.0)]
    pub proportion: f64,
    /// Dimension of each variable (vstructure-a, vstructure-b).
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// Edges such as `1>2,2>3` (anm-dag); defaults to the chain-ordered
    /// fully connected DAG on 4 nodes.
    #[arg(long)]
    pub dag: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; the manifest is written next to it with extension `.manifest`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelName {
    Gaussian,
    Laplace,
    Rq,
}

/// Kernel options shared by every data-consuming command.
#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long, value_enum, default_value_t = KernelName::Gaussian)]
    pub kernel: KernelName,
    /// `median` or a positive number.
    #[arg(long, default_value = "median")]
    pub bandwidth: String,
    /// Shape parameter of the rational-quadratic kernel.
    #[arg(long, default_value_t = 1.0)]
    pub rq_alpha: f64,
}

/// Input data options.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV with a header row; one column per scalar dimension.
    #[arg(long)]
    pub data: PathBuf,
    /// `variable: col1,col2` lines. Defaults to `<data>.manifest` if present,
    /// else every column is its own variable.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestName {
    Dhsic,
    Lancaster,
    Streitberg,
    Pairwise,
    PermDhsic,
    PermSubtest,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[arg(long, value_enum)]
    pub test: TestName,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Stop composite tests at the first non-rejecting subtest.
    #[arg(long)]
    pub early_stop: bool,
    /// Test every subtest at alpha divided by the number of subtests.
    #[arg(long)]
    pub bonferroni: bool,
    /// Shuffle samples with this seed before splitting.
    #[arg(long)]
    pub shuffle: Option<u64>,
    /// Number of permutations for the permutation baselines.
    #[arg(long, default_value_t = 100)]
    pub perms: usize,
    /// Seed for the permutation baselines.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Block of 1-based variables for perm-subtest, e.g. `1,2`.
    #[arg(long)]
    pub partition: Option<String>,
    /// JSON report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    /// Joint independence on correlated Gaussians: permutation-free vs permutation.
    DhsicVsPerm,
    /// Complete factorisation test on 5-way XOR data over sample sizes.
    StreitbergN,
    /// Complete factorisation test on XOR data over dimensions at n = 100.
    StreitbergD,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub scenario: Scenario,
    /// Total sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Numbers of variables, comma separated (streitberg-d).
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, default_value_t = 100)]
    pub perms: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParentKernelName {
    Additive,
    Joint,
}

#[derive(Debug, Args)]
pub struct DagArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// `fully-connected`, or a file with one candidate per line (`1>2,2>3`).
    #[arg(long, default_value = "fully-connected")]
    pub candidates: String,
    /// True DAG as `1>2,2>3`; adds structural Hamming distances to the report.
    #[arg(long)]
    pub truth: Option<String>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Ridge penalty of the residual regressions.
    #[arg(long, default_value_t = xhoi::apps::DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = ParentKernelName::Additive)]
    pub parent_kernel: ParentKernelName,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// `label: name1,name2` lines naming variables or columns.
    #[arg(long)]
    pub groups: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    pub orders: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub n_sets: usize,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output prefix: writes `<prefix>.csv` and `<prefix>.json`.
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Test(a) => commands::test(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Dag(a) => commands::dag(&a),
        Command::Profile(a) => commands::profile(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
