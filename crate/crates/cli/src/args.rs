use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "hedgegraph", version, about = "Signed-network portfolio research toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Normalize raw price files into a wide panel CSV.
    Ingest(IngestArgs),
    /// Generate a seeded synthetic price panel.
    Synth(SynthArgs),
    /// Hedge scores for one window.
    Hedge(HedgeArgs),
    /// Top-K hedge selection for one window.
    Select(SelectArgs),
    /// Portfolio weights for one window.
    Allocate(AllocateArgs),
    /// Year-over-year backtest grid.
    Backtest(BacktestArgs),
    /// Signed correlation graph, triangle census and balance check.
    Graph(GraphArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    Wide,
    PerTicker,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Returns {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Mp,
    Mpns,
    Ewp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsilonRuleArg {
    MaxMean,
    Q75Mean,
    Value,
}

#[derive(Debug, Args, Serialize)]
pub struct Output {
    /// Directory receiving all output files.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PanelInput {
    /// Wide price CSV with a leading `Date` column.
    #[arg(long)]
    pub panel: PathBuf,
    #[arg(long, value_enum, default_value = "linear")]
    pub returns: Returns,
}

#[derive(Debug, Args, Serialize)]
pub struct Objective {
    /// Risk aversion; switches MP/MPNS to the risk-aversion formulation.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum, default_value = "max-mean")]
    pub epsilon_rule: EpsilonRuleArg,
    /// Target daily return, required with `--epsilon-rule value`.
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    /// Add a small ridge to the covariance diagonal before allocating.
    #[arg(long)]
    pub jitter: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "wide")]
    pub layout: Layout,
    /// Price column of per-ticker files (matched case-insensitively).
    #[arg(long, default_value = "Close")]
    pub price_column: String,
    /// Write the panel here instead of `<out-dir>/panel.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub assets: usize,
    #[arg(long, default_value_t = 504)]
    pub days: usize,
    /// Pairwise correlation of every asset pair.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub rho: f64,
    /// Block sizes for a block-correlated panel; overrides `--rho`.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub blocks: Vec<usize>,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub within: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub between: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub drift: f64,
    #[arg(long, default_value_t = 0.01)]
    pub vol: f64,
    /// First return date (YYYY-MM-DD).
    #[arg(long, default_value = "2020-01-01")]
    pub start: String,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct HedgeArgs {
    #[command(flatten)]
    pub input: PanelInput,
    /// `YYYY` or `FROM:TO`; the whole panel when omitted.
    #[arg(long)]
    pub window: Option<String>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    #[command(flatten)]
    pub input: PanelInput,
    #[arg(long)]
    pub window: Option<String>,
    /// Selection size; every asset with a positive product when omitted.
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct AllocateArgs {
    #[command(flatten)]
    pub input: PanelInput,
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Restrict the universe to the top-K hedge selection first.
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub objective: Objective,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub input: PanelInput,
    /// Calendar years: `2020:2024` or a list `2020 2021 2022`.
    #[arg(long, num_args = 1.., required = true)]
    pub years: Vec<String>,
    /// Any of pm+mp, pm+mpns, pm+ewp, mp, mpns, ewp.
    #[arg(long, num_args = 1.., required = true, value_delimiter = ',')]
    pub methods: Vec<String>,
    /// Selection sizes for the pm+ methods.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub k: Vec<usize>,
    #[command(flatten)]
    pub objective: Objective,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct GraphArgs {
    #[command(flatten)]
    pub input: PanelInput,
    #[arg(long)]
    pub window: Option<String>,
    /// Build the graph from correlations instead of covariances.
    #[arg(long)]
    pub corr: bool,
    #[arg(long, allow_negative_numbers = true, requires = "tau_minus")]
    pub tau_plus: Option<f64>,
    #[arg(long, allow_negative_numbers = true, requires = "tau_plus")]
    pub tau_minus: Option<f64>,
    #[command(flatten)]
    pub output: Output,
}
