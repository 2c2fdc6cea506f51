mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "tad", version, about = "Task attribute distance toolkit")]
struct Cli {
    /// key=value file of default flags; explicit flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Read an attribute table and write it back out in a chosen format.
    #[command(args_override_self = true)]
    Ingest(IngestArgs),
    /// Build a table from instance-level attribute annotations.
    #[command(args_override_self = true)]
    Aggregate(AggregateArgs),
    /// Build a table by binning predicted attribute scores.
    #[command(args_override_self = true)]
    Induce(InduceArgs),
    /// Distances from novel tasks to a pool of training tasks.
    #[command(args_override_self = true)]
    Tad(TadArgs),
    /// Sample N-way tasks from a class pool.
    #[command(args_override_self = true)]
    Sample(SampleArgs),
    /// Bin accuracy by distance, fit the trend and the distance distribution.
    #[command(args_override_self = true)]
    Analyze(AnalyzeArgs),
    /// Keep the most distant fraction of tasks.
    #[command(args_override_self = true)]
    Select(SelectArgs),
    /// Drop the classes that appear most often in a task list.
    #[command(name = "prune-classes", args_override_self = true)]
    PruneClasses(PruneArgs),
    /// Mix support features with prototypes of related training categories.
    #[command(args_override_self = true)]
    Calibrate(CalibrateArgs),
    /// Prototype classifier on a support/query pair or on synthetic episodes.
    #[command(args_override_self = true)]
    Evaluate(EvaluateArgs),
    /// Add labeled samples to distant tasks and report worst-K accuracy.
    #[command(args_override_self = true)]
    Intervene(InterveneArgs),
    /// Generate a synthetic attribute world.
    #[command(args_override_self = true)]
    Synth(SynthArgs),
    /// Check the joint-space bound for category pairs of a table.
    #[command(name = "lemma-check", args_override_self = true)]
    LemmaCheck(LemmaArgs),
    /// Time both distance variants across task sizes.
    #[command(args_override_self = true)]
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, Default, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FormatArg {
    #[default]
    DistributionCsv,
    BinaryLabelCsv,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum VariantArg {
    Orig,
    #[default]
    Approx,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Majority,
    Frequency,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum StrategyArg {
    #[default]
    Balanced,
    Imbalanced,
}

#[derive(Args, Debug, Serialize)]
struct TableArgs {
    /// Attribute table file.
    #[arg(long)]
    table: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    format: FormatArg,
    /// Schema JSON; fixes attribute and value order.
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct IngestArgs {
    #[command(flatten)]
    input: TableArgs,
    #[arg(long, value_enum, default_value_t)]
    out_format: FormatArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct AggregateArgs {
    /// Annotations CSV: instance,category,a_1..a_L.
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct InduceArgs {
    /// Features CSV: instance,category,f_1..f_L.
    #[arg(long)]
    features: PathBuf,
    /// Schema JSON; defaults to binary attributes named after the columns.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Binary threshold; a score at or above it is value 1.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Equal-width bins per attribute instead of a threshold.
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct TadArgs {
    /// Table resolving the pool tasks (and the novel tasks unless --novel-table is given).
    #[command(flatten)]
    table: TableArgs,
    #[arg(long)]
    novel_table: Option<PathBuf>,
    /// Novel tasks JSONL.
    #[arg(long)]
    tasks: PathBuf,
    /// Training pool tasks JSONL.
    #[arg(long)]
    pool: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    variant: VariantArg,
    /// Include the distance to every pool task.
    #[arg(long)]
    per_pool: bool,
    /// Compute on one thread.
    #[arg(long)]
    serial: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    /// Class list, one id per line.
    #[arg(long)]
    classes: Option<PathBuf>,
    /// Take every category of this table instead of a class list.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: FormatArg,
    #[arg(long, default_value_t = 5)]
    ways: usize,
    #[arg(long, default_value_t = 1)]
    shots: usize,
    #[arg(long, default_value_t = 15)]
    queries: usize,
    #[arg(long)]
    num_tasks: usize,
    #[arg(long, env = "TAD_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "pool")]
    pool_tag: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct AnalyzeArgs {
    /// Distance summaries JSONL (output of `tad`).
    #[arg(long)]
    distances: PathBuf,
    /// Accuracy JSONL; enables the binned curve and the regression.
    #[arg(long)]
    accuracies: Option<PathBuf>,
    /// Cross-scenario distance summaries; compared against --distances.
    #[arg(long)]
    cross: Option<PathBuf>,
    #[arg(long, default_value_t = tad_core::episodes::DEFAULT_BIN_WIDTH)]
    bin_width: f64,
    #[arg(long, default_value_t = tad_core::episodes::DEFAULT_MIN_COUNT)]
    min_count: usize,
    /// Bin statistics CSV (needs --accuracies).
    #[arg(long)]
    bins_out: Option<PathBuf>,
    /// Summary JSON: fits and scenario comparison.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SelectArgs {
    #[arg(long)]
    distances: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    fraction: f64,
    /// Attach accuracies to the selected tasks.
    #[arg(long)]
    accuracies: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct PruneArgs {
    /// Tasks whose class frequencies are counted.
    #[arg(long)]
    tasks: PathBuf,
    #[arg(long)]
    classes: Option<PathBuf>,
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: FormatArg,
    #[arg(long, default_value_t = 36)]
    top_k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct CalibrateArgs {
    #[arg(long)]
    train_table: PathBuf,
    #[arg(long)]
    novel_table: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    format: FormatArg,
    /// Support features CSV of the novel task.
    #[arg(long)]
    support: PathBuf,
    /// Training tasks JSONL.
    #[arg(long)]
    pool: PathBuf,
    /// Training features CSV; class means give the prototypes.
    #[arg(long)]
    prototypes: PathBuf,
    #[arg(long, default_value_t = 200)]
    k_related: usize,
    #[arg(long, default_value_t = 5)]
    retain: usize,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t)]
    variant: VariantArg,
    /// Plan JSON listing related tasks and retained categories.
    #[arg(long)]
    plan_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct EvaluateArgs {
    /// Support features CSV.
    #[arg(long)]
    support: Option<PathBuf>,
    /// Query features CSV.
    #[arg(long)]
    query: Option<PathBuf>,
    /// Query attribute labels (annotations CSV) for the attribute loss.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Weight of the episode loss in the combined loss.
    #[arg(long)]
    beta: Option<f64>,
    /// Synthetic world directory written by `synth`.
    #[arg(long)]
    world: Option<PathBuf>,
    #[arg(long)]
    tasks: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    shots: usize,
    #[arg(long, default_value_t = 15)]
    queries: usize,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, env = "TAD_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct InterveneArgs {
    #[arg(long)]
    tasks: PathBuf,
    /// Distance summaries JSONL for the tasks.
    #[arg(long)]
    distances: PathBuf,
    /// Externally measured accuracies JSONL.
    #[arg(long)]
    accuracies: Option<PathBuf>,
    /// Synthetic world directory; episodes are evaluated in process.
    #[arg(long)]
    world: Option<PathBuf>,
    #[arg(long, default_value_t = 0.18)]
    threshold: f64,
    /// Use this percentile (0-100) of the distances as the threshold.
    #[arg(long)]
    threshold_percentile: Option<f64>,
    #[arg(long, default_value_t = 25)]
    budget: usize,
    #[arg(long, value_enum, default_value_t)]
    strategy: StrategyArg,
    #[arg(long, env = "TAD_SEED", value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,60,120")]
    ks: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    shots: usize,
    #[arg(long, default_value_t = 15)]
    queries: usize,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 40)]
    num_classes: usize,
    #[arg(long, default_value_t = 32)]
    num_attributes: usize,
    #[arg(long, default_value_t = 0.3)]
    sparsity: f64,
    #[arg(long, default_value_t = 0.15)]
    sigma: f64,
    #[arg(long, default_value_t = 100)]
    samples_per_class: usize,
    #[arg(long, env = "TAD_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    domains: usize,
    #[arg(long, default_value_t = 0.0)]
    domain_bias: f64,
    #[arg(long, default_value_t = 20)]
    train_classes: usize,
    #[arg(long, default_value_t = 0.0)]
    transfer_penalty: f64,
    #[arg(long, default_value_t = 3.0)]
    transfer_exponent: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct LemmaArgs {
    #[command(flatten)]
    table: TableArgs,
    /// First category; with --second checks one pair, otherwise all pairs.
    #[arg(long, requires = "second")]
    first: Option<String>,
    #[arg(long, requires = "first")]
    second: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct BenchArgs {
    /// Table to sample from; a synthetic table is generated when omitted.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: FormatArg,
    #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
    ways: Vec<usize>,
    #[arg(long, default_value_t = 7)]
    repetitions: usize,
    #[arg(long, env = "TAD_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let cli = Cli::parse_from(args);
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
