//! Command-line surface. Every subcommand accepts `--config FILE` with flat
//! `key=value` lines; explicit flags override the file.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "rsgrove",
    version,
    about = "Balanced spatial partitioning: validity-constrained R*-style splitting, \
             baseline partitioners, quality metrics, and a query benchmark",
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset as delimited text
    Generate(GenerateArgs),
    /// Draw a weighted sample and build the storage-size histogram
    Sample(SampleArgs),
    /// Compute partition boundaries from a sample
    Partition(PartitionArgs),
    /// Assign every input record to its partition file(s)
    Assign(AssignArgs),
    /// Score a partition layout with the Q1..Q5 quality metrics
    Metrics(MetricsArgs),
    /// Run a batch of range queries against assigned partitions
    Rangequery(RangeQueryArgs),
    /// Spatial join between two assigned partition directories
    Sjoin(SjoinArgs),
    /// Matrix of partitioners x sampling ratios, one metrics row each
    Sweep(SweepArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataKind {
    Uniform,
    Diagonal,
    Varsize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Partitioner {
    Grove,
    Str,
    Kdtree,
    Zcurve,
    Hilbert,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Blackbox,
    Graybox,
    Grove,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemaKindArg {
    Point,
    Envelope,
}

/// Text-schema flags shared by every record-reading subcommand.
#[derive(Args, Debug, Clone)]
pub struct SchemaArgs {
    /// Dimensionality of the data
    #[arg(long, default_value_t = 2)]
    pub dims: usize,
    /// point: d coordinate columns; envelope: d low then d high columns
    #[arg(long, value_enum, default_value = "point")]
    pub schema: SchemaKindArg,
    /// Field delimiter
    #[arg(long, default_value = ",")]
    pub delimiter: char,
    /// Coordinate columns by index (d for point, 2d for envelope)
    #[arg(long, value_delimiter = ',')]
    pub cols: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: DataKind,
    #[arg(long)]
    pub count: u64,
    #[arg(long, default_value_t = 2)]
    pub dims: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of points exactly on the diagonal line
    #[arg(long, default_value_t = 0.05)]
    pub perc: f64,
    /// Width of the buffer scattered around the line
    #[arg(long, default_value_t = 0.1)]
    pub buf: f64,
    /// Smallest payload padding (varsize)
    #[arg(long, default_value_t = 12)]
    pub min_bytes: usize,
    /// Largest payload padding (varsize)
    #[arg(long, default_value_t = 12288)]
    pub max_bytes: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    /// Sampling ratio in (0, 1]
    #[arg(long, default_value_t = 0.01)]
    pub ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Block size (accepts suffixes KB/MB/GB/KiB/MiB/GiB), used to pick the
    /// default histogram resolution
    #[arg(long, default_value = "128MiB")]
    pub block_size: String,
    /// Histogram cells per dimension (default derived from the block size)
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    /// Histogram domain as d lows then d highs (default: sample bounding box)
    #[arg(long, value_delimiter = ',')]
    pub domain: Option<Vec<f64>>,
    #[arg(long)]
    pub out_sample: PathBuf,
    #[arg(long)]
    pub out_histogram: PathBuf,
}

#[derive(Args, Debug)]
pub struct PartitionArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub sample: PathBuf,
    /// Histogram sidecar; enables byte-weighted partitioning for grove
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "grove")]
    pub partitioner: Partitioner,
    /// Splitting discipline for the grove partitioner
    #[arg(long, value_enum, default_value = "grove")]
    pub strategy: Strategy,
    #[arg(long, default_value = "128MiB")]
    pub block_size: String,
    /// Balance factor in (0, 1)
    #[arg(long, default_value_t = 0.95)]
    pub alpha: f64,
    /// Minimum splitting ratio in [0, 0.5]
    #[arg(long, default_value_t = 0.4)]
    pub rho: f64,
    /// Produce spatially disjoint partitions (straddlers replicate)
    #[arg(long)]
    pub disjoint: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AssignArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub scheme: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `_master` manifest written by assign
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "128MiB")]
    pub block_size: String,
    /// Also write the report as JSON
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Print a single CSV row instead of the table
    #[arg(long)]
    pub csv: bool,
}

#[derive(Args, Debug)]
pub struct RangeQueryArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Assigned partition directory
    #[arg(long)]
    pub parts: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Query volume as a fraction of the domain volume
    #[arg(long, default_value_t = 1e-4)]
    pub area_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "128MiB")]
    pub block_size: String,
    /// Worker threads (default: machine parallelism)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Per-query CSV output (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SjoinArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub left: PathBuf,
    #[arg(long)]
    pub right: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[arg(long, default_value = "128MiB")]
    pub block_size: String,
    /// CSV output (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    /// Partitioners to run
    #[arg(long, value_enum, value_delimiter = ',',
          default_value = "grove,str,kdtree,zcurve,hilbert")]
    pub partitioners: Vec<Partitioner>,
    /// Sampling ratios to run
    #[arg(long, value_delimiter = ',', default_value = "0.01")]
    pub ratios: Vec<f64>,
    /// Seed is mandatory in sweep mode for reproducibility
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "128MiB")]
    pub block_size: String,
    #[arg(long, default_value_t = 0.95)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.4)]
    pub rho: f64,
    #[arg(long)]
    pub disjoint: bool,
    /// Working directory for intermediate assignments
    #[arg(long)]
    pub work_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}
