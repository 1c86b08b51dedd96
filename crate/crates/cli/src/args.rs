//! Command-line surface. Every subcommand documents its flags in `--help`.

use std::net::IpAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ncb", version, about = "Discrete concept binding over block-slot encodings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize labeled scenes with a synthetic encoder.
    GenData(GenDataArgs),
    /// Cluster every block and distill a retrieval corpus.
    Fit(FitArgs),
    /// Map scenes to discrete concept ids.
    Infer(InferArgs),
    /// Query a corpus: concept cards, comparisons, similarity, swaps.
    Inspect(InspectArgs),
    /// Apply a feedback document to a corpus, all or nothing.
    Revise(ReviseArgs),
    /// Property accuracy from concept encodings at shrinking training sizes.
    EvalQ1(EvalQ1Args),
    /// Generate a Sudoku dataset.
    SudokuGen(SudokuGenArgs),
    /// Evaluate a Sudoku dataset with ground-truth or corpus concepts.
    SudokuEval(SudokuEvalArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Create or validate a workspace manifest.
    Workspace(WorkspaceArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemaName {
    Clevr,
    ClevrEasy,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Encodings file to write. Labels go next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Where to save the encoder. Defaults to `encoder.json` beside `--out`.
    #[arg(long)]
    pub encoder_out: Option<PathBuf>,
    /// Reuse an existing encoder instead of building one.
    #[arg(long, conflicts_with_all = ["schema", "spread", "dup", "block_dim"])]
    pub encoder: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "clevr-easy")]
    pub schema: SchemaName,
    #[arg(long, default_value_t = 2000)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub min_objects: usize,
    #[arg(long, default_value_t = 1)]
    pub max_objects: usize,
    /// Per-dimension noise around each value centroid.
    #[arg(long)]
    pub spread: Option<f64>,
    /// Centroids per factor value.
    #[arg(long)]
    pub dup: Option<usize>,
    #[arg(long)]
    pub block_dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClusterName {
    /// HDBSCAN with per-block grid search on DBCV.
    HdbscanGrid,
    /// HDBSCAN with fixed parameters.
    Hdbscan,
    Kmeans,
}

/// Which object slots of a scene are used.
#[derive(Debug, Args, Clone, Copy)]
pub struct SlotArgs {
    /// Use every slot with attention at least this value instead of the
    /// single most attended slot.
    #[arg(long)]
    pub threshold: Option<f32>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub encodings: PathBuf,
    /// Corpus file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Encoder the encodings came from; its fingerprint is recorded and its
    /// factor names label the table.
    #[arg(long)]
    pub encoder: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "hdbscan-grid")]
    pub cluster: ClusterName,
    /// Clusters per block for k-means.
    #[arg(long, required_if_eq("cluster", "kmeans"))]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub min_cluster_size: usize,
    #[arg(long, default_value_t = 5)]
    pub min_samples: usize,
    /// Comma-separated values searched for both HDBSCAN parameters.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    /// Forbid a single cluster covering a whole block.
    #[arg(long)]
    pub no_single_cluster: bool,
    /// Exemplars stored per concept besides the prototype.
    #[arg(long)]
    pub exemplars: Option<usize>,
    #[command(flatten)]
    pub slots: SlotArgs,
    /// k-means initialization seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Record the wall-clock time in the corpus.
    #[arg(long)]
    pub stamp: bool,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub encodings: PathBuf,
    /// Concepts file (JSON lines) to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Vote among the k nearest entries and report the winning share.
    #[arg(long)]
    pub top_k: Option<usize>,
    #[command(flatten)]
    pub slots: SlotArgs,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub query: InspectQuery,
}

#[derive(Debug, Subcommand)]
pub enum InspectQuery {
    /// Concept counts per block.
    Blocks,
    /// Stored encodings and matching dataset objects of one concept.
    Card {
        #[arg(long)]
        encodings: PathBuf,
        #[arg(long)]
        block: usize,
        #[arg(long)]
        concept: u32,
        #[arg(long, default_value_t = ncb_core::inspection::DEFAULT_MATCHES)]
        matches: usize,
    },
    /// Two concept cards side by side.
    Compare {
        #[arg(long)]
        encodings: PathBuf,
        #[arg(long)]
        block: usize,
        #[arg(long)]
        a: u32,
        #[arg(long)]
        b: u32,
        #[arg(long, default_value_t = ncb_core::inspection::DEFAULT_MATCHES)]
        matches: usize,
    },
    /// Other concepts of the block by prototype distance.
    Similar {
        #[arg(long)]
        block: usize,
        #[arg(long)]
        concept: u32,
    },
    /// Replace one block of one object and decode before and after.
    Swap {
        #[arg(long)]
        encodings: PathBuf,
        #[arg(long)]
        encoder: PathBuf,
        #[arg(long)]
        scene: usize,
        #[arg(long)]
        slot: usize,
        #[arg(long)]
        block: usize,
        #[arg(long)]
        target: u32,
        /// Use this entry instead of the target's prototype.
        #[arg(long)]
        entry: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct ReviseArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub feedback: PathBuf,
    /// Where to write the revised corpus. Defaults to `--corpus`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Revision log to append to (JSON lines).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Stamp log entries with the wall-clock time.
    #[arg(long)]
    pub stamp: bool,
}

#[derive(Debug, Args)]
pub struct EvalQ1Args {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub encodings: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = ncb_core::classifier::PROTOCOL_TRAIN_SIZES)]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    pub n_test: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2])]
    pub seeds: Vec<u64>,
    /// Report file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantName {
    Easy,
    Full,
}

impl From<VariantName> for ncb_core::sudoku::SudokuVariant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::Easy => ncb_core::sudoku::SudokuVariant::Easy,
            VariantName::Full => ncb_core::sudoku::SudokuVariant::Full,
        }
    }
}

#[derive(Debug, Args)]
pub struct SudokuGenArgs {
    #[arg(long, value_enum, default_value = "easy")]
    pub variant: VariantName,
    #[arg(long, default_value_t = ncb_core::sudoku::DEFAULT_COUNT)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = ncb_core::sudoku::K_VALUES)]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = ncb_core::sudoku::N_VALUES)]
    pub n: Vec<usize>,
    /// Also write the encoded objects of every puzzle.
    #[arg(long)]
    pub encode: bool,
    #[arg(long)]
    pub spread: Option<f64>,
    #[arg(long)]
    pub dup: Option<usize>,
    #[arg(long)]
    pub block_dim: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConceptsName {
    /// One-hot ground-truth attributes.
    Gt,
    /// Concept ids read off a corpus.
    Corpus,
}

#[derive(Debug, Args)]
pub struct SudokuEvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "gt")]
    pub concepts: ConceptsName,
    #[arg(long, required_if_eq("concepts", "corpus"))]
    pub corpus: Option<PathBuf>,
    /// Encoder for the puzzle objects. Defaults to the dataset's own.
    #[arg(long)]
    pub encoder: Option<PathBuf>,
    #[arg(long, default_value_t = ncb_core::sudoku::DEFAULT_SEEDS)]
    pub seeds: usize,
    #[arg(long, value_delimiter = ',', default_values_t = ncb_core::sudoku::K_VALUES)]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = ncb_core::sudoku::N_VALUES)]
    pub n: Vec<usize>,
    /// Only the first this many puzzles.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Name recorded in every report row.
    #[arg(long)]
    pub pipeline: Option<String>,
    #[command(flatten)]
    pub slots: SlotArgs,
    /// Report file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Workspace manifest naming every artifact.
    #[arg(long, conflicts_with_all = ["corpus", "encodings", "encoder", "dataset", "log"])]
    pub workspace: Option<PathBuf>,
    #[arg(long, required_unless_present = "workspace")]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub encodings: Option<PathBuf>,
    #[arg(long)]
    pub encoder: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Write the corpus and append the log after every revision.
    #[arg(long)]
    pub persist: bool,
}

#[derive(Debug, Args)]
pub struct WorkspaceArgs {
    #[command(subcommand)]
    pub action: WorkspaceAction,
}

#[derive(Debug, Subcommand)]
pub enum WorkspaceAction {
    /// Write a manifest. Paths are stored relative to its directory.
    Init {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        encoder: Option<PathBuf>,
        #[arg(long)]
        encodings: Option<PathBuf>,
        /// Repeat for every corpus version, oldest first.
        #[arg(long)]
        corpus: Vec<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        dataset: Vec<PathBuf>,
        #[arg(long)]
        report: Vec<PathBuf>,
    },
    /// Open a manifest and validate every file it names.
    Check { manifest: PathBuf },
}
