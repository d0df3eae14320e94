use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "sgeval", version, about = "Evaluate video scene graphs generated by multimodal language models")]
pub struct Cli {
    /// Worker threads for per-video work; 1 runs sequentially, 0 uses all cores
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a free-form generation into a scene-graph file
    Parse(ParseArgs),
    /// Map predicted labels onto a closed vocabulary by embedding similarity
    Align(AlignArgs),
    /// Score predictions against ground truth (Recall@K, Precision@K)
    Eval(EvalArgs),
    /// Importance ranking and nDCG
    #[command(subcommand)]
    Importance(ImportanceCommand),
    /// Detector queries and grounded scene graphs
    #[command(subcommand)]
    Ground(GroundCommand),
    /// Emit a zero-shot or fine-tuning prompt
    Prompt(PromptArgs),
    /// Generate synthetic ground truth and predictions
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Triplet,
    Quadruplet,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    #[arg(long, value_enum, default_value_t = FormatArg::Triplet)]
    pub format: FormatArg,
    /// Frame ids, one per line, in generation order
    #[arg(long, value_name = "FILE")]
    pub frames: PathBuf,
    /// Video id of the generation (defaults to the file stem)
    #[arg(long)]
    pub video_id: Option<String>,
    /// Write the parse report as JSON here instead of stderr
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Generation text
    pub generation: PathBuf,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long, value_name = "FILE")]
    pub vocab: PathBuf,
    /// Text embeddings of generated and vocabulary labels (JSONL)
    #[arg(long, value_name = "FILE")]
    pub embeddings: PathBuf,
    /// Reject alignments whose cosine falls below this value
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub min_sim: f64,
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Prediction scene-graph file
    pub predictions: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    SgclsStar,
    Sgdet,
    SgdetAgg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AveragingArg {
    Macro,
    Micro,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub task: TaskArg,
    /// Comma-separated K values
    #[arg(long, value_delimiter = ',', default_value = "1,10,20,50,100")]
    pub k: Vec<usize>,
    #[arg(long, value_name = "FILE")]
    pub gt: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub pred: PathBuf,
    /// IoU threshold for sgdet and sgdet-agg
    #[arg(long)]
    pub iou: Option<f64>,
    #[arg(long, value_enum, default_value_t = AveragingArg::Macro)]
    pub averaging: AveragingArg,
    /// Include per-predicate metrics and their means
    #[arg(long)]
    pub per_class: bool,
    /// Include the subject/predicate/object breakdown
    #[arg(long)]
    pub entity: bool,
    /// Write CSV instead of JSON
    #[arg(long)]
    pub csv: bool,
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbeddingArgs {
    /// Frame embeddings keyed frame://<video>/<frame> (JSONL)
    #[arg(long, value_name = "FILE")]
    pub frame_emb: PathBuf,
    /// Sentence embeddings keyed "a <subject> is <predicate> <object>" (JSONL)
    #[arg(long, value_name = "FILE")]
    pub text_emb: PathBuf,
    #[arg(long, default_value_t = 0.75)]
    pub lambda: f64,
    /// Keep raw cosines instead of clamping scores to [0, 1]
    #[arg(long)]
    pub no_clamp: bool,
}

#[derive(Debug, Subcommand)]
pub enum ImportanceCommand {
    /// Reorder every frame by triplet importance and record each TI
    Rank {
        #[command(flatten)]
        emb: EmbeddingArgs,
        /// Ground-truth inputs must carry boxes
        #[arg(long)]
        ground_truth: bool,
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
        /// Scene-graph file
        input: PathBuf,
    },
    /// nDCG@p of predictions against importance-ranked ground truth
    Ndcg {
        #[command(flatten)]
        emb: EmbeddingArgs,
        #[arg(long, value_name = "FILE")]
        gt: PathBuf,
        #[arg(long, value_name = "FILE")]
        pred: PathBuf,
        #[arg(long, default_value_t = 5)]
        p: usize,
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum GroundCommand {
    /// Write the detector query manifest (JSONL) for a scene-graph file
    Queries {
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
        input: PathBuf,
    },
    /// Attach detector boxes to a scene-graph file
    Assemble {
        /// Detector output (JSONL)
        #[arg(long, value_name = "FILE")]
        detections: PathBuf,
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
        input: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    ZsTriplet,
    ZsQuad,
    Ft,
}

#[derive(Debug, Args)]
pub struct PromptArgs {
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[arg(long, value_name = "FILE")]
    pub vocab: PathBuf,
    /// Scene-graph file whose videos serve as few-shot examples
    #[arg(long, value_name = "FILE")]
    pub fewshot: Option<PathBuf>,
    /// Number of few-shot videos to include
    #[arg(long, default_value_t = 1)]
    pub fewshot_count: usize,
    /// Order example triplets by importance (needs --frame-emb and --text-emb)
    #[arg(long)]
    pub importance_ordered: bool,
    #[arg(long, value_name = "FILE", requires = "text_emb")]
    pub frame_emb: Option<PathBuf>,
    #[arg(long, value_name = "FILE", requires = "frame_emb")]
    pub text_emb: Option<PathBuf>,
    #[arg(long, default_value_t = 0.75)]
    pub lambda: f64,
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub videos: usize,
    #[arg(long, default_value_t = 10)]
    pub frames: usize,
    #[arg(long, default_value_t = 7)]
    pub gt_per_frame: usize,
    /// Ground-truth triplets copied into each prediction
    #[arg(long, default_value_t = 7)]
    pub correct: usize,
    /// Non-matching triplets appended to each prediction
    #[arg(long, default_value_t = 0)]
    pub filler: usize,
    /// Predicted box shift as a fraction of box size
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
    /// Draw labels from this vocabulary instead of a generated one
    #[arg(long, value_name = "FILE")]
    pub vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 35, conflicts_with = "vocab")]
    pub objects: usize,
    #[arg(long, default_value_t = 25, conflicts_with = "vocab")]
    pub predicates: usize,
    #[arg(long, value_name = "FILE")]
    pub gt_out: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub pred_out: PathBuf,
}
