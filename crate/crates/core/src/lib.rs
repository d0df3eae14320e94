//! Evaluation toolkit for video scene-graph generation by multimodal
//! language models: parse free-form generations, align labels to a closed
//! vocabulary, score Recall/Precision@K, rank triplets by importance and
//! measure nDCG.

pub mod align;
pub mod error;
pub mod grounding;
pub mod importance;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod par;
pub mod parser;
pub mod prompt;
pub mod synth;

pub use error::{Error, Result};
pub use metrics::{Averaging, EvalTask, Evaluator, MetricReport, ReportOptions, TaskVariant};
pub use model::{BoundingBox, DocumentKind, EmbeddingTable, FrameGraph, SceneGraphDocument, ScoredTriplet, Triplet, Vocabulary};
pub use par::Exec;
pub use parser::{parse_generation, serialize_frames, ParseReport, RelationFormat};
