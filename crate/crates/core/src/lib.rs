//! Toolkit for measuring lexical and semantic change in year-stamped Chinese text.
//!
//! The pipeline runs in fixed order: ingest a JSONL corpus, normalize character
//! variants and scripts with code-point mapping tables, segment with a
//! dictionary-driven maximum-probability decoder, count category-tagged lexicon
//! terms against per-year token totals, train one skip-gram model per time
//! slice, align the slice models with orthogonal Procrustes, and report
//! cross-slice semantic drift, nearest neighbors, and 2-D trajectories.

pub mod align;
pub mod corpus;
pub mod embedding;
mod error;
pub mod lexicon;
pub mod normalize;
pub mod pipeline;
pub mod segment;
pub mod synth;

pub use crate::align::{AlignedSeries, AlignOptions, DriftRecord};
pub use crate::corpus::{Corpus, Document, IngestOptions, IngestReport, TimeSliceSpec, YearTotals};
pub use crate::embedding::{EmbeddingModel, Hyperparams, Vocab};
pub use crate::error::{Error, Result};
pub use crate::lexicon::{AppendixReport, Category, FrequencySeries, Lexicon};
pub use crate::normalize::MappingTable;
pub use crate::pipeline::PipelineConfig;
pub use crate::segment::{SegDictionary, SegmentOptions};
pub use crate::synth::SyntheticSpec;
