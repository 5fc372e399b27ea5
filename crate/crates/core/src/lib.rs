//! Building and scoring emotion vocabularies from word embeddings.
//!
//! The pipeline runs: load vectors, expand a seed concept list, reduce with
//! UMAP, cluster hierarchically, pick summary words, aggregate across
//! languages, then score models by coverage and recoverable information.
//! [`vad`] analyses annotation tables and [`plot`] renders SVG charts.

// NaN-rejecting `!(x > y)` checks and index loops in the solvers are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod aggregation;
pub mod clustering;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod expansion;
pub mod fixtures;
pub mod linalg;
pub mod manifest;
pub mod plot;
pub mod reduction;
pub mod vad;

pub use aggregation::{EmotionModel, ModelSpec, TranslationMap};
pub use clustering::{Clustering, Dendrogram, DistortionCurve, Elbow, Linkage, SummaryMode};
pub use embedding::{ConceptList, EmbeddingSet};
pub use error::{Error, ErrorCategory, Result};
pub use evaluation::{CoverageReport, RecoveryParams, RecoveryReport, SuiteTable};
pub use linalg::{MatDense, VecDense};
pub use manifest::RunManifest;
pub use reduction::{Method, ReducedEmbedding, UmapParams};
pub use vad::{AnnotationSchema, AnnotationTable, Heatmap};
