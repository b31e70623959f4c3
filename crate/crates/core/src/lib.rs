//! Review extraction from screenshots of review pages.
//!
//! A detector backend finds star-rating widgets and review-text blocks, a
//! recognizer reads the text inside each block, ratings are attached to the
//! text below them, and the resulting records are deduplicated across
//! frames. The same detection format feeds an evaluator (review-text
//! precision and mAP over IoU 0.50..=0.95), and extracted records can be
//! annotated with sentiment, language and authenticity flags and filtered.

pub mod analyze;
pub mod assemble;
pub mod backend;
pub mod cli;
pub mod config;
pub mod detect;
pub mod evaluate;
pub mod geometry;
pub mod pipeline;
pub mod recognize;

pub use analyze::{AnalysisFlags, Authenticity, FilterPolicy, Polarity};
pub use assemble::ReviewRecord;
pub use backend::{BackendError, Concurrency, ImageRef};
pub use config::PipelineConfig;
pub use detect::{Detection, ObjectClass};
pub use evaluate::{EvaluationReport, GroundTruthBox};
pub use geometry::BoundingBox;
