//! Decision fusion for classifier outputs.
//!
//! Score tables from any number of classifiers are combined by voting,
//! averaging, stacking, a gated mixture of experts, or a two-stage cascade of
//! a binary detector and a multiclass model. Bagging and boosting build
//! ensembles of a small linear base learner. Around the combiners sit the CSV
//! formats, an image preprocessing pipeline and evaluation utilities.
//!
//! ```
//! use ensemble_fusion::{prob_average, ProbVector};
//!
//! let a = ProbVector::new(vec![0.8, 0.2]).unwrap();
//! let b = ProbVector::new(vec![0.4, 0.6]).unwrap();
//! let fused = prob_average(&[a, b]).unwrap();
//! assert!((fused.get(0) - 0.6).abs() < 1e-12);
//! ```

pub mod cascade;
pub mod combiners;
pub mod error;
pub mod eval;
pub mod learner;
pub mod preprocess;
pub mod score_io;
pub mod synthetic;
pub mod types;

pub use cascade::{cascade_predict, hard_gate, lift_binary, CascadeLabels, CascadeRule, CascadeSpec, PostCombiner};
pub use combiners::*;
pub use error::{Error, ErrorKind, Result};
pub use eval::{confusion, metrics, report, stratified_split, Metrics, ReferenceBaselines, Report, RunMetadata, SplitAssignment};
pub use learner::{loss_and_grad, train, Dataset, FeatureSet, LinearModel, TrainConfig};
pub use preprocess::{AugmentPlan, FlipAxis, Partition, Pipeline, RasterImage, ResizeMode};
pub use types::{ConfusionMatrix, LabelSpace, ProbVector, ScoreRow, ScoreTable, TiePolicy};
