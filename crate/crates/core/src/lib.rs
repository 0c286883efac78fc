//! Two-stage data augmentation for embedding-sequence classification.
//!
//! Stage one generates virtual examples by linear interpolation of sample
//! pairs (vanilla mixup on padded embedding matrices). Stage two gates the
//! overconfident virtual labels and recomputes them from cosine similarity
//! against a reference pool drawn from the training set, so that identical
//! virtual samples receive identical labels regardless of which pair
//! produced them.
//!
//! The crate also ships a desk-scale linear classifier with a three-term
//! mixed loss (original / vanilla / global populations), a synthetic
//! Gaussian-cluster benchmark, JSONL dataset I/O, and report analyses that
//! measure label ambiguity and label extremity before and after relabeling.
//!
//! All numeric kernels are generic over the scalar type; `f64` is what the
//! CLI and the on-disk formats use.

pub mod error;
pub mod mixer;
pub mod pipeline;
pub mod relabeler;
pub mod sampling;
pub mod trainer;
pub mod types;

mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use types::{
    AugmentConfig, Dataset, EmbeddingSequence, Example, LambdaMode, LossWeights, Provenance,
    SoftLabel,
};

/// `f64` instantiations used by the CLI and the on-disk formats.
pub type Seq64 = EmbeddingSequence<f64>;
pub type Label64 = SoftLabel<f64>;
pub type Example64 = Example<f64>;
pub type Dataset64 = Dataset<f64>;
pub type AugmentConfig64 = AugmentConfig<f64>;
pub type Classifier64 = trainer::LinearClassifier<f64>;

/// Single-precision instantiations for in-memory experimentation.
pub type Seq32 = EmbeddingSequence<f32>;
pub type Label32 = SoftLabel<f32>;
pub type Example32 = Example<f32>;
pub type Dataset32 = Dataset<f32>;
pub type AugmentConfig32 = AugmentConfig<f32>;
pub type Classifier32 = trainer::LinearClassifier<f32>;
