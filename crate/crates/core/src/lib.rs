//! Unsupervised alignment of two monolingual word-embedding spaces.
//!
//! The adversarial stage learns a linear map between the spaces by walking
//! through a continuum of interpolated pseudo-language domains
//! `G(x, z) = z·W·x + (1 − z)·x`, with `z` drawn from a Beta schedule that
//! drifts from the source towards the target over training. The result is
//! refined with Procrustes self-learning plus symmetric re-weighting and
//! scored by CSLS bilingual lexicon induction.

pub mod archive;
pub mod domainflow;
pub mod embedio;
mod error;
pub mod linalg;
pub mod nets;
pub mod refine;
pub mod retrieval;
pub mod synth;
pub mod trainer;

pub use domainflow::{GenTargetMode, LossBreakdown, ZSchedule};
pub use embedio::{Dictionary, EmbeddingSpace, NormScheme};
pub use error::{Error, Result};
pub use linalg::LinearMap;
pub use nets::{AdamState, Autoencoder, Dense, Discriminator, Generator, Parameters};
pub use refine::{RefineConfig, Refined};
pub use retrieval::{BliReport, CslsIndex, Projection};
pub use synth::SynthConfig;
pub use trainer::{AlignmentModel, TrainConfig, TrainHistory, ZVariant};
