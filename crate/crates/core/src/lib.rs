//! Randomness engineering workbench.

pub mod bitio;
pub mod extractors;
pub mod mermin;
pub mod minentropy;
pub mod pipeline;
pub mod report;
pub mod sources;
pub mod stattests;

pub use bitio::{BitString, StreamFormat};
pub use pipeline::{PipelineManifest, PipelineRun};
pub use report::Profile;

/// Entropy assessment over `f64`.
pub type EntropyAssessment = minentropy::EntropyAssessment<f64>;
/// Finite distribution over `f64`.
pub type Distribution = minentropy::Distribution<f64>;
