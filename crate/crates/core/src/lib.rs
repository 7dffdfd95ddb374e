//! Cognition-aware multi-label emotion recognition for short texts.
//!
//! Factor regressors infer a cognitive profile for each text; per-factor
//! thresholds split the training corpus into cognitive categories; one
//! attention-weighted multi-channel CNN is trained per category plus one on
//! the whole corpus, and their decisions are combined by majority vote.
//!
//! The numeric code is generic over [`scalar::Scalar`]; the aliases below fix
//! it to `f64`, with `f32` variants where that matters.

pub mod cli;
pub mod cognition;
pub mod convnet;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod matrix;
pub mod metrics;
pub mod partition;
pub mod persist;
pub mod pipeline;
pub mod resources;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = matrix::Matrix<f64>;
pub type EmbeddingTable = resources::EmbeddingTable<f64>;
pub type Lexicon = resources::Lexicon<f64>;
pub type Resources = resources::Resources<f64>;
pub type SvrModel = cognition::SvrModel<f64>;
pub type CognitionModel = cognition::CognitionModel<f64>;
pub type ThresholdVector = partition::ThresholdVector<f64>;
pub type AttentionParams = features::AttentionParams<f64>;
pub type Network = convnet::Network<f64>;
pub type NetworkF32 = convnet::Network<f32>;
pub type Ensemble = ensemble::EnsembleModel<f64>;
pub type EnsembleF32 = ensemble::EnsembleModel<f32>;
pub type Pipeline = pipeline::TrainedPipeline<f64>;
pub type PipelineF32 = pipeline::TrainedPipeline<f32>;
