//! Automated quality assessment of online health articles.
//!
//! The crate covers the whole pipeline: HTML ingestion and labelling
//! ([`corpus`]), token-vector archives ([`embeddings`]), a small reverse-mode
//! differentiation engine ([`numerics`]), hierarchical bi-GRU encoders with
//! global attention ([`hea`]), training and random search ([`training`]), a
//! TF-IDF + random forest baseline ([`baseline`]) and metrics, coverage and
//! agreement reports ([`evaluation`]).

pub mod baseline;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod hea;
pub mod numerics;
pub mod synthetic;
pub mod training;

pub use corpus::{Criterion, Document, Topic};
pub use error::{Error, Result};
pub use hea::{ModelConfig, ModelParams, Prediction, Variant};
pub use numerics::Tensor;
