//! Graph subsampling toolkit for recommender pre-training experiments:
//! ingest interaction/triple data, sample it down under an edge budget,
//! measure structural fidelity, and train/evaluate an inductive embedding
//! model on the result.

pub mod config;
pub mod error;
pub mod graph;
pub mod ingest;
pub mod eval;
pub mod fidelity;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod sample;

pub use error::{Error, Result};
