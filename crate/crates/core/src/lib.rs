//! Contextualized hate speech detection: corpus construction, annotation
//! workflow, gold labels and agreement, context-aware classifiers and their
//! evaluation.

pub mod annotation;
pub mod classifier;
pub mod corpus;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod fold;
pub mod jsonl;
pub mod normalize;
pub mod pipeline;
pub mod synthetic;

pub use error::{Error, Result};
