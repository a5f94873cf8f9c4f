//! Persuasive-argument analysis: Bradley-Terry scoring of pairwise
//! judgements, a supervised semi-nonnegative topic model over document
//! embeddings, topic inference for new documents, and effect estimation.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`, which is what the file
//! formats and command-line tools use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod btrank;
pub mod causal;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod ingest;
pub mod linalg;
pub mod rng;
pub mod scalar;
pub mod sunmodel;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Real = f64;
pub type Matrix = ndarray::Array2<f64>;
pub type Vector = ndarray::Array1<f64>;

pub type Embeddings = ingest::EmbeddingMatrix<f64>;
pub type Scaling = ingest::ScalingParams<f64>;
pub type SunModel64 = sunmodel::SunModel<f64>;
pub type SunModelF32 = sunmodel::SunModel<f32>;
pub type SupervisedMatrix64 = sunmodel::SupervisedMatrix<f64>;
pub type Loadings = inference::TopicLoadings<f64>;
pub type Design = causal::DesignMatrix<f64>;
pub type Scores = btrank::BtScores<f64>;
