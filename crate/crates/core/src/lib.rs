//! Listwise learning-to-rank for drug prioritization.
//!
//! Cell lines are embedded from expression profiles by a pretrained, finetuned
//! encoder; drugs are embedded from count fingerprints; a bilinear form scores
//! every (cell, drug) pair and the drugs of each cell line are ranked by score.
//! Two listwise objectives are provided: List-One (top-one probability
//! matching) and List-All (temperature softmax against binary sensitivity
//! labels).
//!
//! All numeric kernels are generic over [`Scalar`] (`f32`/`f64`); the
//! `*64`/`*32` aliases below fix the precision. Training and gradient checks
//! run at `f64`.

pub mod analysis;
pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod pretrain;
pub mod ranker;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use losses::LossKind;
pub use scalar::Scalar;

pub type Matrix64 = nn::Matrix<f64>;
pub type Matrix32 = nn::Matrix<f32>;
pub type Mlp64 = nn::Mlp<f64>;
pub type Mlp32 = nn::Mlp<f32>;
pub type ProbVector64 = nn::ProbVector<f64>;
pub type GeneAutoencoder64 = pretrain::GeneAutoencoder<f64>;
pub type GeneAutoencoder32 = pretrain::GeneAutoencoder<f32>;
pub type RankModel64 = ranker::RankModel<f64>;
pub type RankModel32 = ranker::RankModel<f32>;
pub type SimilarityMatrix64 = analysis::SimilarityMatrix<f64>;

