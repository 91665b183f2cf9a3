//! Rank molecule-caption sources by how much their embeddings improve a
//! fused property-prediction model, using per-molecule battles and
//! Bradley-Terry ratings.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the command line uses.

pub mod arena;
pub mod chem;
pub mod cli;
pub mod config;
pub mod fusion;
pub mod metrics;
pub mod num;
pub mod report;
pub mod store;

pub use num::Scalar;

pub type LinearModel = fusion::LinearModel<f64>;
pub type SvmParams = fusion::SvmParams<f64>;
pub type FeatureMatrix = fusion::FeatureMatrix<f64>;
pub type Standardizer = fusion::Standardizer<f64>;
pub type PairErrorTable = fusion::PairErrorTable<f64>;
pub type RatingTable = arena::RatingTable<f64>;
pub type RatingEntry = arena::RatingEntry<f64>;
pub type BtFit = arena::BtFit<f64>;
