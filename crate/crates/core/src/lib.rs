//! Multi-output bagged regression ensembles with calibrated multivariate
//! prediction distributions.
//!
//! A forest of full-depth multi-output trees is fit on bootstrap resamples.
//! Out-of-bag standard residuals set a per-output recalibration factor that
//! rescales the bootstrap spread into a usable standard deviation, and a
//! correlation estimate (trivial, training-data, jackknife, or bootstrap)
//! turns the per-output widths into a full covariance matrix. Each
//! prediction is returned as a normal distribution N(mean, covariance),
//! which plugs directly into the probability-of-success acquisition used by
//! the sequential-learning simulator.
//!
//! The core is generic over the scalar type ([`Scalar`]: f32 or f64); the
//! aliases below pin f64, which is what the CLI and all stated tolerances
//! use.

pub mod datasets;
pub mod ensemble;
pub mod error;
pub mod intervals;
pub mod metrics;
pub mod scalar;
pub mod sequential;
pub mod stats;
pub mod tree;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// f64 dataset.
pub type Dataset64 = datasets::Dataset<f64>;
/// f64 trained forest.
pub type TrainedForest64 = ensemble::TrainedForest<f64>;
/// f64 prediction distribution.
pub type PredictionDistribution64 = intervals::PredictionDistribution<f64>;
/// f64 covariance matrix.
pub type CovMatrix64 = stats::CovMatrix<f64>;
/// f64 rectangular matrix.
pub type Matrix64 = stats::Matrix<f64>;
