//! Mean-variance optimal trading strategies for a single asset over a finite
//! discrete horizon.
//!
//! The crate builds auto-covariance matrices of price processes (exactly for
//! synthetic processes, by sampling for data), optionally cleans them by
//! shrinkage, and solves for strategies that minimise the variance of the
//! strategy return. Numeric code is generic over [`Real`]; the `*F64`
//! aliases below are what the experiment drivers and the CLI use.

// `!(x > 0)` style checks are used to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autocov;
pub mod cleaning;
pub mod error;
pub mod estimation;
pub mod ingest;
pub mod matrix_io;
pub mod mclab;
pub mod optimizer;
pub mod pipeline;
pub mod procgen;
pub mod rng;
pub mod scalar;

pub use autocov::{AutoCovMatrix, Layer, Provenance};
pub use error::{Error, Result};
pub use scalar::Real;

pub type AutoCovMatrixF64 = autocov::AutoCovMatrix<f64>;
pub type AutoCovMatrixF32 = autocov::AutoCovMatrix<f32>;
pub type ProcessSpecF64 = procgen::ProcessSpec<f64>;
pub type SamplePathF64 = procgen::SamplePath<f64>;
pub type StrategyF64 = optimizer::Strategy<f64>;
pub type DriftVectorF64 = optimizer::DriftVector<f64>;
