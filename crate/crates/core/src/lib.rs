//! Quantile regression on large datasets by informative subsampling.
//!
//! Fitting a quantile regression on millions of rows is expensive, and the
//! usual asymptotic variance involves residual densities that are hard to
//! estimate. This crate instead draws small with-replacement subsamples
//! using probabilities that concentrate on informative rows, solves the
//! weighted check-loss problem on each subsample, and pools repeated batches
//! into a point estimate whose standard errors come straight from the
//! batch-to-batch spread.
//!
//! The pieces:
//!
//! * [`dataset`] — CSV ingestion and the immutable in-memory dataset.
//! * [`datagen`] — synthetic datasets with known coefficients.
//! * [`solver`] — certified weighted check-loss minimization.
//! * [`sampling`] — sampling plans, alias-method draws, effective-size ratio.
//! * [`estimator`] — pilot/two-step/repeated-batch estimators, confidence
//!   intervals, variance diagnostics.
//! * [`bench`] — simulation harness for method comparison at configurable
//!   scale.
//!
//! All randomness flows through [`rng::Streams`]; a run is fully determined
//! by its seed regardless of thread count.

pub mod bench;
pub mod datagen;
pub mod dataset;
pub mod error;
pub mod estimator;
pub mod rng;
pub mod sampling;
pub mod solver;

pub use dataset::{Dataset, ResponseColumn};
pub use error::{Error, Result};
pub use rng::Streams;
pub use sampling::SamplingMethod;
