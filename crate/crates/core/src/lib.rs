//! Differentially private histogram-based explanations for black-box clusterings.
//!
//! Given a tabular dataset over finite, data-independent domains and a fixed
//! clustering function, the engine picks one explanation attribute per cluster
//! using low-sensitivity quality scores and DP selection mechanisms, then
//! releases noisy in-cluster / out-of-cluster histograms for the chosen
//! attributes.
//!
//! The pipeline is split into:
//!
//! - [`dataset`]: schema, CSV ingestion with binning, clustering functions and
//!   the columnar count table every score is computed from.
//! - [`quality`]: the low-sensitivity (sensitivity ≤ 1) quality functions.
//! - [`dpmech`]: seeded randomness, Gumbel noise, exponential mechanism,
//!   one-shot top-k, geometric histograms and the privacy ledger.
//! - [`explain`]: candidate selection, the end-to-end DP explanation and the
//!   comparison pipelines (TabEE, DP-TabEE, DP-Naive).
//! - [`eval`]: the original high-sensitivity quality functions, Quality and MAE.
//!
//! Score arithmetic is generic over [`Scalar`], so the same code runs on `f64`
//! for production and on exact rationals ([`Exact`]) where tests need equality
//! rather than a tolerance.

pub mod chart;
pub mod dataset;
pub mod dpmech;
pub mod error;
pub mod eval;
pub mod explain;
pub mod quality;
pub mod scalar;

pub use dataset::{
    AttrId, AttributeDef, BinningKind, BinningRule, ClusterPartition, ClusteringFunction,
    CountTable, Dataset, Histogram, OutOfRange, Schema,
};
pub use error::{Error, Result};
pub use scalar::Scalar;

/// Floating point scalar used by the production pipeline.
pub type Real = f64;

/// Exact rational scalar, used to check closed-form identities without tolerance.
pub type Exact = num_rational::Rational64;

/// Quality weights over `f64`.
pub type Weights = quality::WeightParams<Real>;

/// Exact histogram counts.
pub type Counts = Histogram<u64>;

/// Noisy histogram counts released by the geometric mechanism.
pub type NoisyCounts = Histogram<i64>;
