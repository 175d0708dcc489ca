//! Estimators of pairwise average treatment effects for studies with
//! several treatment arms and a rare binary outcome.
//!
//! The crate is `no_std` and only needs an allocator. It covers:
//!
//! * generalized propensity score models (multinomial logistic regression and
//!   one-vs-rest gradient boosting) with balance diagnostics and trimming,
//! * inverse probability of treatment weighting,
//! * regression adjustment on a tensor-product spline of the propensity
//!   score vector (RAMS),
//! * probit Bayesian additive regression trees with a common-support
//!   discarding rule,
//! * the simulation designs used to compare them, and the summary metrics.
//!
//! File formats, the replication runner and the command line live in the
//! `multitreat` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bart;
pub mod data;
pub mod dgp;
pub mod error;
pub mod gps;
pub mod iptw;
pub mod linalg;
pub mod math;
pub mod metrics;
pub mod pipeline;
pub mod rams;
pub mod rng;
pub mod stats;

pub use data::{
    CausalEstimate, ColumnKind, Dataset, Estimand, GpsMatrix, Interval, TreatmentPair,
};
pub use error::{Error, FitWarning, Result};
