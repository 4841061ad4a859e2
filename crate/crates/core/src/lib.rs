//! Individually-preference-stable (IP-stable) clustering.
//!
//! A clustering is `α`-IP stable when no point's average distance to the rest
//! of its own cluster exceeds `α` times its average distance to another
//! cluster. This crate provides exact verifiers, the potential functions that
//! certify progress, several local-search style algorithms, an exact
//! dynamic program for well-separated instances, and median/max variants.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod clustering;
pub mod error;
pub mod metric;
pub mod rng;
mod serde_float;

pub use clustering::{verify_stability, Clustering, Objective, StabilityReport};
pub use error::{Error, Result};
pub use metric::MetricSpace;
pub mod fast;
mod heap;
pub mod local_search;
pub mod median_ip;
pub mod merge_split;
pub mod potential;
pub mod stable_opt;
