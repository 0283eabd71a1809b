//! Supervised temporal causal discovery toolkit.
//!
//! Generates corpora of multivariate time series paired with ground-truth
//! lagged causal graphs, scores them with classical baselines or a small
//! trainable predictor, and evaluates the scores with rank statistics.
//!
//! Lagged adjacency tensors are stored with shape `(V, V, max_lag)` and
//! indexed `[target, source, max_lag - lag]`, so the last slice holds lag 1
//! and the first slice holds `max_lag`.

pub mod baselines;
pub mod container;
pub mod corpus;
pub mod error;
pub mod graph;
pub mod illustrative;
pub mod model;
pub mod par;
pub mod rng;
pub mod stats;
pub mod tscm;

pub use error::{Error, Result};
pub use graph::{GraphConfig, LaggedGraph};
pub use tscm::{Mechanism, MechanismKind, MechanismPolicy, NoiseSpec, SimConfig, Tscm, Wrap};

/// Slice index of `lag` in a tensor with `max_lag` slices.
#[inline]
pub fn lag_slice(max_lag: usize, lag: usize) -> usize {
    debug_assert!(lag >= 1 && lag <= max_lag);
    max_lag - lag
}

/// Lag stored at slice index `slice`.
#[inline]
pub fn slice_lag(max_lag: usize, slice: usize) -> usize {
    max_lag - slice
}
