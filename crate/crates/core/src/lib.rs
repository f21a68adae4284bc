//! Robust community detection in node-corrupted semi-random stochastic block
//! models and ℤ₂ synchronization.
//!
//! The crate provides instance generators with adversarial attacks, an
//! initialization SDP solved by a first-order penalty method, k-means and
//! sign rounding, a boosting SDP over pseudorectangle constraints with an
//! approximate separation oracle and label-flip loops, end-to-end pipelines,
//! Monte Carlo verifiers, and a sweep harness.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boost;
pub mod error;
pub mod graph;
pub mod harness;
pub mod init_sdp;
pub mod instance;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod rng;
pub mod rounding;
pub mod stats;
pub mod verifiers;

pub use error::{Error, Result};
pub use graph::Graph;
pub use rounding::Labelling;
