//! Building blocks for an LKH-style TSP solver whose candidate edges and node
//! penalties can come either from Held-Karp subgradient ascent or from a
//! learned sparse graph network.
//!
//! The pipeline for one instance is:
//!
//! 1. build the sparse γ-nearest-neighbour graph ([`instance::build_sparse_graph`]);
//! 2. obtain node penalties π and per-edge priorities, classically through
//!    [`subgrad::subgradient_ascent`] and [`onetree::alpha_measures`], or from
//!    [`sgn::forward`];
//! 3. build a [`candidates::CandidateSet`];
//! 4. run [`search::run_trials`] on the penalised distances.
//!
//! Exact solvers in [`oracle`] provide the ground truth used by the tests.

pub mod candidates;
pub mod cost;
pub mod error;
pub mod instance;
pub mod onetree;
pub mod oracle;
pub mod rng;
pub mod scalar;
pub mod search;
pub mod sgn;
pub mod subgrad;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use candidates::{CandidateQuality, CandidateSet};
pub use instance::{Metric, SparseGraph, TspInstance};
pub use onetree::OneTree;
pub use oracle::{OracleMethod, OracleResult};
pub use search::{SearchStats, Tour};
pub use subgrad::{AscentSchedule, PiVector};

/// Single-precision network, the width used for training and model files.
pub type SgnModel32 = sgn::SgnModel<f32>;
/// Double-precision network, used for gradient verification.
pub type SgnModel64 = sgn::SgnModel<f64>;
pub type SgnOutput32 = sgn::SgnOutput<f32>;
pub type SgnOutput64 = sgn::SgnOutput<f64>;
