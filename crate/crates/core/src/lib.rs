//! Percolation-based classical simulation of noisy local Lindblad dynamics.
//!
//! A model is a set of local Lindblad terms on a lattice plus a uniform
//! entanglement-breaking noise channel at rate `kappa`. The dynamics is
//! Trotterized into convex mixtures of "fire" and "identity" maps; a random
//! assignment of these maps splits the circuit into small causal clusters
//! that can be contracted independently when noise dominates.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod cooling;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod oracle;
pub mod percolation;
pub mod rng;
pub mod sampler;
pub mod trotter;

pub use channel::{DenseOperator, EntanglementBreakingChannel, LindbladTerm, Superoperator};
pub use config::ModelConfig;
pub use error::{Result, SimError};
pub use lattice::{Lattice, ModelSpec};
