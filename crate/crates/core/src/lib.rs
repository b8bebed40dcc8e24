//! Exact evaluation of deep Boltzmann machines over finite-valued units, and a
//! constructive compiler that turns a target distribution into the parameters
//! of a narrow DBM whose visible marginal approximates it.
//!
//! The crate is organised bottom-up:
//!
//! - [`space`] and [`distribution`]: q-ary hypercube enumeration and dense
//!   distributions with Hadamard products, neutralization and KL divergence.
//! - [`model`]: parameter containers, energies, the brute-force joint oracle
//!   and the `.dbm.json` format.
//! - [`inference`]: log-domain transfer messages, layer marginals, layer
//!   splits and feedforward conditionals.
//! - [`compiler`]: support planning, backward targets, the sharing and RBM
//!   constructions and the end-to-end `compile` pipeline.
//! - [`bounds`]: closed-form depth and width bounds.
//! - [`cli`]: the command-line front end.

pub mod bounds;
pub mod cli;
pub mod compiler;
pub mod distribution;
pub mod error;
pub mod inference;
pub mod logspace;
pub mod model;
pub mod space;

pub use distribution::{condition_split, hadamard, kl_divergence, neutralize, Distribution};
pub use error::{Error, Result};
pub use model::{BiasArray, DbmParams, FeedforwardLayer, WeightArray};
pub use space::{hamming_adjacent, StateSpace, SupportSet};
