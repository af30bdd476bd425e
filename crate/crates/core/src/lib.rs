//! Exact computations for the stochastic sandpile model on sink-rooted
//! multigraphs: recurrent-set enumeration and membership, the lacking
//! polynomial by enumeration and by deletion-contraction, and a seeded
//! Markov chain simulator.
//!
//! The polynomial and determinant code is generic over `num-traits` scalars;
//! the aliases below fix the exact types used by the rest of the crate.

pub mod det;
pub mod error;
pub mod lackpoly;
pub mod multigraph;
pub mod poly;
pub mod random;
pub mod recurrent;
pub mod sandpile;
pub mod verify;

pub use error::{Error, Result};
pub use multigraph::{GraphSpec, MultiGraph, SINK};
pub use poly::Polynomial;
pub use recurrent::{Limits, Orientation};
pub use sandpile::{ChainStats, Configuration, StochasticParams, TopplingPolicy};

/// Lacking polynomials carry arbitrary-precision nonnegative coefficients.
pub type LackingPolynomial = Polynomial<num_bigint::BigUint>;

/// Spanning-tree counts.
pub type TreeCount = num_bigint::BigUint;
