//! Weighted low-rank matrix completion under row/column entrywise sampling.
//!
//! The crate provides, in dependency order:
//!
//! - [`mat`]: dense matrices and SVD/rank primitives;
//! - [`weights`]: row/column sampling weights (diagonals of R and C);
//! - [`measures`]: weighted norms, the Γ = √RΘ√C coordinate map, spikiness
//!   and rank measures, constraint-set and ℓ_q-ball membership;
//! - [`sampling`]: the signed, rescaled entrywise observation operator, its
//!   adjoint and noise models;
//! - [`solver`]: the nuclear-norm penalized least-squares estimator with an
//!   entrywise box constraint, solved by projected proximal gradient;
//! - [`diagnostics`]: predicted error rates, minimax floors, restricted
//!   strong convexity margins and error decompositions;
//! - [`packing`]: randomized well-separated low-rank packing sets;
//! - [`gen`]: random test-problem generators;
//! - [`seed`]: deterministic RNG derivation.
//!
//! All randomness flows through explicitly seeded ChaCha8 generators, so
//! every result in the crate is reproducible from a single 64-bit seed.

pub mod diagnostics;
pub mod error;
pub mod gen;
pub mod mat;
pub mod measures;
pub mod packing;
pub mod sampling;
pub mod seed;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
pub use mat::DenseMatrix;
pub use weights::WeightPair;
