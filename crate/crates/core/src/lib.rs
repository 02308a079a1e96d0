//! Operator-norm regularization of heavy-tailed random matrices.
//!
//! The crate is organized around a single question: given an `n x n` random
//! matrix with i.i.d. entries of zero mean and unit variance, how much can the
//! operator norm be reduced by zeroing out a small submatrix, and when is no
//! such repair possible?
//!
//! - [`matcore`] holds dense matrices, index masks, and every norm computation
//!   (exact, estimated, and the Schur bound).
//! - [`randgen`] provides seeded, counter-addressable samplers for the entry
//!   distributions used in the experiments.
//! - [`damping`] implements quantile discretization and the damped-sum weight
//!   construction, plus the column-selection rule built on top of it.
//! - [`gp`] computes constructive Grothendieck-Pietsch factorization weights
//!   and prunes heavy-weight columns with a deterministic norm guarantee.
//! - [`reglab`] is the end-to-end regularization pipeline: band classification,
//!   per-band removal, mask assembly, and top-K truncation.
//! - [`lowerbound`] produces certificates that the norm cannot be repaired.
//! - [`harness`] is the CLI, matrix IO, and experiment driver layer.

pub mod damping;
pub mod error;
pub mod gp;
pub mod harness;
pub mod lowerbound;
pub mod matcore;
pub mod randgen;
pub mod reglab;
