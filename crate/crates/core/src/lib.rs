//! Stein's method for Poisson and Poisson process approximation.
//!
//! The crate is organised around the objects the method manipulates:
//!
//! - [`carrier`]: carrier spaces, point configurations and the matching
//!   metrics `rho_1` and `d'_1`, backed by an exact assignment solver.
//! - [`univariate`]: the Chen–Stein equation on the nonnegative integers,
//!   Poisson and Poisson-binomial laws, total variation and the classical bounds.
//! - [`palmexact`]: exact Palm calculus and Wasserstein distances for point
//!   process laws with finite support on a finite carrier.
//! - [`imdeath`]: the spatial immigration-death process and coupled Monte
//!   Carlo estimates of the Stein solution and its differences.
//! - [`models`]: samplers for Bernoulli, marked Bernoulli, Matérn hard-core
//!   and renewal processes.
//! - [`bounds`]: evaluators for the error bounds, in exact and Monte Carlo mode.
//!
//! Monte Carlo routines take a master seed; replication `i` of stream `s`
//! always sees the same random numbers, whatever the thread count.

#![forbid(unsafe_code)]
// `!(x >= 0.0)` is the NaN-rejecting form used for every domain check
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod bounds;
pub mod carrier;
pub mod error;
pub mod imdeath;
pub mod models;
pub mod palmexact;
pub mod rng;
pub mod stats;
pub mod transport;
pub mod univariate;

pub use error::{Error, Result};
