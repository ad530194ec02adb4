//! Numerical Aubry–Mather laboratory for Tonelli Lagrangians on the two-torus.
//!
//! The crate is organised bottom-up: [`torus`] geometry, [`lagrangian`]
//! families, the Euler–Lagrange [`flow`], discrete [`variational`] problems,
//! Mather's [`mather`] functions, periodic [`orbits`] with their invariant
//! manifolds, [`entropy`] estimators, and the experiment [`pipeline`].

// NaN-rejecting `!(a < b)` guards and index loops over small fixed matrices are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod config;
pub mod entropy;
pub mod error;
pub mod flow;
pub mod fourier;
pub mod lagrangian;
pub mod linalg;
pub mod mather;
pub mod orbits;
pub mod pipeline;
pub mod torus;
pub mod variational;

pub use error::{Error, Result};
