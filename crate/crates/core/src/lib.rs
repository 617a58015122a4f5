//! Ultracold polar-molecule collisions from a two-parameter short-range model.
//!
//! The short-range physics is summarized by a reduced scattering length `s`
//! and an absorption parameter `y`; everything outside the matching radius is
//! propagated numerically on adiabatic curves of the centrifugal, van der
//! Waals and dipole–dipole interaction.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod potential;
pub mod propagator;
pub mod qdt;
pub mod scan;
pub mod units;

pub use error::{Error, Result};
