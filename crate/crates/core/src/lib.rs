//! A discrete laboratory for the total variation flow with Dirichlet data.
//!
//! The crate solves regularized and plain total variation problems on
//! uniform grids, returns the dual field together with a duality
//! certificate, advances the flow by implicit Euler steps and checks every
//! time slice against both the variational-inequality and the
//! Anzellotti-pairing notions of solution.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anzellotti;
pub mod domain;
pub mod elliptic;
pub mod energy;
pub mod error;
pub mod flow;
pub mod harness;

pub use domain::{build_grid, divergence, extend_with_boundary, gradient, FaceField, Grid, GridSpec, ScalarField};
pub use energy::EnergyParams;
pub use error::{Error, Result};
