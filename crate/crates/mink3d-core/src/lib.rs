//! Integral-geometry texture analysis of 3D binary volumes.
//!
//! The crate computes global, local (isotropic) and directional (anisotropic)
//! Minkowski functionals of binary voxel sets, converts per-voxel results
//! into histogram feature vectors, and evaluates regression models for
//! strength prediction under a repeated-split protocol with significance
//! testing. Synthetic phantom generation and HU->BMD calibration round out
//! an end-to-end pipeline over raw volume files.

// `!(x > 0.0)` guards reject NaN along with nonpositive values; the
// suggested `x <= 0.0` form would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aniso_mf;
pub mod calibration;
pub mod error;
pub mod features;
pub mod learn;
pub mod linalg;
pub mod local_mf;
pub mod minkowski;
pub mod phantom;
pub mod rng;
pub mod stats_eval;
pub mod voi;
pub mod volume;

pub use error::{Error, Result};
