//! Sparse spatially stretched tripole array design.
//!
//! A spatially stretched tripole array spreads the three orthogonal dipoles
//! of each tripole over separate locations. This crate jointly optimizes
//! dipole locations and orientations against a reference beam response with
//! four methods: compressive-sensing and Bayesian-compressive-sensing driven
//! iterative minimum distance sampling (`cs-imdsm`, `bcs-imdsm`), an altered
//! iterative reweighted minimization scheme (`airms`), and a uniform-array
//! comparison (`ula`). Designs are evaluated with beam patterns and the
//! associated performance measures.
//!
//! The `parallel` feature (default) runs the data-parallel kernels on rayon;
//! disabling it falls back to sequential equivalents with identical results.

pub mod error;
pub mod linalg;
pub mod model;
pub mod problem;
pub mod socp;

pub use error::{DesignError, Result};
