//! Off-the-grid estimation of doubly-dispersive channels.
//!
//! A channel `H = sum_s eta_s M_{nu_s} T_{tau_s}` probed with a trigonometric
//! identifier `w` produces samples that are *exactly* a sparse combination of
//! real delay-Doppler atoms pushed through a known matrix `G`:
//! `y = G sum_s eta_s a(tau_s, nu_s)`. The crate provides the atoms, the
//! operator, three recovery algorithms (grid OMP, multi-level grid refinement,
//! alternating descent conditional gradient) and the experiment harness used to
//! evaluate them.

pub mod atoms;
pub mod continuous;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod linalg;
pub mod measurement;
pub mod model;
pub mod rng;
mod serde_complex;
pub mod sparse;

pub use error::{Error, Result};
pub use model::{ChannelSpec, Feature, IdentifierPoly, ProblemDims, SampleVector};
pub use num_complex::Complex64;
