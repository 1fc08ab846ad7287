//! Numerical synthetic-curvature toolkit for Lorentzian model spacetimes.
//!
//! Distortion coefficients, one-dimensional CD densities, model spacetimes
//! with lattice time separation, finite-difference curvature of Lipschitz
//! metrics, discrete Lorentz–Wasserstein transport and the timelike
//! comparison checks built on top of them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod comparison;
pub mod distortion;
pub mod error;
pub mod ext;
pub mod lipschitz_grid;
pub mod numerics;
pub mod models;
pub mod onedim;
pub mod reference;
pub mod suite;
pub mod transport;
mod par;

pub use error::{Error, Result};
pub use ext::ExtReal;
