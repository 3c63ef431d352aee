//! Quasi-infinitely divisible laws: exact spectral-function arithmetic,
//! Lévy–Khinchine characteristic functions, recovery of spectral data from
//! characteristic functions, and convergence diagnostics.

pub mod bv;
pub mod convergence;
pub mod error;
pub mod fourier;
pub mod levy_khinchine;
pub mod quadrature;
mod special;

pub use bv::{combine, stieltjes_integral, Atom, JordanPair, PiecewiseBV, Segment};
pub use error::{Error, Result};
pub use fourier::{distinguished_log, fs_transform, gil_pelaez_cdf, CharacteristicFn, TransformSamples};
pub use quadrature::{Estimate, QuadratureSettings};
