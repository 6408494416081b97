//! Packed symmetric tensors, spectral-norm certificates, cumulant estimators,
//! and a reproducible experiment harness for planted-spike detection.
//!
//! The crate is organized bottom-up:
//!
//! - [`symtensor`]: packed storage for symmetric order-`d` tensors and the
//!   multilinear primitives (form evaluation, gradient slices, unfolding).
//! - [`specnorm`]: lower/upper certificates for the tensor spectral norm and
//!   a small-dimension grid oracle.
//! - [`cumulant`]: plug-in third/fourth cumulant estimators and the whitening
//!   transform for the planted model.
//! - [`planted`]: the spiked data model, its two-point spike distribution,
//!   and parameter recipes.
//! - [`harness`]: seeded Monte Carlo experiments (detection sweeps, error
//!   quantiles, scaling fits, low-degree bound sums).

pub mod cumulant;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod planted;
pub mod specnorm;
pub mod stream;
pub mod symtensor;

pub use error::{Error, Result};
pub use symtensor::SymmetricTensor;
