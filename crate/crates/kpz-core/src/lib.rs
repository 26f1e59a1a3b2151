//! Numerical toolkit for finite-time Tracy-Widom statistics in KPZ-class
//! growth models.
//!
//! The crate bundles everything needed to compare exclusion-process and
//! polynuclear-growth simulations against their random-matrix limit laws at
//! finite time: scalar special functions ([`specfun`]), Airy and prelimit
//! model kernels ([`kernels`]), Fredholm determinants on the continuum and on
//! the model lattice ([`fredholm`]), exact-in-law samplers ([`simulate`]),
//! closed-form shift and scaling constants ([`shifts`]), and empirical
//! lattice-distribution analysis with a fitting protocol ([`analysis`]).
//!
//! Everything is plain `f64` numerics; no global state. Randomness is
//! confined to [`rng`] and flows from explicit 64-bit seeds.

pub mod analysis;
pub mod error;
pub mod fredholm;
pub mod kernels;
pub mod quad;
pub mod rng;
pub mod shifts;
pub mod simulate;
pub mod specfun;
pub mod stats;

pub use error::Error;

/// Crate result alias.
pub type Result<T> = std::result::Result<T, Error>;
