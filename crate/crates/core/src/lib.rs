//! Reconstruction of expectation values of unitaries that an analog
//! simulator cannot realize directly, from expectation values sampled at
//! integer powers of a small accessible fractional power, plus an error
//! estimate for the case where the accessible unitaries are only
//! approximate.
//!
//! Module map:
//! - [`matrix`]: dense complex linear algebra and tolerances.
//! - [`user`]: spectral unitaries, sampling and sinc reconstruction.
//! - [`magnus`]: time-dependent Hamiltonian families, time-ordered
//!   evolution, Magnus terms and sequence design.
//! - [`channels`]: density matrices, Kraus channels, twirls and noise
//!   strengths.
//! - [`sear`]: the approximate-reconstruction pipeline with error bar.
//! - [`lattice`]: the driven tight-binding lattice family and target
//!   Hamiltonian used by the experiment presets.
//! - [`oracle`]: brute-force reference implementations used by tests.

pub mod channels;
pub mod error;
pub mod lattice;
pub mod magnus;
pub mod matrix;
pub mod oracle;
pub mod sear;
pub mod stats;
pub mod user;

pub use error::{Error, Result};
pub use matrix::{CMatrix, CVector, HermitianEig, Tolerances, C64};
