//! Heralded single-photon and squeezed-vacuum states of light in a truncated
//! Fock space: preparation, homodyne sampling, variance-law phase recovery,
//! maximum-likelihood tomography and phase-space analysis.
//!
//! Numerical code is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the common double-precision types.

pub mod analysis;
pub mod config;
pub mod error;
pub mod fock;
pub mod homodyne;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod scalar;
pub mod selftest;
pub mod state_prep;
pub mod tomography;

pub use error::{Error, Result};

pub type DensityMatrix64 = fock::DensityMatrix<f64>;
pub type DensityMatrix32 = fock::DensityMatrix<f32>;
pub type TwoModeState64 = fock::TwoModeState<f64>;
pub type HeraldConfig64 = state_prep::HeraldConfig<f64>;
pub type HeraldedState64 = state_prep::HeraldedState<f64>;
pub type ReconstructedState64 = tomography::ReconstructedState<f64>;
pub type EfficiencyReport64 = analysis::EfficiencyReport<f64>;
pub type WignerGrid64 = analysis::WignerGrid<f64>;
