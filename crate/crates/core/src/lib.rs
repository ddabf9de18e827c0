//! Gaussian most-likely-trajectory dynamics of continuously monitored
//! harmonic and Sine-Gordon chains.

pub mod dynamics;
pub mod entanglement;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod fock;
pub mod gaussian;
pub mod lattice;
pub mod perturbation;
pub mod qsd;
pub mod sampling;
pub mod sctdha;
pub mod steady;

pub use nalgebra;
pub use dynamics::{EquationVariant, Generator, MltConfig, Model, MomentumDrift, PpBracket};
pub use error::{Error, Result};
pub use gaussian::{CovarianceMatrix, GaussianState};
pub use lattice::ChainParams;
pub use sctdha::{HarmonicCoefficients, SineGordonParams};
