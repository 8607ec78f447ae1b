//! Multi-fidelity surrogates that blend emulated quantum lattice-Boltzmann
//! solutions with classical finite-difference references through
//! Kolmogorov-Arnold networks.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiations.

pub mod error;
pub mod field;
pub mod kan;
pub mod metrics;
pub mod multifidelity;
#[cfg(feature = "oracles")]
pub mod oracle;
pub mod pde_classical;
pub mod qlbm;
pub mod scalar;
pub mod statevector;

pub use error::{Error, Result};
pub use field::{Field, Grid1D, Grid2D};
pub use scalar::Real;

pub type Field64 = Field<f64>;
pub type Grid1D64 = Grid1D<f64>;
pub type Dataset64 = multifidelity::Dataset<f64>;
pub type KanNetwork64 = kan::KanNetwork<f64>;
pub type MultifidelityModel64 = multifidelity::MultifidelityModel<f64>;
pub type Statevector64 = statevector::Statevector<f64>;
