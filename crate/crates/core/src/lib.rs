//! Rotating two-phase Hele-Shaw cell with Coriolis effects.
//!
//! Interfaces are star-shaped perturbations `r = 1 + ρ(θ)` of the unit circle
//! inside a cell of radius `R`. The crate provides the linear dispersion
//! relation, variable-domain elliptic solvers pulled back to fixed reference
//! domains, and a semi-implicit time integrator for the nonlinear interface
//! evolution.

pub mod dispersion;
pub mod elliptic;
pub mod evolution;
pub mod geometry;
pub mod krylov;
pub mod params;
pub mod radial;
pub mod spectral;
pub mod verify;

pub use geometry::{curvature_functional, linearized_curvature, normal_data, HanzawaMap, InterfaceShape};
pub use params::{CellModel, DerivedCoeffs, PhysicalParams};
pub use spectral::{CircleFunction, SpectralCoeffs};
