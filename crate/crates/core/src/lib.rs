//! Numerical laboratory for observability of generalized Schrödinger
//! equations `i ∂_t u = F(Δ_g) u` on products of circles and 2-spheres.
//!
//! The crate computes joint spectra, frequency gap constants, sampled
//! geometric control conditions, truncated observability constants as
//! Gramian eigenvalues, the slice quantity g₁ᵛ, and eigenfunction
//! concentration probes.
//!
//! ```
//! use obslab::{ModeSet, ProductManifold, SymbolFunction, FactorManifold::Circle};
//!
//! let modes = ModeSet::for_product(ProductManifold::new(Circle, Circle), SymbolFunction::Identity, 1.0).unwrap();
//! assert_eq!(modes.len(), 5);
//! ```

pub mod cli;
pub mod control;
pub mod error;
pub mod gap;
pub mod geometry;
pub mod harmonics;
pub mod linalg;
pub mod observability;
pub mod output;
pub mod qlprobe;
pub mod quadrature;
pub mod regions;
pub mod spectral;

pub use control::{gcc_check, vgcc_check, ControlResolution, ControlVerdict, Witness};
pub use error::{Error, Result};
pub use gap::{gap_condition_holds, gap_report, GapReport};
pub use geometry::{factor_distance, FactorGeodesic, FactorManifold, FactorPoint, FactorSpectrum, SpectralLevel};
pub use observability::{
    assemble_gramian, g1v_estimate, obs_report, slice_family, time_integral, truncated_obs_constant,
    verify_slice_inequality, G1vMode, Gramian, ObservabilityConfig, ObservabilityReport,
};
pub use qlprobe::{concentration_scan, highest_weight_density, mass_in_region, ConcentrationFamily, ConcentrationSeries, ConcentrationTarget};
pub use quadrature::QuadratureGrid;
pub use regions::{FactorSet, ProductGeodesic, Region, RegionSlice};
pub use spectral::{evolve, product_distance, ModeSet, ProductManifold, ProductPoint, StateVector, SymbolFunction, SymbolSpec};
