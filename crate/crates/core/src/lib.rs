//! Photophysics toolkit for nitrogen-vacancy centers in diamond nanocrystals.
//!
//! The crate is organised around the physical pipeline:
//!
//! * [`ellipsoid_optics`]: depolarization factors of triaxial ellipsoids and the
//!   local-field corrections they imply for absorption and spontaneous emission.
//! * [`rate_model`]: the reduced NV level scheme (ground triplet, excited triplet,
//!   metastable singlet), saturation behaviour, ODMR contrast and quantum yield.
//! * [`spectra`]: radiative rate from absorption and luminescence spectra.
//! * [`sizing`]: saturation-curve fitting and crystal size distributions derived
//!   from luminescence brightness alone.
//! * [`ensemble_sim`]: seeded Monte Carlo batches of nanocrystals used as ground truth
//!   for the sizing pipeline.

pub mod constants;
pub mod ellipsoid_optics;
pub mod ensemble_sim;
pub mod numeric;
pub mod rate_model;
pub mod sizing;
pub mod spectra;

pub use ellipsoid_optics::{
    bulk_interface, coupling_factors, depolarization_factors, shape_class_stats,
    shielding_factor, table1_report, DepolarizationFactors, Ellipsoid, FieldCoupling,
    OpticalEnvironment, OpticsError,
};
pub use rate_model::{DetectionChain, ExcitationConditions, PhotophysicsParams, RateError};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
