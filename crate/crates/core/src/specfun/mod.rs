//! Special functions on the imaginary frequency axis.

mod angular;
mod bessel;
mod mie;
mod scaled;

pub(crate) use angular::LegendreTable;
pub use angular::{angular_functions, AngularFunctions};
pub use bessel::{modified_spherical_bessel, BesselKind};
pub(crate) use mie::mie_reduced;
pub use mie::{mie_coefficients, MieCoefficients, STATIC_SIZE_PARAMETER};
pub use scaled::ScaledValue;
