//! Dielectric response on the imaginary frequency axis and Fresnel amplitudes
//! of a flat mirror.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Fixed physical constants used throughout the crate.
#[derive(Debug, Clone, Copy)]
pub struct PhysicalConstants;

impl PhysicalConstants {
    pub const HBAR: f64 = HBAR;
    pub const C: f64 = SPEED_OF_LIGHT;
}

/// Mirror material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Material {
    /// Perfect reflector (`eps -> inf` at every frequency).
    Perfect,
    /// Plasma model `eps(i xi) = 1 + omega_p^2 / xi^2`, with `omega_p = 2 pi c / lambda_p`.
    Plasma {
        /// Plasma wavelength in metres.
        wavelength: f64,
    },
}

impl Material {
    /// Plasma model with the given plasma wavelength (metres).
    pub fn plasma(wavelength: f64) -> Result<Self> {
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(domain(format!(
                "plasma wavelength must be positive, got {wavelength}"
            )));
        }
        Ok(Material::Plasma { wavelength })
    }

    /// Gold-like plasma mirror, `lambda_p = 136 nm`.
    pub fn gold() -> Self {
        Material::Plasma { wavelength: 136e-9 }
    }

    pub fn is_perfect(&self) -> bool {
        matches!(self, Material::Perfect)
    }

    pub fn plasma_wavelength(&self) -> Option<f64> {
        match *self {
            Material::Perfect => None,
            Material::Plasma { wavelength } => Some(wavelength),
        }
    }

    /// Plasma frequency in rad/s.
    pub fn plasma_frequency(&self) -> Option<f64> {
        self.plasma_wavelength()
            .map(|lambda| 2.0 * PI * SPEED_OF_LIGHT / lambda)
    }

    /// Plasma wavenumber `omega_p / c` expressed in units of `1 / length`.
    pub(crate) fn plasma_wavenumber_in(&self, length: f64) -> Option<f64> {
        self.plasma_wavelength()
            .map(|lambda| 2.0 * PI * length / lambda)
    }
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Material::Perfect => write!(f, "perfect"),
            Material::Plasma { wavelength } => write!(f, "plasma({:.4e} m)", wavelength),
        }
    }
}

/// `eps(i xi)`; perfect mirrors map to [`Permittivity::Infinite`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Permittivity {
    Finite(f64),
    Infinite,
}

pub fn permittivity(xi: f64, material: Material) -> Result<Permittivity> {
    if !(xi > 0.0) {
        return Err(domain(format!(
            "imaginary frequency must be positive, got {xi}"
        )));
    }
    Ok(match material.plasma_frequency() {
        None => Permittivity::Infinite,
        Some(wp) => Permittivity::Finite(1.0 + (wp / xi).powi(2)),
    })
}

/// Reflection amplitudes `(r_TE, r_TM)` of a flat mirror for transverse
/// wavevector `k` (1/m) at imaginary frequency `xi` (rad/s).
pub fn fresnel_amplitudes(k: f64, xi: f64, material: Material) -> Result<(f64, f64)> {
    if !(xi > 0.0) {
        return Err(domain(format!(
            "imaginary frequency must be positive, got {xi}"
        )));
    }
    if !(k >= 0.0) {
        return Err(domain(format!(
            "transverse wavevector must be >= 0, got {k}"
        )));
    }
    let xi_k = xi / SPEED_OF_LIGHT;
    let kappa = (xi_k * xi_k + k * k).sqrt();
    Ok(fresnel_reduced(
        xi_k,
        kappa,
        material.plasma_frequency().map(|w| w / SPEED_OF_LIGHT),
    ))
}

/// Fresnel amplitudes with every argument in the same inverse-length unit.
///
/// `xi` is the frequency as a wavenumber, `kappa = sqrt(xi^2 + k^2)`,
/// `plasma` the plasma wavenumber (`None` for a perfect mirror). The forms
/// below avoid the `eps -> inf` overflow at small `xi` and the `kappa - kappa_m`
/// cancellation at large `k`.
pub(crate) fn fresnel_reduced(xi: f64, kappa: f64, plasma: Option<f64>) -> (f64, f64) {
    match plasma {
        None => (-1.0, 1.0),
        Some(wp) => {
            let wp2 = wp * wp;
            let kappa_m = (kappa * kappa + wp2).sqrt();
            let r_te = -wp2 / (kappa + kappa_m).powi(2);
            let xi2 = xi * xi;
            let a = (xi2 + wp2) * kappa;
            let b = xi2 * kappa_m;
            let r_tm = (a - b) / (a + b);
            (r_te, r_tm)
        }
    }
}
