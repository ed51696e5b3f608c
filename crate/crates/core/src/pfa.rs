//! Plane-plane Lifshitz energy and force, the reflectivity factors `eta_E`,
//! `eta_F`, and the proximity-force estimates they feed.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{argument, domain, Result};
use crate::materials::{fresnel_reduced, Material, HBAR, SPEED_OF_LIGHT};
use crate::quadrature::{integrate_adaptive, integrate_semi_infinite};
use crate::roundtrip::Geometry;
use crate::spectrum::CasimirResult;

const REL_TOL: f64 = 1e-11;

/// Per-area energy (J/m^2, negative) and force (N/m^2, `dE/dL`, positive)
/// between two parallel plates at distance `gap`.
pub fn plane_plane_lifshitz(gap: f64, plate_a: Material, plate_b: Material) -> Result<(f64, f64)> {
    let (e, f) = reduced_integrals(gap, plate_a, plate_b)?;
    let hc = HBAR * SPEED_OF_LIGHT;
    let energy = hc * e / (32.0 * PI * PI * gap.powi(3));
    let force = hc * f / (32.0 * PI * PI * gap.powi(4));
    Ok((energy, force))
}

/// Dimensionless integrals over `u = 2 K L` and `s = xi / (c K)`:
/// `e = int u^2 ds sum_p ln(1 - r r e^{-u})`, `f = int u^3 ds sum_p r r e^{-u} / (1 - r r e^{-u})`.
fn reduced_integrals(gap: f64, a: Material, b: Material) -> Result<(f64, f64)> {
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(domain(format!(
            "plate distance must be positive, got {gap}"
        )));
    }
    // plasma wavenumbers in units of 1/(2L)
    let wa = a.plasma_wavenumber_in(2.0 * gap);
    let wb = b.plasma_wavenumber_in(2.0 * gap);
    let products = move |u: f64, s: f64| {
        let (te_a, tm_a) = fresnel_reduced(s * u, u, wa);
        let (te_b, tm_b) = fresnel_reduced(s * u, u, wb);
        (te_a * te_b, tm_a * tm_b)
    };
    let inner = |u: f64, energy: bool| -> Result<f64> {
        let damp = (-u).exp();
        let f = |s: f64| {
            let (te, tm) = products(u, s);
            let term = |rr: f64| {
                let x = rr * damp;
                if energy {
                    (-x).ln_1p()
                } else {
                    x / (1.0 - x)
                }
            };
            term(te) + term(tm)
        };
        if wa.is_none() && wb.is_none() {
            Ok(f(0.5))
        } else {
            integrate_adaptive(f, 0.0, 1.0, 0.0, REL_TOL)
        }
    };
    let outer = |energy: bool, power: i32| {
        let mut err = None;
        let v = integrate_semi_infinite(
            |u| match inner(u, energy) {
                Ok(v) => u.powi(power) * v,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            3.0,
            0.0,
            REL_TOL,
        );
        match err {
            Some(e) => Err(e),
            None => v,
        }
    };
    Ok((outer(true, 2)?, outer(false, 3)?))
}

/// `(eta_E, eta_F)`: plate-plate energy and force relative to perfect mirrors.
pub fn eta_factors(gap: f64, plate: Material, sphere: Material) -> Result<(f64, f64)> {
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(domain(format!("gap must be positive, got {gap}")));
    }
    if plate.is_perfect() && sphere.is_perfect() {
        return Ok((1.0, 1.0));
    }
    let (e, f) = reduced_integrals(gap, plate, sphere)?;
    // ideal values of the reduced integrals: -2 zeta(4) Gamma(3), 2 zeta(4) Gamma(4)
    let z4 = PI.powi(4) / 90.0;
    Ok((e / (-4.0 * z4), f / (12.0 * z4)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfaEstimates {
    pub eta_e: f64,
    pub eta_f: f64,
    /// `eta_E hbar c pi^3 R / (360 L^3)`, N.
    pub f_pfa: f64,
    /// `eta_F hbar c pi^3 R / (120 L^4)`, N/m.
    pub g_pfa: f64,
    pub gap: f64,
    pub radius: f64,
    pub sphere: Material,
    pub plate: Material,
}

pub fn pfa_estimates(
    geometry: &Geometry,
    sphere: Material,
    plate: Material,
) -> Result<PfaEstimates> {
    let (l, r) = (geometry.gap(), geometry.sphere_radius());
    let (eta_e, eta_f) = eta_factors(l, plate, sphere)?;
    let hc = HBAR * SPEED_OF_LIGHT;
    let p3 = PI.powi(3);
    Ok(PfaEstimates {
        eta_e,
        eta_f,
        f_pfa: eta_e * hc * p3 * r / (360.0 * l.powi(3)),
        g_pfa: eta_f * hc * p3 * r / (120.0 * l.powi(4)),
        gap: l,
        radius: r,
        sphere,
        plate,
    })
}

/// `(rho_F, rho_G) = (F / F_PFA, G / G_PFA)`.
pub fn rho_factors(full: &CasimirResult, pfa: &PfaEstimates) -> Result<(f64, f64)> {
    if full.geometry.gap() != pfa.gap
        || full.geometry.sphere_radius() != pfa.radius
        || full.sphere != pfa.sphere
        || full.plate != pfa.plate
    {
        return Err(argument(
            "PFA estimate built for a different geometry or material",
        ));
    }
    match (full.force, full.gradient) {
        (Some(f), Some(g)) => Ok((f / pfa.f_pfa, g / pfa.g_pfa)),
        _ => Err(argument("result carries no force/gradient")),
    }
}
