//! Mie coefficients of a sphere at imaginary frequency.
//!
//! Convention: `a_l` (electric) and `b_l` (magnetic) are the T-matrix
//! eigenvalues mapping a regular multipole wave `i_l(xi r/c)` of unit amplitude
//! onto the scattered wave `k_l(xi r/c)`, with the Bessel normalisation of
//! [`super::bessel`]. For a perfect sphere `b_l = -i_l/k_l < 0` and
//! `a_l = -[x i_l]'/[x k_l]' > 0`.

use serde::{Deserialize, Serialize};

use super::bessel::{irregular_ratios, ln_i0, ln_k0, regular_ratios};
use super::ScaledValue;
use crate::error::{argument, domain, Result};
use crate::materials::{Material, SPEED_OF_LIGHT};

/// Below this size parameter the vacuum Bessel factors use their leading
/// small-argument forms.
pub const STATIC_SIZE_PARAMETER: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MieCoefficients {
    pub ell_max: usize,
    /// `a[l-1]` holds `a_l`.
    pub a: Vec<ScaledValue>,
    /// `b[l-1]` holds `b_l`.
    pub b: Vec<ScaledValue>,
    /// Imaginary frequency, rad/s.
    pub xi: f64,
    /// `xi R / c`.
    pub size_parameter: f64,
}

impl MieCoefficients {
    pub fn a(&self, l: usize) -> ScaledValue {
        self.a[l - 1]
    }

    pub fn b(&self, l: usize) -> ScaledValue {
        self.b[l - 1]
    }

    /// Plain `a_l`, or an overflow error when only the scaled form exists.
    pub fn a_value(&self, l: usize) -> Result<f64> {
        self.a(l).try_to_f64()
    }

    pub fn b_value(&self, l: usize) -> Result<f64> {
        self.b(l).try_to_f64()
    }
}

/// Mie coefficients `a_l, b_l`, `l = 1..=ell_max`, for a sphere of radius
/// `radius` (m) at imaginary frequency `xi` (rad/s).
pub fn mie_coefficients(
    ell_max: usize,
    xi: f64,
    radius: f64,
    material: Material,
) -> Result<MieCoefficients> {
    if !(xi > 0.0) || !(radius > 0.0) {
        return Err(domain(format!(
            "Mie coefficients need xi > 0 and R > 0 (got xi = {xi}, R = {radius})"
        )));
    }
    if ell_max < 1 {
        return Err(argument("ell_max must be at least 1"));
    }
    let y = xi * radius / SPEED_OF_LIGHT;
    let (a, b) = mie_reduced(ell_max, y, material.plasma_wavenumber_in(radius));
    Ok(MieCoefficients {
        ell_max,
        a,
        b,
        xi,
        size_parameter: y,
    })
}

/// Core evaluation from the size parameter `y = xi R / c` and the plasma
/// wavenumber in units of `1/R` (`omega_p R / c`), `None` for a perfect sphere.
pub(crate) fn mie_reduced(
    ell_max: usize,
    y: f64,
    plasma: Option<f64>,
) -> (Vec<ScaledValue>, Vec<ScaledValue>) {
    let vac = VacuumFactors::new(ell_max, y);
    let inner = plasma.map(|wp| {
        let ny = (y * y + wp * wp).sqrt();
        let inv_n2 = y * y / (y * y + wp * wp);
        (ny, inv_n2, regular_ratios(ell_max + 1, ny))
    });

    let mut a = Vec::with_capacity(ell_max);
    let mut b = Vec::with_capacity(ell_max);
    for l in 1..=ell_max {
        let lf = l as f64;
        let ratio = ScaledValue::from_log(vac.ln_i[l] - vac.ln_k[l]);
        let (ri, rk) = (vac.ri[l], vac.rk[l]);
        let (al, bl) = match &inner {
            None => (-ri / rk, -1.0),
            Some((ny, inv_n2, rho_in)) => {
                // ri(z) = [z i_l(z)]' / i_l(z) = l + 1 + z i_{l+1}/i_l
                let ri_in = lf + 1.0 + ny * rho_in[l + 1];
                let bl = (ny * rho_in[l + 1] - vac.y_rho[l]) / (rk - ri_in);
                let al = (ri - ri_in * inv_n2) / (ri_in * inv_n2 - rk);
                (al, bl)
            }
        };
        a.push(ratio.scale(al));
        b.push(ratio.scale(bl));
    }
    (a, b)
}

struct VacuumFactors {
    ln_i: Vec<f64>,
    ln_k: Vec<f64>,
    /// `y i_{l+1}(y) / i_l(y)`
    y_rho: Vec<f64>,
    ri: Vec<f64>,
    rk: Vec<f64>,
}

impl VacuumFactors {
    fn new(ell_max: usize, y: f64) -> Self {
        let n = ell_max + 1;
        let mut ln_i = vec![0.0; n];
        let mut ln_k = vec![0.0; n];
        let mut y_rho = vec![0.0; n];
        let mut ri = vec![0.0; n];
        let mut rk = vec![0.0; n];
        if y < STATIC_SIZE_PARAMETER {
            // i_l ~ y^l/(2l+1)!!, k_l ~ (pi/2)(2l-1)!!/y^{l+1}
            let mut ln_df_odd = 0.0; // ln (2l+1)!!
            let mut ln_df_prev = 0.0; // ln (2l-1)!!, (-1)!! = 1
            for l in 0..n {
                let lf = l as f64;
                if l > 0 {
                    ln_df_prev = ln_df_odd;
                    ln_df_odd += (2.0 * lf + 1.0).ln();
                }
                ln_i[l] = lf * y.ln() - ln_df_odd;
                ln_k[l] = std::f64::consts::FRAC_PI_2.ln() + ln_df_prev - (lf + 1.0) * y.ln();
                y_rho[l] = y * y / (2.0 * lf + 3.0);
                ri[l] = lf + 1.0 + y_rho[l];
                rk[l] = -lf;
            }
        } else {
            let rho = regular_ratios(ell_max + 1, y);
            let sigma = irregular_ratios(ell_max + 1, y);
            let (mut li, mut lk) = (ln_i0(y), ln_k0(y));
            for l in 0..n {
                if l > 0 {
                    li += rho[l].ln();
                    lk += sigma[l].ln();
                }
                ln_i[l] = li;
                ln_k[l] = lk;
                y_rho[l] = y * rho[l + 1];
                ri[l] = l as f64 + 1.0 + y_rho[l];
                rk[l] = l as f64 + 1.0 - y * sigma[l + 1];
            }
        }
        VacuumFactors {
            ln_i,
            ln_k,
            y_rho,
            ri,
            rk,
        }
    }
}
