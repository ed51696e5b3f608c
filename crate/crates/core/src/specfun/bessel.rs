//! Modified spherical Bessel functions `i_l(x)` and `k_l(x)` in log-scaled form.
//!
//! Normalisation: `i_0(x) = sinh(x)/x`, `k_0(x) = (pi/2) e^{-x}/x`. With this
//! choice the Wronskian is `i_l k_l' - i_l' k_l = -pi / (2 x^2)`.

use std::f64::consts::FRAC_PI_2;

use super::ScaledValue;
use crate::error::{argument, domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselKind {
    /// `i_l`, regular at the origin, grows like `e^x / (2x)`.
    Regular,
    /// `k_l`, decays like `(pi/2) e^{-x} / x`.
    Irregular,
}

/// Values for `l = 0..=ell_max`.
pub fn modified_spherical_bessel(
    kind: BesselKind,
    ell_max: usize,
    x: f64,
) -> Result<Vec<ScaledValue>> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("Bessel argument must be positive, got {x}")));
    }
    if ell_max < 1 {
        return Err(argument("ell_max must be at least 1"));
    }
    let (ln0, ratios) = match kind {
        BesselKind::Regular => (ln_i0(x), regular_ratios(ell_max, x)),
        BesselKind::Irregular => (ln_k0(x), irregular_ratios(ell_max, x)),
    };
    let mut out = Vec::with_capacity(ell_max + 1);
    let mut acc = ln0;
    out.push(ScaledValue::from_log(acc));
    for r in &ratios[1..=ell_max] {
        acc += r.ln();
        out.push(ScaledValue::from_log(acc));
    }
    Ok(out)
}

pub(crate) fn ln_i0(x: f64) -> f64 {
    if x < 0.5 {
        (x.sinh() / x).ln()
    } else {
        x - (2.0 * x).ln() + (-(-2.0 * x).exp()).ln_1p()
    }
}

pub(crate) fn ln_k0(x: f64) -> f64 {
    FRAC_PI_2.ln() - x - x.ln()
}

/// `ratios[l] = i_l(x) / i_{l-1}(x)` for `l = 1..=top` (index 0 unused).
///
/// The top ratio comes from the continued fraction (modified Lentz), the rest
/// from the downward recurrence `r_l = 1 / ((2l+1)/x + r_{l+1})`.
pub(crate) fn regular_ratios(top: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; top + 2];
    let n = top + 1;
    out[n] = regular_ratio_cf(n, x);
    for l in (1..n).rev() {
        out[l] = 1.0 / ((2 * l + 1) as f64 / x + out[l + 1]);
    }
    out
}

/// `i_l(x) / i_{l-1}(x)` by continued fraction.
fn regular_ratio_cf(l: usize, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let b = |j: usize| (2 * (l + j) + 1) as f64 / x;
    let mut f = b(0).max(TINY);
    let mut c = f;
    let mut d = 0.0;
    for j in 1..10_000_000 {
        d += b(j);
        if d.abs() < TINY {
            d = TINY;
        }
        c = b(j) + 1.0 / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// `ratios[l] = k_l(x) / k_{l-1}(x)` for `l = 1..=top+1` (index 0 unused).
pub(crate) fn irregular_ratios(top: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; top + 2];
    out[1] = 1.0 + 1.0 / x;
    for l in 1..=top {
        out[l + 1] = 1.0 / out[l] + (2 * l + 1) as f64 / x;
    }
    out
}
