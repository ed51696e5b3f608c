//! Spherical harmonics and rotation matrix elements at the complex angles
//! `theta^{+-}` defined by `cos(theta^{+-}) = +-x`, `sin(theta^{+-}) = -i t`,
//! with `x = c K / xi >= 1` and `t = c k / xi = sqrt(x^2 - 1)`.
//!
//! Every function is carried by a real, positive representative; the complex
//! value is restored by a fixed phase. For azimuthal number `m` (either sign)
//! and `s = +1` for `theta^+`, `s = -1` for `theta^-`:
//!
//! ```text
//! Y_lm(theta^s, 0)                = i^m       s^(l-|m|)   y
//! Y_lm(theta^s, 0) / sin(theta^s) = i^(m+1)   s^(l-|m|)   y_over_sin
//! d/dtheta Y_lm(theta^s, 0)       = i^(m+1)   s^(l-|m|-1) dy
//! d^l_{m,1}(theta^+) + d^l_{m,-1}(theta^+) = -i^(m+1) d_sum
//! d^l_{m,1}(theta^+) - d^l_{m,-1}(theta^+) = -i^(m+1) d_diff
//! ```
//!
//! Harmonics use the Condon-Shortley phase, `Y_lm = N_lm P_l^m(cos) e^{i m phi}`
//! with Ferrers `P_l^m(z) = (-1)^m (1 - z^2)^{m/2} d^m P_l / dz^m` and the
//! branch `(1 - z^2)^{1/2} = sin(theta)`.

use std::f64::consts::PI;

use super::ScaledValue;
use crate::error::{argument, domain, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AngularFunctions {
    pub ell_max: usize,
    pub m: i32,
    /// `cos(theta^+) = x >= 1`.
    pub cos_plus: f64,
    /// `t`, with `sin(theta^+) = -i t`.
    pub sin_plus_mag: f64,
    /// First multipole order, `max(1, |m|)`.
    pub ell_min: usize,
    pub y: Vec<ScaledValue>,
    pub y_over_sin: Vec<ScaledValue>,
    pub dy: Vec<ScaledValue>,
    pub d_sum: Vec<ScaledValue>,
    pub d_diff: Vec<ScaledValue>,
}

impl AngularFunctions {
    fn idx(&self, l: usize) -> usize {
        l - self.ell_min
    }

    pub fn y(&self, l: usize) -> ScaledValue {
        self.y[self.idx(l)]
    }

    pub fn dy(&self, l: usize) -> ScaledValue {
        self.dy[self.idx(l)]
    }

    pub fn y_over_sin(&self, l: usize) -> ScaledValue {
        self.y_over_sin[self.idx(l)]
    }

    pub fn d_sum(&self, l: usize) -> ScaledValue {
        self.d_sum[self.idx(l)]
    }

    pub fn d_diff(&self, l: usize) -> ScaledValue {
        self.d_diff[self.idx(l)]
    }
}

/// Angular representatives for `l = max(1,|m|)..=ell_max` at
/// `x = sqrt(xi_tilde^2 + k_tilde^2) / xi_tilde`.
pub fn angular_functions(
    ell_max: usize,
    m: i32,
    xi_tilde: f64,
    k_tilde: f64,
) -> Result<AngularFunctions> {
    if !(xi_tilde > 0.0) || !(k_tilde >= 0.0) {
        return Err(domain(format!(
            "angular functions need xi > 0 and k >= 0 (got {xi_tilde}, {k_tilde})"
        )));
    }
    let am = m.unsigned_abs() as usize;
    if am > ell_max {
        return Err(argument(format!("|m| = {am} exceeds ell_max = {ell_max}")));
    }
    let t = k_tilde / xi_tilde;
    let x = t.hypot(1.0);
    let table = LegendreTable::new(am + 1, ell_max, x, t);
    let ell_min = am.max(1);
    let n = ell_max + 1 - ell_min;
    let mut out = AngularFunctions {
        ell_max,
        m,
        cos_plus: x,
        sin_plus_mag: t,
        ell_min,
        y: Vec::with_capacity(n),
        y_over_sin: Vec::with_capacity(n),
        dy: Vec::with_capacity(n),
        d_sum: Vec::with_capacity(n),
        d_diff: Vec::with_capacity(n),
    };
    for l in ell_min..=ell_max {
        let c = rotation_norm(l);
        let (p, q) = (table.p(am, l), table.q(am, l));
        out.y.push(table.y(am, l));
        out.y_over_sin.push(if am > 0 {
            p
        } else if t > 0.0 {
            table.y(0, l) / ScaledValue::from_f64(t)
        } else {
            // Y_l0 / sin diverges at k = 0; it only ever enters multiplied by m = 0
            ScaledValue::ZERO
        });
        out.dy.push(q);
        out.d_sum.push(p.scale(c * f64::from(m)));
        out.d_diff.push(q.scale(c));
    }
    Ok(out)
}

/// `2 sqrt(4 pi / ((2l+1) l (l+1)))`: links `d^l_{m,+-1}` to `Y_lm`.
fn rotation_norm(l: usize) -> f64 {
    let lf = l as f64;
    2.0 * (4.0 * PI / ((2.0 * lf + 1.0) * lf * (lf + 1.0))).sqrt()
}

/// Continued associated Legendre functions at one argument `x >= 1`, for all
/// orders `0..=m_max` and degrees up to `ell_max`.
///
/// Order 0 stores `N_l0 P_l(x)`; order `m >= 1` stores
/// `F_l^m = N_lm t^(m-1) d^m P_l/dx^m (x)`, which stays finite at `t = 0`.
#[derive(Debug, Clone)]
pub(crate) struct LegendreTable {
    x: f64,
    t: f64,
    ell_max: usize,
    families: Vec<Vec<ScaledValue>>,
}

impl LegendreTable {
    pub(crate) fn new(m_max: usize, ell_max: usize, x: f64, t: f64) -> Self {
        let families = (0..=m_max)
            .map(|m| legendre_family(m, ell_max, x, t))
            .collect();
        LegendreTable {
            x,
            t,
            ell_max,
            families,
        }
    }

    fn family(&self, m: usize, l: usize) -> ScaledValue {
        if l < m || l > self.ell_max {
            ScaledValue::ZERO
        } else {
            self.families[m][l - m]
        }
    }

    /// Representative of `Y_lm`: `N_lm t^m d^m P_l/dx^m`.
    pub(crate) fn y(&self, m: usize, l: usize) -> ScaledValue {
        if m == 0 {
            self.family(0, l)
        } else {
            self.family(m, l).scale(self.t)
        }
    }

    /// Representative of `m Y_lm / sin(theta)` with the `m` factor left out.
    pub(crate) fn p(&self, m: usize, l: usize) -> ScaledValue {
        if m == 0 {
            // only ever multiplied by m = 0
            ScaledValue::ZERO
        } else {
            self.family(m, l)
        }
    }

    /// Representative of `d/dtheta Y_lm`.
    pub(crate) fn q(&self, m: usize, l: usize) -> ScaledValue {
        let lf = l as f64;
        let mf = m as f64;
        let upper = self
            .family(m + 1, l)
            .scale(((lf + mf + 1.0) * (lf - mf)).sqrt() * self.t);
        if m == 0 {
            upper
        } else {
            upper.add(&self.family(m, l).scale(mf * self.x))
        }
    }
}

fn legendre_family(m: usize, ell_max: usize, x: f64, t: f64) -> Vec<ScaledValue> {
    const RESCALE: f64 = 1e200;
    if m > ell_max {
        return Vec::new();
    }
    let mf = m as f64;
    let mut ln_seed = 0.5 * ((2.0 * mf + 1.0) / (4.0 * PI)).ln();
    for j in 1..=m {
        ln_seed += 0.5 * ((2 * j - 1) as f64 / (2 * j) as f64).ln();
    }
    if m >= 2 {
        if t == 0.0 {
            return vec![ScaledValue::ZERO; ell_max + 1 - m];
        }
        ln_seed += (mf - 1.0) * t.ln();
    }

    let mut out = Vec::with_capacity(ell_max + 1 - m);
    let mut offset = ln_seed;
    let mut prev = 0.0;
    let mut cur = 1.0;
    out.push(ScaledValue::from_log(offset));
    for l in m..ell_max {
        let lf = l as f64;
        let next = if l == m {
            (2.0 * mf + 3.0).sqrt() * x * cur
        } else {
            let l1 = lf + 1.0;
            let a = ((4.0 * l1 * l1 - 1.0) / (l1 * l1 - mf * mf)).sqrt();
            let b = ((2.0 * lf + 3.0) / (2.0 * lf - 1.0) * (lf * lf - mf * mf)
                / (l1 * l1 - mf * mf))
                .sqrt();
            a * x * cur - b * prev
        };
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            prev /= RESCALE;
            cur /= RESCALE;
            offset += RESCALE.ln();
        }
        out.push(ScaledValue::from_f64(cur) * ScaledValue::from_log(offset));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_incidence_is_identity_rotation() {
        for m in -4i32..=4 {
            let f = angular_functions(6, m, 1.3, 0.0).unwrap();
            for l in f.ell_min..=6 {
                // d^l_{m,+-1}(0) = delta_{m,+-1}
                let sum = f.d_sum(l).to_f64();
                let diff = f.d_diff(l).to_f64();
                // apply the phase -i^(m+1)
                let (s_expect, d_expect) = match m {
                    1 => (1.0, 1.0),
                    -1 => (1.0, -1.0),
                    _ => (0.0, 0.0),
                };
                let phase = match (m + 1).rem_euclid(4) {
                    0 => -1.0,
                    2 => 1.0,
                    _ => {
                        assert_eq!(sum, 0.0);
                        assert_eq!(diff, 0.0);
                        continue;
                    }
                };
                assert!(
                    (phase * sum - s_expect).abs() < 1e-14,
                    "m={m} l={l} sum={sum}"
                );
                assert!(
                    (phase * diff - d_expect).abs() < 1e-14,
                    "m={m} l={l} diff={diff}"
                );
            }
        }
    }

    #[test]
    fn derivative_representatives_closed_form() {
        // Y_21 = -sqrt(15/8pi) sin cos, d/dtheta -> -sqrt(15/8pi) cos(2 theta) = ... (2x^2 - 1)
        // Y_10 = sqrt(3/4pi) cos, d/dtheta -> sqrt(3/4pi) t
        let (xi, k) = (0.7, 1.3);
        let t: f64 = k / xi;
        let x = t.hypot(1.0);
        let f1 = angular_functions(2, 1, xi, k).unwrap();
        let want = (15.0 / (8.0 * PI)).sqrt() * (2.0 * x * x - 1.0);
        assert!((f1.dy(2).to_f64() / want - 1.0).abs() < 1e-13);
        assert!((f1.y_over_sin(2).to_f64() / ((15.0 / (8.0 * PI)).sqrt() * x) - 1.0).abs() < 1e-13);
        let f0 = angular_functions(1, 0, xi, k).unwrap();
        let want = (3.0 / (4.0 * PI)).sqrt() * t;
        assert!((f0.dy(1).to_f64() / want - 1.0).abs() < 1e-13);
    }

    #[test]
    fn m_zero_is_finite() {
        let f = angular_functions(10, 0, 0.7, 2.0).unwrap();
        assert!(f.d_sum.iter().all(|v| v.is_zero()));
        assert!(f
            .dy
            .iter()
            .chain(f.y.iter())
            .all(|v| v.log_magnitude().is_finite()));
    }

    #[test]
    fn legendre_polynomials_at_m_zero() {
        // N_l0 P_l(x), P_2 = (3x^2-1)/2, P_3 = (5x^3-3x)/2
        let x: f64 = 2.5;
        let f = angular_functions(3, 0, 1.0, (x * x - 1.0).sqrt()).unwrap();
        let n = |l: f64| ((2.0 * l + 1.0) / (4.0 * PI)).sqrt();
        assert!((f.y(2).to_f64() - n(2.0) * (3.0 * x * x - 1.0) / 2.0).abs() < 1e-13);
        assert!((f.y(3).to_f64() - n(3.0) * (5.0 * x.powi(3) - 3.0 * x) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn huge_arguments_stay_finite() {
        for &x in &[1.0, 10.0, 1e3, 1e6] {
            let t = (x * x - 1.0f64).sqrt();
            for m in [0, 1, 7, 60] {
                let f = angular_functions(100, m, 1.0, t).unwrap();
                assert!(f
                    .y
                    .iter()
                    .chain(&f.dy)
                    .all(|v| !v.log_magnitude().is_nan() && v.log_magnitude() < f64::INFINITY));
            }
        }
    }

    #[test]
    fn errors() {
        assert!(angular_functions(3, 4, 1.0, 1.0).is_err());
        assert!(angular_functions(3, 1, 0.0, 1.0).is_err());
        assert!(angular_functions(3, 1, 1.0, -1.0).is_err());
    }
}
