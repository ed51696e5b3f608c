#![allow(dead_code)]
//! Straight complex-arithmetic assembly of the round-trip block, with Wigner
//! d-functions from their explicit sum formula at the complex angles, compared
//! with the phase-factorised real assembly.

use std::f64::consts::PI;

use casimir_core::materials::{fresnel_amplitudes, Material, SPEED_OF_LIGHT};
use casimir_core::quadrature::gauss_laguerre;
use casimir_core::roundtrip::{assemble_block, Geometry, QuadratureSpec};
use casimir_core::specfun::mie_coefficients;
use nalgebra::DMatrix;
pub use num_complex::Complex64 as C;

fn fact(n: i64) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Terms `(coef, a, b)` of `d^j_{m'm}(beta) = sum coef cos(beta/2)^a sin(beta/2)^b`.
fn wigner_terms(j: i64, mp: i64, m: i64) -> Vec<(f64, i32, i32)> {
    let pre = (fact(j + mp) * fact(j - mp) * fact(j + m) * fact(j - m)).sqrt();
    let mut out = Vec::new();
    for s in 0..=(2 * j) {
        if j + m - s < 0 || mp - m + s < 0 || j - mp - s < 0 {
            continue;
        }
        let sign = if (mp - m + s) % 2 == 0 { 1.0 } else { -1.0 };
        let den = fact(j + m - s) * fact(s) * fact(mp - m + s) * fact(j - mp - s);
        out.push((
            sign * pre / den,
            (2 * j + m - mp - 2 * s) as i32,
            (mp - m + 2 * s) as i32,
        ));
    }
    out
}

pub fn wigner_d(j: i64, mp: i64, m: i64, beta: C) -> C {
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    wigner_terms(j, mp, m)
        .into_iter()
        .map(|(k, a, b)| c.powi(a) * s.powi(b) * k)
        .sum()
}

pub fn wigner_d_prime(j: i64, mp: i64, m: i64, beta: C) -> C {
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    wigner_terms(j, mp, m)
        .into_iter()
        .map(|(k, a, b)| {
            let mut v = C::new(0.0, 0.0);
            if a > 0 {
                v += c.powi(a - 1) * (-s / 2.0) * s.powi(b) * f64::from(a);
            }
            if b > 0 {
                v += c.powi(a) * s.powi(b - 1) * (c / 2.0) * f64::from(b);
            }
            v * k
        })
        .sum()
}

fn ylm(l: i64, m: i64, theta: C) -> C {
    wigner_d(l, m, 0, theta) * ((2 * l + 1) as f64 / (4.0 * PI)).sqrt()
}

fn dylm(l: i64, m: i64, theta: C) -> C {
    wigner_d_prime(l, m, 0, theta) * ((2 * l + 1) as f64 / (4.0 * PI)).sqrt()
}

/// The textbook complex round-trip block, evaluated term by term in units of
/// the centre distance.
pub fn reference(
    m: i64,
    xi: f64,
    geometry: &Geometry,
    material: Material,
    lmax: i64,
    n_nodes: usize,
) -> DMatrix<C> {
    let lc = geometry.center_distance();
    let lmin = m.abs().max(1);
    let n = (lmax - lmin + 1) as usize;
    let xi_phys = xi * SPEED_OF_LIGHT / lc;
    let mie = mie_coefficients(lmax as usize, xi_phys, geometry.sphere_radius(), material).unwrap();
    // Riccati-Bessel normalisation of the Mie coefficients on the imaginary axis
    let riccati_mie = |l: i64, electric: bool| {
        let v = if electric {
            mie.a_value(l as usize).unwrap()
        } else {
            mie.b_value(l as usize).unwrap()
        };
        v * PI / 2.0 * if l % 2 == 0 { 1.0 } else { -1.0 }
    };
    let rule = gauss_laguerre(n_nodes);
    let mc = C::new(m as f64, 0.0);
    let i = C::new(0.0, 1.0);
    let zero = DMatrix::from_element(n, n, C::new(0.0, 0.0));
    // [polarization][A, B, C, D]
    let mut mats = [
        [zero.clone(), zero.clone(), zero.clone(), zero.clone()],
        [zero.clone(), zero.clone(), zero.clone(), zero],
    ];
    for (u, w) in rule.iter() {
        // u = 2 (K - xi)
        let big_k = xi + u / 2.0;
        let k = ((big_k - xi) * (big_k + xi)).sqrt();
        let a = (big_k / xi).acosh();
        let theta_p = C::new(0.0, -a);
        let theta_m = C::new(PI, a);
        // dk/K = du / (2k), k dk / K = du / 2; e^{-2K} = e^{-2 xi} e^{-u}
        let damp = (-2.0 * xi).exp() * w;
        let (r_te, r_tm) = fresnel_amplitudes(k / lc, xi_phys, material).unwrap();
        for (pi, r) in [(0, r_te), (1, r_tm)] {
            for l1 in lmin..=lmax {
                let dp = wigner_d(l1, m, 1, theta_p);
                let dm = wigner_d(l1, m, -1, theta_p);
                for l2 in lmin..=lmax {
                    let y = ylm(l2, m, theta_m);
                    let dy = dylm(l2, m, theta_m);
                    let (a1, a2) = ((l1 - lmin) as usize, (l2 - lmin) as usize);
                    let f0 = damp * r / (2.0 * k);
                    let f1 = damp * r / 2.0;
                    mats[pi][0][(a1, a2)] += -i * mc * (dp + dm) * y * f0;
                    mats[pi][1][(a1, a2)] += -(dp - dm) * dy * f1 / xi;
                    mats[pi][2][(a1, a2)] += (dp + dm) * dy * f1 / xi;
                    mats[pi][3][(a1, a2)] += i * mc * (dp - dm) * y * f0;
                }
            }
        }
    }
    let [te, tm] = &mats;
    let mut out = DMatrix::from_element(2 * n, 2 * n, C::new(0.0, 0.0));
    for l1 in lmin..=lmax {
        for l2 in lmin..=lmax {
            let (a1, a2) = ((l1 - lmin) as usize, (l2 - lmin) as usize);
            let pref = (PI * (2 * l1 + 1) as f64 / (l2 * (l2 + 1)) as f64).sqrt();
            let (ae, bm) = (riccati_mie(l1, true), riccati_mie(l1, false));
            out[(a1, a2)] = (te[0][(a1, a2)] + tm[1][(a1, a2)]) * pref * ae;
            out[(n + a1, n + a2)] = (tm[0][(a1, a2)] + te[1][(a1, a2)]) * pref * bm;
            out[(a1, n + a2)] = (te[2][(a1, a2)] + tm[3][(a1, a2)]) * pref * ae;
            out[(n + a1, a2)] = (tm[2][(a1, a2)] + te[3][(a1, a2)]) * pref * bm;
        }
    }
    out
}

/// Largest real and imaginary deviations, relative to the block norm, between
/// the reference (after the parity similarity) and the real assembly.
pub fn compare(m: i64, material: Material) -> (f64, f64) {
    let geometry = Geometry::new(100e-9, 50e-9).unwrap();
    let (xi, lmax) = (1.0, 3);
    let reference = reference(m, xi, &geometry, material, lmax, 120);
    let block = assemble_block(
        m as i32,
        xi,
        &geometry,
        material,
        material,
        &QuadratureSpec::default(),
        lmax as usize,
        false,
    )
    .unwrap();
    let real = block.unbalanced();
    let lmin = m.abs().max(1);
    let n = (lmax - lmin + 1) as usize;
    let parity = |i: usize| {
        if ((i % n) as i64 + lmin) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    };
    let norm = real.norm();
    let mut worst_re: f64 = 0.0;
    let mut worst_im: f64 = 0.0;
    for i in 0..2 * n {
        for j in 0..2 * n {
            let z = reference[(i, j)] * parity(i) * parity(j);
            worst_re = worst_re.max((z.re - real[(i, j)]).abs());
            worst_im = worst_im.max(z.im.abs());
        }
    }
    (worst_re / norm, worst_im / norm)
}
