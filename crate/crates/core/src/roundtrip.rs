//! Round-trip matrix `M^(m)(xi)` between the sphere and the plate.
//!
//! Everything is dimensionless in units of the center-to-plate distance
//! `Lc = L + R`: `xi~ = xi Lc / c`, and the transverse-wavevector integral is
//! written over `x = c K / xi >= 1`, where it carries the weight `e^{-tau x}`
//! with `tau = 2 xi~`. Gauss-Laguerre nodes in `u = tau (x - 1)` absorb it.
//!
//! After the phase factors of the angular functions are pulled out, each block
//! is real. With `p`, `q` the positive angular representatives and
//! `F = 2 pi^2 / sqrt(l1(l1+1) l2(l2+1))`,
//!
//! ```text
//! A_p = m^2 I[p1 p2 r_p]    B_p = I[q1 q2 r_p]
//! C_p = m   I[p1 q2 r_p]    D_p = m   I[q1 p2 r_p]    I[f] = int_1^inf dx e^{-tau x} f
//!
//! M(E,E) = a_l1 F (B_TM - A_TE)      M(E,M) = a_l1 F (D_TM - C_TE)
//! M(M,M) = b_l1 F (B_TE - A_TM)      M(M,E) = b_l1 F (D_TE - C_TM)
//! ```
//!
//! which equals the complex assembly up to the similarity `diag((-1)^l)`.
//! Rows and columns are ordered with all electric multipoles first.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{argument, domain, Error, Result};
use crate::materials::{fresnel_reduced, Material};
use crate::quadrature::gauss_laguerre;
use crate::specfun::{mie_reduced, LegendreTable, ScaledValue};

/// Sphere of radius `R` at gap `L` above a plate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    sphere_radius: f64,
    gap: f64,
}

impl Geometry {
    pub fn new(sphere_radius: f64, gap: f64) -> Result<Self> {
        if !(sphere_radius > 0.0 && sphere_radius.is_finite()) {
            return Err(domain(format!(
                "sphere radius must be positive, got {sphere_radius}"
            )));
        }
        if !(gap > 0.0 && gap.is_finite()) {
            return Err(domain(format!("gap must be positive, got {gap}")));
        }
        Ok(Geometry { sphere_radius, gap })
    }

    pub fn sphere_radius(&self) -> f64 {
        self.sphere_radius
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    /// `L + R`.
    pub fn center_distance(&self) -> f64 {
        self.gap + self.sphere_radius
    }

    /// `L / R`.
    pub fn aspect_ratio(&self) -> f64 {
        self.gap / self.sphere_radius
    }

    /// Same radius, new gap.
    pub fn with_gap(&self, gap: f64) -> Result<Self> {
        Geometry::new(self.sphere_radius, gap)
    }
}

/// Node rule for the imaginary-frequency axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XiScheme {
    /// Gauss-Legendre on `t in (0, 1)` mapped by `xi~ = s t / (1 - t)`.
    MappedGaussLegendre,
}

/// Node rule for the transverse-wavevector integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KScheme {
    /// Gauss-Laguerre in `u = 2 (K~ - xi~)`.
    GaussLaguerre,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub n_xi: usize,
    pub n_k: usize,
    /// Dimensionless scale of the frequency map, relative to the natural
    /// decay scale of the integrand.
    pub xi_scale: f64,
    pub xi_scheme: XiScheme,
    pub k_scheme: KScheme,
    /// When set, [`compute_abcd`] repeats the k-integral with `2 n_k` nodes
    /// and fails if any entry moves by more than this (relative to the
    /// largest entry).
    pub k_tolerance: Option<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            n_xi: 40,
            n_k: 60,
            xi_scale: 1.0,
            xi_scheme: XiScheme::MappedGaussLegendre,
            k_scheme: KScheme::GaussLaguerre,
            k_tolerance: None,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_xi < 8 || self.n_k < 8 {
            return Err(argument(format!(
                "quadrature needs at least 8 nodes per axis (n_xi = {}, n_k = {})",
                self.n_xi, self.n_k
            )));
        }
        if !(self.xi_scale > 0.0 && self.xi_scale.is_finite()) {
            return Err(argument(format!(
                "xi_scale must be positive, got {}",
                self.xi_scale
            )));
        }
        if let Some(tol) = self.k_tolerance {
            if !(tol > 0.0) {
                return Err(argument(format!("k tolerance must be positive, got {tol}")));
            }
        }
        Ok(())
    }

    /// Same spec with both node counts doubled.
    pub fn doubled(&self) -> Self {
        QuadratureSpec {
            n_xi: 2 * self.n_xi,
            n_k: 2 * self.n_k,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    TE,
    TM,
}

/// Angular functions, Fresnel amplitudes and Mie coefficients at one
/// frequency, shared by all blocks `m = -ell_max..=ell_max`.
#[derive(Debug, Clone)]
pub struct FrequencyContext {
    xi_tilde: f64,
    ell_max: usize,
    x: Vec<f64>,
    ln_w: Vec<f64>,
    tables: Vec<LegendreTable>,
    r_te: Vec<f64>,
    r_tm: Vec<f64>,
    /// Electric (`a_l`) and magnetic (`b_l`) Mie coefficients, `l = 1..`.
    mie_a: Vec<ScaledValue>,
    mie_b: Vec<ScaledValue>,
}

impl FrequencyContext {
    pub fn new(
        xi_tilde: f64,
        geometry: &Geometry,
        sphere: Material,
        plate: Material,
        n_k: usize,
        ell_max: usize,
    ) -> Result<Self> {
        if !(xi_tilde > 0.0 && xi_tilde.is_finite()) {
            return Err(domain(format!("xi~ must be positive, got {xi_tilde}")));
        }
        if ell_max < 1 {
            return Err(argument("ell_max must be at least 1"));
        }
        if n_k < 8 {
            return Err(argument(format!("need at least 8 k nodes, got {n_k}")));
        }
        let lc = geometry.center_distance();
        let tau = 2.0 * xi_tilde;
        let rule = gauss_laguerre(n_k);
        let plate_wp = plate.plasma_wavenumber_in(lc);
        let mut ctx = FrequencyContext {
            xi_tilde,
            ell_max,
            x: Vec::with_capacity(n_k),
            ln_w: Vec::with_capacity(n_k),
            tables: Vec::with_capacity(n_k),
            r_te: Vec::with_capacity(n_k),
            r_tm: Vec::with_capacity(n_k),
            mie_a: Vec::new(),
            mie_b: Vec::new(),
        };
        for (u, w) in rule.iter() {
            let x = 1.0 + u / tau;
            // t = sqrt(x^2 - 1) without cancellation near x = 1
            let d = u / tau;
            let t = (d * (2.0 + d)).sqrt();
            let (r_te, r_tm) = fresnel_reduced(xi_tilde, xi_tilde * x, plate_wp);
            ctx.x.push(x);
            ctx.ln_w.push(w.ln());
            ctx.tables
                .push(LegendreTable::new(ell_max + 1, ell_max, x, t));
            ctx.r_te.push(r_te);
            ctx.r_tm.push(r_tm);
        }
        let y = xi_tilde * geometry.sphere_radius() / lc;
        let (a, b) = mie_reduced(
            ell_max,
            y,
            sphere.plasma_wavenumber_in(geometry.sphere_radius()),
        );
        ctx.mie_a = a;
        ctx.mie_b = b;
        Ok(ctx)
    }

    pub fn xi_tilde(&self) -> f64 {
        self.xi_tilde
    }

    pub fn ell_max(&self) -> usize {
        self.ell_max
    }

    pub fn n_k(&self) -> usize {
        self.x.len()
    }

    fn tau(&self) -> f64 {
        2.0 * self.xi_tilde
    }

    /// `ln(e^{-tau} / tau)`, the Jacobian of the Laguerre substitution.
    fn ln_measure(&self) -> f64 {
        -self.tau() - self.tau().ln()
    }

    /// Mie coefficient `T^P_l`: `a_l` for E, `b_l` for M.
    fn mie(&self, electric: bool, l: usize) -> ScaledValue {
        if electric {
            self.mie_a[l - 1]
        } else {
            self.mie_b[l - 1]
        }
    }
}

/// The four integral matrices for one polarization, indexed `(l1 - l_min, l2 - l_min)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Abcd {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

/// Scaled `A/B/C/D` matrices for TE and TM.
///
/// The true value of an entry is `stored * exp(log_scale[i] + log_scale[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbcdMatrices {
    pub m: i32,
    pub xi_tilde: f64,
    pub ell_min: usize,
    pub ell_max: usize,
    pub log_scale: Vec<f64>,
    pub te: Abcd,
    pub tm: Abcd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbcdKind {
    A,
    B,
    C,
    D,
}

impl AbcdMatrices {
    pub fn polarization(&self, p: Polarization) -> &Abcd {
        match p {
            Polarization::TE => &self.te,
            Polarization::TM => &self.tm,
        }
    }

    /// Unscaled entry at multipoles `(l1, l2)`.
    pub fn value(&self, p: Polarization, kind: AbcdKind, l1: usize, l2: usize) -> f64 {
        let set = self.polarization(p);
        let mat = match kind {
            AbcdKind::A => &set.a,
            AbcdKind::B => &set.b,
            AbcdKind::C => &set.c,
            AbcdKind::D => &set.d,
        };
        let (i, j) = (l1 - self.ell_min, l2 - self.ell_min);
        mat[(i, j)] * (self.log_scale[i] + self.log_scale[j]).exp()
    }
}

/// Balanced round-trip block.
///
/// `matrix` is similar to the physical round-trip matrix through
/// `M_phys[i][j] = matrix[i][j] * exp(log_balance[i] - log_balance[j])`;
/// determinants and traces are unaffected.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTripBlock {
    pub m: i32,
    pub xi_tilde: f64,
    pub ell_min: usize,
    pub ell_max: usize,
    pub matrix: DMatrix<f64>,
    /// `dM/dLc` in units of `1/Lc`, at fixed physical frequency.
    pub dm_dl: Option<DMatrix<f64>>,
    /// `d^2M/dLc^2` in units of `1/Lc^2`.
    pub d2m_dl2: Option<DMatrix<f64>>,
    pub log_balance: Vec<f64>,
}

impl RoundTripBlock {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Row/column index of multipole `(l, P)`; electric first.
    pub fn index(&self, l: usize, electric: bool) -> usize {
        let n = self.ell_max + 1 - self.ell_min;
        (if electric { 0 } else { n }) + l - self.ell_min
    }

    fn undo(&self, mat: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(mat.nrows(), mat.ncols(), |i, j| {
            mat[(i, j)] * (self.log_balance[i] - self.log_balance[j]).exp()
        })
    }

    /// The physical (unbalanced) matrix; entries may overflow at large `l`.
    pub fn unbalanced(&self) -> DMatrix<f64> {
        self.undo(&self.matrix)
    }

    pub fn unbalanced_derivatives(&self) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        match (&self.dm_dl, &self.d2m_dl2) {
            (Some(d1), Some(d2)) => Some((self.undo(d1), self.undo(d2))),
            _ => None,
        }
    }
}

fn check_range(m: i32, ell_max: usize) -> Result<usize> {
    let am = m.unsigned_abs() as usize;
    let ell_min = am.max(1);
    if ell_max < ell_min {
        return Err(argument(format!(
            "empty multipole range: ell_max = {ell_max} < max(1, |m|) = {ell_min}"
        )));
    }
    Ok(ell_min)
}

/// Angular representatives on the k nodes, normalised per multipole.
///
/// Row `l - l_min` of `p` holds `sqrt(w_j) p_l(x_j) e^{-g_l}`, and likewise for
/// `q`, with `g_l` chosen so that the largest row entries are `O(1)`.
struct NodeVectors {
    p: DMatrix<f64>,
    q: DMatrix<f64>,
    g: Vec<f64>,
}

fn node_vectors(ctx: &FrequencyContext, am: usize, ell_min: usize) -> NodeVectors {
    let n = ctx.ell_max + 1 - ell_min;
    let nk = ctx.n_k();
    let mut raw_p = vec![ScaledValue::ZERO; n * nk];
    let mut raw_q = vec![ScaledValue::ZERO; n * nk];
    let mut g = vec![f64::NEG_INFINITY; n];
    for j in 0..nk {
        let table = &ctx.tables[j];
        for (i, l) in (ell_min..=ctx.ell_max).enumerate() {
            let p = table.p(am, l);
            let q = table.q(am, l);
            let big = p.log_magnitude().max(q.log_magnitude());
            g[i] = log_add(g[i], 2.0 * big + ctx.ln_w[j]);
            raw_p[i * nk + j] = p;
            raw_q[i * nk + j] = q;
        }
    }
    for gi in g.iter_mut() {
        *gi *= 0.5;
    }
    let half_w: Vec<f64> = ctx.ln_w.iter().map(|w| 0.5 * w).collect();
    let fill = |raw: &[ScaledValue]| {
        DMatrix::from_fn(n, nk, |i, j| {
            if half_w[j] == f64::NEG_INFINITY {
                0.0
            } else {
                raw[i * nk + j].to_f64_scaled(g[i] - half_w[j])
            }
        })
    };
    NodeVectors {
        p: fill(&raw_p),
        q: fill(&raw_q),
        g,
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let hi = a.max(b);
    hi + (-(a - b).abs()).exp().ln_1p()
}

/// `X diag(f) Y^T`.
fn weighted_gram(x: &DMatrix<f64>, f: &[f64], y: &DMatrix<f64>) -> DMatrix<f64> {
    let mut xf = x.clone();
    for (j, mut col) in xf.column_iter_mut().enumerate() {
        col *= f[j];
    }
    xf * y.transpose()
}

/// Scaled integrals for derivative order `order` (0, 1 or 2), where order
/// `n` multiplies the integrand by `(-tau x)^n`.
fn scaled_abcd(ctx: &FrequencyContext, nv: &NodeVectors, m: i32, order: i32) -> (Abcd, Abcd) {
    let mf = f64::from(m);
    let tau = ctx.tau();
    let make = |r: &[f64]| {
        let f: Vec<f64> = r
            .iter()
            .zip(&ctx.x)
            .map(|(r, x)| r * (-tau * x).powi(order))
            .collect();
        let pq = weighted_gram(&nv.p, &f, &nv.q);
        let (a, c, d) = if m == 0 {
            let z = DMatrix::zeros(pq.nrows(), pq.ncols());
            (z.clone(), z.clone(), z)
        } else {
            let pp = weighted_gram(&nv.p, &f, &nv.p);
            (pp * (mf * mf), &pq * mf, pq.transpose() * mf)
        };
        Abcd {
            a,
            b: weighted_gram(&nv.q, &f, &nv.q),
            c,
            d,
        }
    };
    (make(&ctx.r_te), make(&ctx.r_tm))
}

/// `A/B/C/D` integrals of the round-trip kernel for one `(m, xi~)`.
pub fn compute_abcd(
    m: i32,
    xi_tilde: f64,
    geometry: &Geometry,
    plate: Material,
    spec: &QuadratureSpec,
    ell_max: usize,
) -> Result<AbcdMatrices> {
    spec.validate()?;
    let ell_min = check_range(m, ell_max)?;
    let build = |n_k: usize| -> Result<AbcdMatrices> {
        let ctx =
            FrequencyContext::new(xi_tilde, geometry, Material::Perfect, plate, n_k, ell_max)?;
        Ok(abcd_from_context(&ctx, m, ell_min))
    };
    let out = build(spec.n_k)?;
    if let Some(tol) = spec.k_tolerance {
        let fine = build(2 * spec.n_k)?;
        let worst = abcd_change(&out, &fine);
        if worst > tol {
            return Err(Error::Convergence {
                what: format!("k-integral at m = {m}, xi~ = {xi_tilde}"),
                worst,
                tolerance: tol,
            });
        }
    }
    Ok(out)
}

fn abcd_from_context(ctx: &FrequencyContext, m: i32, ell_min: usize) -> AbcdMatrices {
    let am = m.unsigned_abs() as usize;
    let nv = node_vectors(ctx, am, ell_min);
    let (te, tm) = scaled_abcd(ctx, &nv, m, 0);
    let half = 0.5 * ctx.ln_measure();
    AbcdMatrices {
        m,
        xi_tilde: ctx.xi_tilde,
        ell_min,
        ell_max: ctx.ell_max,
        log_scale: nv.g.iter().map(|g| g + half).collect(),
        te,
        tm,
    }
}

/// Largest entry change between two evaluations, relative to the largest
/// entry of the same matrix.
fn abcd_change(a: &AbcdMatrices, b: &AbcdMatrices) -> f64 {
    let mut worst: f64 = 0.0;
    let n = a.ell_max + 1 - a.ell_min;
    for p in [Polarization::TE, Polarization::TM] {
        for kind in [AbcdKind::A, AbcdKind::B, AbcdKind::C, AbcdKind::D] {
            let mut scale: f64 = 0.0;
            let mut diff: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let (l1, l2) = (i + a.ell_min, j + a.ell_min);
                    let va = a.value(p, kind, l1, l2);
                    let vb = b.value(p, kind, l1, l2);
                    scale = scale.max(va.abs()).max(vb.abs());
                    diff = diff.max((va - vb).abs());
                }
            }
            if scale > 0.0 {
                worst = worst.max(diff / scale);
            }
        }
    }
    worst
}

/// Round-trip block from a prepared frequency context.
pub fn assemble_from_context(
    ctx: &FrequencyContext,
    m: i32,
    with_derivatives: bool,
) -> Result<RoundTripBlock> {
    let ell_min = check_range(m, ctx.ell_max)?;
    let n = ctx.ell_max + 1 - ell_min;
    let nv = node_vectors(ctx, m.unsigned_abs() as usize, ell_min);

    // psi_{l,P} = ln|T^P_l|/2 + g_l - ln sqrt(l(l+1)) + ln(2 pi^2 e^{-tau}/tau)/2
    let half_c = 0.5 * ((2.0 * PI * PI).ln() + ctx.ln_measure());
    let mut psi = vec![0.0; 2 * n];
    let mut sign = vec![0.0; 2 * n];
    let mut log_balance = vec![0.0; 2 * n];
    for (i, l) in (ell_min..=ctx.ell_max).enumerate() {
        let lf = l as f64;
        for (block, electric) in [(0, true), (1, false)] {
            let t = ctx.mie(electric, l);
            let k = block * n + i;
            let ln_t = t.log_magnitude();
            psi[k] = 0.5 * ln_t + nv.g[i] - 0.5 * (lf * (lf + 1.0)).ln() + half_c;
            sign[k] = f64::from(t.sign());
            log_balance[k] = 0.5 * ln_t;
        }
    }
    let factor = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let e = psi[i] + psi[j];
        if e == f64::NEG_INFINITY {
            0.0
        } else {
            sign[i] * e.exp()
        }
    });

    // the off-diagonal blocks are odd in m
    let parity = f64::from(m.signum());
    let build = |(te, tm): (Abcd, Abcd)| {
        let mut k = DMatrix::zeros(2 * n, 2 * n);
        k.view_mut((0, 0), (n, n)).copy_from(&(&tm.b - &te.a));
        k.view_mut((n, n), (n, n)).copy_from(&(&te.b - &tm.a));
        k.view_mut((0, n), (n, n))
            .copy_from(&((&tm.d - &te.c) * parity));
        k.view_mut((n, 0), (n, n))
            .copy_from(&((&te.d - &tm.c) * parity));
        k.component_mul(&factor)
    };
    // scaled_abcd uses |m| for the p/q families, sign handled by `parity`
    let am = m.abs();
    let matrix = build(scaled_abcd(ctx, &nv, am, 0));
    let (dm_dl, d2m_dl2) = if with_derivatives {
        (
            Some(build(scaled_abcd(ctx, &nv, am, 1))),
            Some(build(scaled_abcd(ctx, &nv, am, 2))),
        )
    } else {
        (None, None)
    };
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow(f64::INFINITY));
    }
    Ok(RoundTripBlock {
        m,
        xi_tilde: ctx.xi_tilde,
        ell_min,
        ell_max: ctx.ell_max,
        matrix,
        dm_dl,
        d2m_dl2,
        log_balance,
    })
}

/// Round-trip block `M^(m)(xi~)` for a sphere above a plate.
#[allow(clippy::too_many_arguments)]
pub fn assemble_block(
    m: i32,
    xi_tilde: f64,
    geometry: &Geometry,
    sphere: Material,
    plate: Material,
    spec: &QuadratureSpec,
    ell_max: usize,
    with_derivatives: bool,
) -> Result<RoundTripBlock> {
    spec.validate()?;
    check_range(m, ell_max)?;
    let ctx = FrequencyContext::new(xi_tilde, geometry, sphere, plate, spec.n_k, ell_max)?;
    assemble_from_context(&ctx, m, with_derivatives)
}
