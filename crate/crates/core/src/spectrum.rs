//! Casimir energy, force and gradient from `log det(1 - M)`.
//!
//! `E = hbar int_0^inf dxi/2pi sum_m log det(1 - M^(m)(xi))`, with the `+-m`
//! blocks folded together. Frequencies are Gauss-Legendre nodes on
//! `t in (0, 1)` mapped to `xi = (c / L) s t / (1 - t)`, with `L` the gap: the
//! integrand decays like `e^{-2 xi L / c}` once the sphere is close.
//!
//! L-derivatives are taken at fixed physical frequency, where only the
//! propagation factor depends on `L`. Signs: `force = dE/dL > 0` and
//! `gradient = -d^2E/dL^2 > 0` for an attractive, weakening interaction.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::materials::{Material, HBAR, SPEED_OF_LIGHT};
use crate::quadrature::gauss_legendre_unit;
use crate::roundtrip::{assemble_from_context, FrequencyContext, Geometry, QuadratureSpec};

/// Default cap for [`adaptive_lmax`].
pub const DEFAULT_LMAX_CAP: usize = 40;

/// Below this Frobenius norm `ln det(1 - M)` is summed as `-sum_k tr(M^k)/k`;
/// the LU pivots `1 - O(M)` would round the result away.
const SERIES_NORM: f64 = 1e-2;

/// `ln det(1 - M)` through a pivoted LU factorisation.
pub fn log_det_one_minus(m: &DMatrix<f64>) -> Result<f64> {
    assert!(m.is_square(), "round-trip matrix must be square");
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    if let Some(v) = log_det_series(m) {
        return Ok(v);
    }
    let lu = one_minus(m).lu();
    lu_log_det(&lu)
}

fn log_det_series(m: &DMatrix<f64>) -> Option<f64> {
    let norm = m.norm();
    if norm >= SERIES_NORM {
        return None;
    }
    let mut power = m.clone();
    let mut acc = -power.trace();
    let mut bound = norm;
    let mut k = 1.0;
    while bound > 1e-17 * acc.abs() && bound > f64::MIN_POSITIVE {
        power = &power * m;
        k += 1.0;
        acc -= power.trace() / k;
        bound *= norm;
    }
    Some(acc)
}

fn one_minus(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::identity(m.nrows(), m.ncols()) - m
}

fn lu_log_det(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> Result<f64> {
    let u = lu.u();
    let mut sign = lu.p().determinant::<f64>();
    let mut acc = 0.0;
    for d in u.diagonal().iter() {
        if *d == 0.0 || !d.is_finite() {
            return Err(Error::Singular(format!("1 - M has pivot {d}")));
        }
        if *d < 0.0 {
            sign = -sign;
        }
        acc += d.abs().ln();
    }
    if sign < 0.0 {
        return Err(Error::Singular(
            "det(1 - M) < 0: the round-trip operator is not a contraction".into(),
        ));
    }
    Ok(acc)
}

/// `(d1, d2)` with `d1 = -tr[(1-M)^-1 dM]` and
/// `d2 = -tr[(1-M)^-1 d2M] - tr[((1-M)^-1 dM)^2]`.
pub fn trace_derivatives(
    m: &DMatrix<f64>,
    dm: &DMatrix<f64>,
    d2m: &DMatrix<f64>,
) -> Result<(f64, f64)> {
    assert!(m.shape() == dm.shape() && m.shape() == d2m.shape());
    let lu = one_minus(m).lu();
    derivatives_from_lu(&lu, dm, d2m)
}

fn derivatives_from_lu(
    lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    dm: &DMatrix<f64>,
    d2m: &DMatrix<f64>,
) -> Result<(f64, f64)> {
    let singular = || Error::Singular("1 - M is not invertible".into());
    let x = lu.solve(dm).ok_or_else(singular)?;
    let y = lu.solve(d2m).ok_or_else(singular)?;
    let n = x.nrows();
    let mut tr_xx = 0.0;
    for i in 0..n {
        for j in 0..n {
            tr_xx += x[(i, j)] * x[(j, i)];
        }
    }
    Ok((-x.trace(), -y.trace() - tr_xx))
}

/// Which refinements feed `est_rel_err`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorProbes {
    /// Recompute with `n_xi` and `n_k` doubled.
    pub nodes: bool,
    /// Recompute with `ell_max + 4`.
    pub lmax: bool,
}

impl ErrorProbes {
    pub const NONE: ErrorProbes = ErrorProbes {
        nodes: false,
        lmax: false,
    };
    pub const ALL: ErrorProbes = ErrorProbes {
        nodes: true,
        lmax: true,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
    pub probes: ErrorProbes,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            workers: None,
            probes: ErrorProbes::ALL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasimirResult {
    pub geometry: Geometry,
    pub sphere: Material,
    pub plate: Material,
    /// J, negative.
    pub energy: f64,
    /// N, `dE/dL`, positive for attraction. `None` from [`casimir_energy`].
    pub force: Option<f64>,
    /// N/m, `-d^2E/dL^2`, positive.
    pub gradient: Option<f64>,
    /// `E (L + R) / (hbar c)`.
    pub energy_dimensionless: f64,
    /// Energy of a single block `m` (J); `+-m` blocks are equal, so the
    /// total is `per_m[0] + 2 sum_{m>=1} per_m[m]`.
    pub per_m: Vec<(i32, f64)>,
    pub ell_max_used: usize,
    pub est_rel_err: f64,
    pub probes: ErrorProbes,
    pub quadrature: QuadratureSpec,
}

/// Frequency nodes in rad/s and their weights, for the map scaled by `l_ref`.
fn xi_nodes(spec: &QuadratureSpec, l_ref: f64) -> Vec<(f64, f64)> {
    let unit = SPEED_OF_LIGHT / l_ref * spec.xi_scale;
    gauss_legendre_unit(spec.n_xi)
        .iter()
        .map(|(t, w)| (unit * t / (1.0 - t), unit * w / ((1.0 - t) * (1.0 - t))))
        .collect()
}

/// Per-frequency, per-m values of `(ln det, d1, d2)`, d's in units of `1/Lc^k`.
type NodeRow = Vec<(f64, f64, f64)>;

#[allow(clippy::too_many_arguments)]
fn node_row(
    xi_tilde: f64,
    geometry: &Geometry,
    sphere: Material,
    plate: Material,
    n_k: usize,
    ell_max: usize,
    derivatives: bool,
) -> Result<NodeRow> {
    let ctx = FrequencyContext::new(xi_tilde, geometry, sphere, plate, n_k, ell_max)?;
    (0..=ell_max as i32)
        .map(|m| {
            let block = assemble_from_context(&ctx, m, derivatives)?;
            let lu = one_minus(&block.matrix).lu();
            let ld = match log_det_series(&block.matrix) {
                Some(v) => v,
                None => lu_log_det(&lu)?,
            };
            let (d1, d2) = match (&block.dm_dl, &block.d2m_dl2) {
                (Some(a), Some(b)) => derivatives_from_lu(&lu, a, b)?,
                _ => (0.0, 0.0),
            };
            Ok((ld, d1, d2))
        })
        .collect()
}

fn with_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| argument(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(job))
}

struct Sums {
    energy: f64,
    d1: f64,
    d2: f64,
    per_m: Vec<(i32, f64)>,
}

#[allow(clippy::too_many_arguments)]
fn spectral_sums(
    geometry: &Geometry,
    sphere: Material,
    plate: Material,
    ell_max: usize,
    spec: &QuadratureSpec,
    l_ref: f64,
    derivatives: bool,
    workers: Option<usize>,
) -> Result<Sums> {
    let lc = geometry.center_distance();
    let nodes = xi_nodes(spec, l_ref);
    let rows: Vec<Result<NodeRow>> = with_pool(workers, || {
        nodes
            .par_iter()
            .map(|(xi, _)| {
                node_row(
                    xi * lc / SPEED_OF_LIGHT,
                    geometry,
                    sphere,
                    plate,
                    spec.n_k,
                    ell_max,
                    derivatives,
                )
            })
            .collect()
    })?;
    let rows: Vec<NodeRow> = rows.into_iter().collect::<Result<_>>()?;

    // ordered by (m, node)
    let mut sums = Sums {
        energy: 0.0,
        d1: 0.0,
        d2: 0.0,
        per_m: Vec::with_capacity(ell_max + 1),
    };
    for m in 0..=ell_max {
        let weight = if m == 0 { 1.0 } else { 2.0 };
        let (mut e, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for ((_, w), row) in nodes.iter().zip(&rows) {
            let (ld, a, b) = row[m];
            e += w * ld;
            d1 += w * a;
            d2 += w * b;
        }
        let e_m = HBAR * e / (2.0 * PI);
        sums.per_m.push((m as i32, e_m));
        sums.energy += weight * e_m;
        sums.d1 += weight * HBAR * d1 / (2.0 * PI * lc);
        sums.d2 += weight * HBAR * d2 / (2.0 * PI * lc * lc);
    }
    Ok(sums)
}

fn check_inputs(ell_max: usize, spec: &QuadratureSpec) -> Result<()> {
    spec.validate()?;
    if ell_max < 1 {
        return Err(argument("ell_max must be at least 1"));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    geometry: &Geometry,
    sphere: Material,
    plate: Material,
    ell_max: usize,
    spec: &QuadratureSpec,
    options: &SpectrumOptions,
    derivatives: bool,
) -> Result<CasimirResult> {
    check_inputs(ell_max, spec)?;
    let l_ref = geometry.gap();
    let sums = spectral_sums(
        geometry,
        sphere,
        plate,
        ell_max,
        spec,
        l_ref,
        derivatives,
        options.workers,
    )?;
    let mut est: f64 = 0.0;
    let rel = |e: f64| ((e - sums.energy) / sums.energy).abs();
    if options.probes.nodes {
        let fine = spectral_sums(
            geometry,
            sphere,
            plate,
            ell_max,
            &spec.doubled(),
            l_ref,
            false,
            options.workers,
        )?;
        est = est.max(rel(fine.energy));
    }
    if options.probes.lmax {
        let more = spectral_sums(
            geometry,
            sphere,
            plate,
            ell_max + 4,
            spec,
            l_ref,
            false,
            options.workers,
        )?;
        est = est.max(rel(more.energy));
    }
    Ok(CasimirResult {
        geometry: *geometry,
        sphere,
        plate,
        energy: sums.energy,
        force: derivatives.then_some(sums.d1),
        gradient: derivatives.then_some(-sums.d2),
        energy_dimensionless: sums.energy * geometry.center_distance() / (HBAR * SPEED_OF_LIGHT),
        per_m: sums.per_m,
        ell_max_used: ell_max,
        est_rel_err: est,
        probes: options.probes,
        quadrature: *spec,
    })
}

/// Casimir energy; `force` and `gradient` are left empty.
pub fn casimir_energy(
    geometry: &Geometry,
    sphere: Material,
    plate: Material,
    ell_max: usize,
    spec: &QuadratureSpec,
) -> Result<CasimirResult> {
    casimir_energy_with(
        geometry,
        sphere,
        plate,
        ell_max,
        spec,
        &SpectrumOptions::default(),
    )
}

pub fn casimir_energy_with(
    geometry: &Geometry,
    sphere: Material,
    plate: Material,
    ell_max: usize,
    spec: &QuadratureSpec,
    options: &SpectrumOptions,
) -> Result<CasimirResult> {
    evaluate(geometry, sphere, plate, ell_max, spec, options, false)
}

/// Energy, force and gradient from the trace formulas on one set of nodes.
pub fn casimir_force_gradient(
    geometry: &Geometry,
    sphere: Material,
    plate: Material,
    ell_max: usize,
    spec: &QuadratureSpec,
) -> Result<CasimirResult> {
    casimir_force_gradient_with(
        geometry,
        sphere,
        plate,
        ell_max,
        spec,
        &SpectrumOptions::default(),
    )
}

pub fn casimir_force_gradient_with(
    geometry: &Geometry,
    sphere: Material,
    plate: Material,
    ell_max: usize,
    spec: &QuadratureSpec,
    options: &SpectrumOptions,
) -> Result<CasimirResult> {
    evaluate(geometry, sphere, plate, ell_max, spec, options, true)
}

/// Trace-formula derivatives next to 5-point finite differences of the energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteDifferenceCheck {
    pub force: f64,
    pub gradient: f64,
    pub force_fd: f64,
    pub gradient_fd: f64,
    pub step: f64,
}

impl FiniteDifferenceCheck {
    pub fn force_rel_err(&self) -> f64 {
        ((self.force_fd - self.force) / self.force).abs()
    }

    pub fn gradient_rel_err(&self) -> f64 {
        ((self.gradient_fd - self.gradient) / self.gradient).abs()
    }
}

/// Recomputes force and gradient from energies at `L + k h`, `k = -2..=2`,
/// `h = rel_step L`, keeping the physical frequency nodes of the base gap.
pub fn finite_difference_check(
    geometry: &Geometry,
    sphere: Material,
    plate: Material,
    ell_max: usize,
    spec: &QuadratureSpec,
    rel_step: f64,
    workers: Option<usize>,
) -> Result<FiniteDifferenceCheck> {
    check_inputs(ell_max, spec)?;
    if !(rel_step > 0.0 && rel_step < 0.5) {
        return Err(argument(format!(
            "relative step must be in (0, 0.5), got {rel_step}"
        )));
    }
    let l_ref = geometry.gap();
    let h = rel_step * l_ref;
    let base = spectral_sums(geometry, sphere, plate, ell_max, spec, l_ref, true, workers)?;
    let mut e = [0.0; 5];
    for (k, slot) in e.iter_mut().enumerate() {
        *slot = if k == 2 {
            base.energy
        } else {
            let g = geometry.with_gap(l_ref + (k as f64 - 2.0) * h)?;
            spectral_sums(&g, sphere, plate, ell_max, spec, l_ref, false, workers)?.energy
        };
    }
    let d1 = (e[0] - 8.0 * e[1] + 8.0 * e[3] - e[4]) / (12.0 * h);
    let d2 = (-e[0] + 16.0 * e[1] - 30.0 * e[2] + 16.0 * e[3] - e[4]) / (12.0 * h * h);
    Ok(FiniteDifferenceCheck {
        force: base.d1,
        gradient: -base.d2,
        force_fd: d1,
        gradient_fd: -d2,
        step: h,
    })
}

/// Outcome of [`adaptive_lmax`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmaxChoice {
    pub ell_max: usize,
    /// `|E(ell_max + 4) / E(ell_max) - 1|`.
    pub residual: f64,
    /// `false` when the cap was reached first.
    pub converged: bool,
}

/// Smallest `ell_max` in `4, 8, ...` whose energy moves by less than
/// `target_rel_err` when `ell_max` grows by 4.
pub fn adaptive_lmax(
    geometry: &Geometry,
    sphere: Material,
    plate: Material,
    target_rel_err: f64,
    spec: &QuadratureSpec,
) -> Result<LmaxChoice> {
    adaptive_lmax_with(
        geometry,
        sphere,
        plate,
        target_rel_err,
        spec,
        DEFAULT_LMAX_CAP,
        None,
    )
}

pub fn adaptive_lmax_with(
    geometry: &Geometry,
    sphere: Material,
    plate: Material,
    target_rel_err: f64,
    spec: &QuadratureSpec,
    cap: usize,
    workers: Option<usize>,
) -> Result<LmaxChoice> {
    if !(target_rel_err > 1e-8 && target_rel_err < 1e-1) {
        return Err(argument(format!(
            "target relative error must lie in (1e-8, 1e-1), got {target_rel_err}"
        )));
    }
    if cap < 4 {
        return Err(argument(format!(
            "ell_max cap must be at least 4, got {cap}"
        )));
    }
    check_inputs(4, spec)?;
    let l_ref = geometry.gap();
    let energy = |l: usize| -> Result<f64> {
        Ok(spectral_sums(geometry, sphere, plate, l, spec, l_ref, false, workers)?.energy)
    };
    let mut l = 4;
    let mut e = energy(l)?;
    let mut residual = f64::INFINITY;
    while l + 4 <= cap {
        let next = energy(l + 4)?;
        residual = ((next - e) / e).abs();
        if residual < target_rel_err {
            return Ok(LmaxChoice {
                ell_max: l,
                residual,
                converged: true,
            });
        }
        l += 4;
        e = next;
    }
    Ok(LmaxChoice {
        ell_max: l,
        residual,
        converged: false,
    })
}
