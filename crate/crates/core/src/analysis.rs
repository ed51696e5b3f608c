//! Scans of the beyond-PFA factors over `x = L/R`, quartic fits with the
//! constant term pinned to 1, and the slope report against `|beta_G| < 0.4`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::materials::Material;
use crate::pfa::{pfa_estimates, rho_factors};
use crate::roundtrip::{Geometry, QuadratureSpec};
use crate::spectrum::{
    adaptive_lmax_with, casimir_force_gradient_with, ErrorProbes, SpectrumOptions, DEFAULT_LMAX_CAP,
};

/// Smallest `x` computed without an explicit override.
pub const MIN_VALIDATED_X: f64 = 0.15;

/// Experimental bound on `|beta_G|`.
pub const BETA_BOUND: f64 = 0.4;

/// Default fit window.
pub const DEFAULT_WINDOW: (f64, f64) = (0.4, 0.8);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoRow {
    pub x: f64,
    pub gap: f64,
    pub rho_f: f64,
    pub rho_g: f64,
    pub eta_e: f64,
    pub eta_f: f64,
    pub energy: f64,
    pub force: f64,
    pub gradient: f64,
    pub ell_max_used: usize,
    pub est_rel_err: f64,
    /// `false` when adaptive truncation hit its cap first.
    pub lmax_converged: bool,
    /// `false` for rows below [`MIN_VALIDATED_X`] computed on request.
    pub validated: bool,
    /// Set when the row failed; numeric fields are then NaN.
    pub error: Option<String>,
}

impl RhoRow {
    fn failed(x: f64, gap: f64, validated: bool, err: Error) -> Self {
        RhoRow {
            x,
            gap,
            rho_f: f64::NAN,
            rho_g: f64::NAN,
            eta_e: f64::NAN,
            eta_f: f64::NAN,
            energy: f64::NAN,
            force: f64::NAN,
            gradient: f64::NAN,
            ell_max_used: 0,
            est_rel_err: f64::NAN,
            lmax_converged: false,
            validated,
            error: Some(err.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoTable {
    pub radius: f64,
    pub sphere: Material,
    pub plate: Material,
    pub rows: Vec<RhoRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LmaxPolicy {
    Fixed(usize),
    Adaptive { target_rel_err: f64, cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub lmax: LmaxPolicy,
    pub spec: QuadratureSpec,
    pub probes: ErrorProbes,
    pub workers: Option<usize>,
    /// Compute rows below [`MIN_VALIDATED_X`] instead of refusing them.
    pub allow_unvalidated: bool,
}

impl ScanOptions {
    pub fn adaptive(target_rel_err: f64) -> Self {
        ScanOptions {
            lmax: LmaxPolicy::Adaptive {
                target_rel_err,
                cap: DEFAULT_LMAX_CAP,
            },
            spec: QuadratureSpec::default(),
            probes: ErrorProbes {
                nodes: true,
                lmax: false,
            },
            workers: None,
            allow_unvalidated: false,
        }
    }
}

/// One row per `x` with `ell_max` chosen adaptively.
pub fn rho_scan(
    radius: f64,
    sphere: Material,
    plate: Material,
    x_grid: &[f64],
    target_rel_err: f64,
) -> Result<RhoTable> {
    rho_scan_with(
        radius,
        sphere,
        plate,
        x_grid,
        &ScanOptions::adaptive(target_rel_err),
    )
}

pub fn rho_scan_with(
    radius: f64,
    sphere: Material,
    plate: Material,
    x_grid: &[f64],
    options: &ScanOptions,
) -> Result<RhoTable> {
    Geometry::new(radius, radius)?;
    options.spec.validate()?;
    for w in x_grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(argument(format!(
                "x grid must increase strictly ({} then {})",
                w[0], w[1]
            )));
        }
    }
    for &x in x_grid {
        if !(x > 0.0 && x.is_finite()) {
            return Err(argument(format!("x = {x} is not a positive gap ratio")));
        }
        if x < MIN_VALIDATED_X && !options.allow_unvalidated {
            return Err(argument(format!(
                "x = {x} is below the validated range x >= {MIN_VALIDATED_X}; \
                 pass the override to compute it anyway"
            )));
        }
    }
    let rows = x_grid
        .iter()
        .map(|&x| {
            let validated = x >= MIN_VALIDATED_X;
            let gap = x * radius;
            scan_row(radius, gap, sphere, plate, options)
                .map(|mut r| {
                    r.x = x;
                    r.validated = validated;
                    r
                })
                .unwrap_or_else(|e| RhoRow::failed(x, gap, validated, e))
        })
        .collect();
    Ok(RhoTable {
        radius,
        sphere,
        plate,
        rows,
    })
}

/// A single row at an explicit gap; no range check on `gap / radius` beyond
/// the `validated` flag.
pub fn rho_point(
    radius: f64,
    gap: f64,
    sphere: Material,
    plate: Material,
    options: &ScanOptions,
) -> Result<RhoRow> {
    options.spec.validate()?;
    let mut row = scan_row(radius, gap, sphere, plate, options)?;
    row.validated = row.x >= MIN_VALIDATED_X;
    Ok(row)
}

fn scan_row(
    radius: f64,
    gap: f64,
    sphere: Material,
    plate: Material,
    options: &ScanOptions,
) -> Result<RhoRow> {
    let geometry = Geometry::new(radius, gap)?;
    let (ell_max, lmax_err, converged, probes) = match options.lmax {
        LmaxPolicy::Fixed(l) => (l, 0.0, true, options.probes),
        LmaxPolicy::Adaptive {
            target_rel_err,
            cap,
        } => {
            let c = adaptive_lmax_with(
                &geometry,
                sphere,
                plate,
                target_rel_err,
                &options.spec,
                cap,
                options.workers,
            )?;
            // the adaptive step already measured the l_max increment
            let probes = ErrorProbes {
                lmax: false,
                ..options.probes
            };
            (c.ell_max, c.residual, c.converged, probes)
        }
    };
    let full = casimir_force_gradient_with(
        &geometry,
        sphere,
        plate,
        ell_max,
        &options.spec,
        &SpectrumOptions {
            workers: options.workers,
            probes,
        },
    )?;
    let pfa = pfa_estimates(&geometry, sphere, plate)?;
    let (rho_f, rho_g) = rho_factors(&full, &pfa)?;
    Ok(RhoRow {
        x: gap / radius,
        gap,
        rho_f,
        rho_g,
        eta_e: pfa.eta_e,
        eta_f: pfa.eta_f,
        energy: full.energy,
        force: full.force.unwrap_or(f64::NAN),
        gradient: full.gradient.unwrap_or(f64::NAN),
        ell_max_used: ell_max,
        est_rel_err: full.est_rel_err.max(lmax_err),
        lmax_converged: converged,
        validated: true,
        error: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RhoColumn {
    #[serde(rename = "rho_F")]
    RhoF,
    #[serde(rename = "rho_G")]
    RhoG,
}

impl RhoColumn {
    fn pick(&self, row: &RhoRow) -> f64 {
        match self {
            RhoColumn::RhoF => row.rho_f,
            RhoColumn::RhoG => row.rho_g,
        }
    }
}

/// `1 + c1 x + c2 x^2 + c3 x^3 + c4 x^4` fitted inside `window`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub column: RhoColumn,
    pub coefficients: [f64; 4],
    pub beta: f64,
    pub window: (f64, f64),
    pub rms_residual: f64,
    pub n_points: usize,
    pub weighted: bool,
    /// Every usable `(x, value, est_rel_err)` of the source table, inside the
    /// window or not, so that the fit can be repeated on other windows.
    pub samples: Vec<(f64, f64, f64)>,
}

impl FitResult {
    pub fn eval(&self, x: f64) -> f64 {
        let c = &self.coefficients;
        1.0 + x * (c[0] + x * (c[1] + x * (c[2] + x * c[3])))
    }
}

pub fn constrained_quartic_fit(
    table: &RhoTable,
    column: RhoColumn,
    window: (f64, f64),
) -> Result<FitResult> {
    constrained_quartic_fit_with(table, column, window, false)
}

/// As [`constrained_quartic_fit`]; `weighted` uses `1 / (est_rel_err * value)`
/// as point weights (floored at a relative error of 1e-6).
pub fn constrained_quartic_fit_with(
    table: &RhoTable,
    column: RhoColumn,
    window: (f64, f64),
    weighted: bool,
) -> Result<FitResult> {
    let samples = table
        .rows
        .iter()
        .filter(|r| r.is_ok())
        .map(|r| (r.x, column.pick(r), r.est_rel_err))
        .filter(|(x, v, _)| x.is_finite() && v.is_finite())
        .collect();
    fit_samples(samples, column, window, weighted)
}

fn fit_samples(
    samples: Vec<(f64, f64, f64)>,
    column: RhoColumn,
    window: (f64, f64),
    weighted: bool,
) -> Result<FitResult> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::Fit(format!("empty window ({lo}, {hi})")));
    }
    let slack = 1e-9 * (hi - lo);
    let inside: Vec<&(f64, f64, f64)> = samples
        .iter()
        .filter(|(x, _, _)| *x >= lo - slack && *x <= hi + slack)
        .collect();
    let n = inside.len();
    if n < 5 {
        return Err(Error::Fit(format!(
            "{n} points in window ({lo}, {hi}); at least 5 are needed"
        )));
    }
    let weight = |&(_, v, e): &(f64, f64, f64)| {
        if weighted {
            let e: f64 = if e.is_finite() { e } else { 0.0 };
            1.0 / (e.max(1e-6) * v.abs())
        } else {
            1.0
        }
    };
    let a = DMatrix::from_fn(n, 4, |i, j| {
        weight(inside[i]) * inside[i].0.powi(j as i32 + 1)
    });
    let b = DVector::from_fn(n, |i, _| weight(inside[i]) * (inside[i].1 - 1.0));
    let qr = a.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= 1e-12 * scale) {
        return Err(Error::Fit("design matrix is rank deficient".into()));
    }
    let rhs = qr.q().transpose() * &b;
    let c = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::Fit("triangular solve failed".into()))?;
    let coefficients = [c[0], c[1], c[2], c[3]];
    let mut fit = FitResult {
        column,
        coefficients,
        beta: coefficients[0],
        window,
        rms_residual: 0.0,
        n_points: n,
        weighted,
        samples: Vec::new(),
    };
    let ss: f64 = inside
        .iter()
        .map(|(x, v, _)| (fit.eval(*x) - v).powi(2))
        .sum();
    fit.rms_residual = (ss / n as f64).sqrt();
    fit.samples = samples;
    Ok(fit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaEntry {
    pub column: RhoColumn,
    pub beta: f64,
    pub within_bound: bool,
    pub window: (f64, f64),
    /// Refits on windows shifted by -0.1 and +0.1 that hold enough points.
    pub sweep: Vec<((f64, f64), f64)>,
    /// Largest minus smallest beta over the original and shifted windows.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaReport {
    pub bound: f64,
    pub entries: Vec<BetaEntry>,
}

pub fn beta_report(fits: &[FitResult]) -> Result<BetaReport> {
    if fits.is_empty() {
        return Err(argument("beta report needs at least one fit"));
    }
    let entries = fits
        .iter()
        .map(|f| {
            let (lo, hi) = f.window;
            let sweep: Vec<((f64, f64), f64)> = [-0.1, 0.1]
                .iter()
                .filter_map(|s| {
                    let w = (lo + s, hi + s);
                    fit_samples(f.samples.clone(), f.column, w, f.weighted)
                        .ok()
                        .map(|g| (w, g.beta))
                })
                .collect();
            let (mn, mx) = sweep
                .iter()
                .map(|(_, b)| *b)
                .fold((f.beta, f.beta), |(a, b), v| (a.min(v), b.max(v)));
            BetaEntry {
                column: f.column,
                beta: f.beta,
                within_bound: f.beta.abs() < BETA_BOUND,
                window: f.window,
                sweep,
                spread: mx - mn,
            }
        })
        .collect();
    Ok(BetaReport {
        bound: BETA_BOUND,
        entries,
    })
}
