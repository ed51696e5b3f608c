use std::fs;

use casimir_core::analysis::{
    beta_report, constrained_quartic_fit_with, rho_point, rho_scan_with, BetaEntry, FitResult,
    LmaxPolicy, ScanOptions,
};
use casimir_core::materials::Material;
use casimir_core::pfa::pfa_estimates;
use casimir_core::roundtrip::Geometry;
use casimir_core::spectrum::ErrorProbes;
use serde::{Deserialize, Serialize};

use crate::config::{Command, Distances, RunConfig};
use crate::output::{read_scan, render, table_from_records, PfaRecord, ScanRecord};
use crate::Failure;

/// What a run produced before anything is written.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub text: String,
    pub summary: String,
    /// Adaptive truncation hit its cap or a row failed; output is still valid
    /// for the rows that succeeded.
    pub incomplete: Option<Failure>,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        self.incomplete.as_ref().map_or(0, Failure::exit_code)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub fit: FitResult,
    pub report: BetaEntry,
}

fn scan_options(cfg: &RunConfig) -> ScanOptions {
    let probes = match (cfg.error_probes, cfg.lmax) {
        (false, _) => ErrorProbes::NONE,
        // adaptive truncation measures the l_max increment itself
        (true, LmaxPolicy::Adaptive { .. }) => ErrorProbes {
            nodes: true,
            lmax: false,
        },
        (true, LmaxPolicy::Fixed(_)) => ErrorProbes::ALL,
    };
    ScanOptions {
        lmax: cfg.lmax,
        spec: cfg.quadrature,
        probes,
        workers: cfg.workers,
        allow_unvalidated: cfg.allow_unvalidated,
    }
}

fn materials(cfg: &RunConfig) -> (Material, Material) {
    (
        cfg.sphere.expect("validated config"),
        cfg.plate.expect("validated config"),
    )
}

fn incomplete(rows: &[casimir_core::analysis::RhoRow]) -> Option<Failure> {
    if let Some(r) = rows.iter().find(|r| !r.is_ok()) {
        let msg = format!("x = {}: {}", r.x, r.error.as_deref().unwrap_or(""));
        return Some(if msg.contains("no convergence") {
            Failure::Convergence(msg)
        } else {
            Failure::Internal(msg)
        });
    }
    rows.iter().find(|r| !r.lmax_converged).map(|r| {
        Failure::Convergence(format!(
            "x = {}: l_max cap {} reached, est_rel_err {:.2e}",
            r.x, r.ell_max_used, r.est_rel_err
        ))
    })
}

/// Runs the configured pipeline and renders its output.
pub fn produce(cfg: &RunConfig) -> Result<Outcome, Failure> {
    match cfg.command {
        Command::Energy => {
            let (sphere, plate) = materials(cfg);
            let (radius, gap) = match (cfg.radius, &cfg.distances) {
                (Some(r), Some(Distances::Gap(l))) => (r, *l),
                _ => return Err(Failure::Config("energy needs `R` and `L`".into())),
            };
            let row = rho_point(radius, gap, sphere, plate, &scan_options(cfg))?;
            let summary = format!(
                "E = {:.6e} J, F = {:.6e} N, G = {:.6e} N/m, rho_F = {:.5}, rho_G = {:.5}, \
                 ell_max = {}, est_rel_err = {:.2e}",
                row.energy,
                row.force,
                row.gradient,
                row.rho_f,
                row.rho_g,
                row.ell_max_used,
                row.est_rel_err
            );
            let rows = [row];
            Ok(Outcome {
                text: render(
                    &[ScanRecord::new(&rows[0], radius, sphere, plate)],
                    cfg.format,
                )?,
                summary,
                incomplete: incomplete(&rows),
            })
        }
        Command::Scan => {
            let (sphere, plate) = materials(cfg);
            let (radius, grid) = match (cfg.radius, &cfg.distances) {
                (Some(r), Some(Distances::Grid(g))) => (r, g),
                _ => return Err(Failure::Config("scan needs `R` and an x grid".into())),
            };
            let table = rho_scan_with(radius, sphere, plate, grid, &scan_options(cfg))?;
            let ok = table.rows.iter().filter(|r| r.is_ok()).count();
            let worst = table
                .rows
                .iter()
                .filter(|r| r.is_ok())
                .map(|r| r.est_rel_err)
                .fold(0.0, f64::max);
            let summary = format!(
                "scan: {ok}/{} rows, x = {}..{}, sphere {sphere}, plate {plate}, worst est_rel_err = {worst:.2e}",
                table.rows.len(),
                grid.first().copied().unwrap_or(f64::NAN),
                grid.last().copied().unwrap_or(f64::NAN),
            );
            Ok(Outcome {
                text: render(&ScanRecord::from_table(&table), cfg.format)?,
                summary,
                incomplete: incomplete(&table.rows),
            })
        }
        Command::Fit => {
            let path = cfg.input.as_ref().expect("validated config");
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            let table = table_from_records(&read_scan(&text)?)?;
            let fit = constrained_quartic_fit_with(&table, cfg.column, cfg.window, cfg.weighted)?;
            let report = beta_report(std::slice::from_ref(&fit))?.entries.remove(0);
            let summary = format!(
                "fit: beta = {:.5}, |beta| < {} {}, {} points in [{}, {}], rms = {:.2e}, window spread = {:.2e}",
                fit.beta,
                casimir_core::analysis::BETA_BOUND,
                if report.within_bound { "holds" } else { "violated" },
                fit.n_points,
                fit.window.0,
                fit.window.1,
                fit.rms_residual,
                report.spread
            );
            let mut text = serde_json::to_string_pretty(&FitOutput { fit, report })
                .map_err(|e| Failure::Internal(e.to_string()))?;
            text.push('\n');
            Ok(Outcome {
                text,
                summary,
                incomplete: None,
            })
        }
        Command::Pfa => {
            let (sphere, plate) = materials(cfg);
            let radius = cfg.radius.expect("validated config");
            let gaps: Vec<f64> = match cfg.distances.as_ref().expect("validated config") {
                Distances::Gap(l) => vec![*l],
                Distances::Grid(g) => g.iter().map(|x| x * radius).collect(),
            };
            let records = gaps
                .iter()
                .map(|&l| {
                    let g = Geometry::new(radius, l)?;
                    Ok(PfaRecord::from(&pfa_estimates(&g, sphere, plate)?))
                })
                .collect::<Result<Vec<_>, Failure>>()?;
            let summary = match records.first() {
                Some(p) => format!(
                    "pfa: {} points, eta_E = {:.5}, eta_F = {:.5} at L = {:e} m",
                    records.len(),
                    p.eta_e,
                    p.eta_f,
                    p.gap
                ),
                None => "pfa: empty grid".to_string(),
            };
            Ok(Outcome {
                text: render(&records, cfg.format)?,
                summary,
                incomplete: None,
            })
        }
    }
}

/// Runs, writes the output to the configured file (or stdout) and returns the
/// outcome for the caller to report.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let outcome = produce(cfg)?;
    match &cfg.out {
        Some(path) => fs::write(path, &outcome.text)
            .map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))?,
        None => print!("{}", outcome.text),
    }
    Ok(outcome)
}
