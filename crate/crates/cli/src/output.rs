//! Flat output records and their CSV / JSON renderings.

use casimir_core::analysis::{RhoRow, RhoTable, MIN_VALIDATED_X};
use casimir_core::materials::Material;
use casimir_core::pfa::PfaEstimates;
use serde::{Deserialize, Serialize};

use crate::config::Format;
use crate::Failure;

/// One scan or energy row; field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub x: f64,
    #[serde(rename = "L_m")]
    pub gap: f64,
    #[serde(rename = "R_m")]
    pub radius: f64,
    #[serde(rename = "lambdaP_sphere_m")]
    pub lambda_sphere: Option<f64>,
    #[serde(rename = "lambdaP_plate_m")]
    pub lambda_plate: Option<f64>,
    #[serde(rename = "energy_J")]
    pub energy: f64,
    #[serde(rename = "force_N")]
    pub force: f64,
    #[serde(rename = "gradient_N_per_m")]
    pub gradient: f64,
    #[serde(rename = "rho_F")]
    pub rho_f: f64,
    #[serde(rename = "rho_G")]
    pub rho_g: f64,
    #[serde(rename = "eta_E")]
    pub eta_e: f64,
    #[serde(rename = "eta_F")]
    pub eta_f: f64,
    pub ell_max: usize,
    pub est_rel_err: f64,
}

impl ScanRecord {
    pub fn new(row: &RhoRow, radius: f64, sphere: Material, plate: Material) -> Self {
        ScanRecord {
            x: row.x,
            gap: row.gap,
            radius,
            lambda_sphere: sphere.plasma_wavelength(),
            lambda_plate: plate.plasma_wavelength(),
            energy: row.energy,
            force: row.force,
            gradient: row.gradient,
            rho_f: row.rho_f,
            rho_g: row.rho_g,
            eta_e: row.eta_e,
            eta_f: row.eta_f,
            ell_max: row.ell_max_used,
            est_rel_err: row.est_rel_err,
        }
    }

    pub fn from_table(t: &RhoTable) -> Vec<Self> {
        t.rows
            .iter()
            .map(|r| Self::new(r, t.radius, t.sphere, t.plate))
            .collect()
    }
}

fn material(lambda: Option<f64>) -> Result<Material, Failure> {
    match lambda {
        None => Ok(Material::Perfect),
        Some(l) => Material::plasma(l).map_err(|e| Failure::Config(e.to_string())),
    }
}

/// Rebuilds the table a scan was written from. Rows with NaN values are kept
/// and marked failed so that fits skip them.
pub fn table_from_records(records: &[ScanRecord]) -> Result<RhoTable, Failure> {
    let first = records
        .first()
        .ok_or_else(|| Failure::Config("scan file has no rows".into()))?;
    let (radius, ls, lp) = (first.radius, first.lambda_sphere, first.lambda_plate);
    if records
        .iter()
        .any(|r| r.radius != radius || r.lambda_sphere != ls || r.lambda_plate != lp)
    {
        return Err(Failure::Config("scan file mixes radii or materials".into()));
    }
    let rows = records
        .iter()
        .map(|r| {
            let failed = [r.energy, r.force, r.gradient, r.rho_f, r.rho_g]
                .iter()
                .any(|v| v.is_nan());
            RhoRow {
                x: r.x,
                gap: r.gap,
                rho_f: r.rho_f,
                rho_g: r.rho_g,
                eta_e: r.eta_e,
                eta_f: r.eta_f,
                energy: r.energy,
                force: r.force,
                gradient: r.gradient,
                ell_max_used: r.ell_max,
                est_rel_err: r.est_rel_err,
                lmax_converged: true,
                validated: r.x >= MIN_VALIDATED_X,
                error: failed.then(|| "missing values in scan file".to_string()),
            }
        })
        .collect();
    Ok(RhoTable {
        radius,
        sphere: material(ls)?,
        plate: material(lp)?,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfaRecord {
    pub x: f64,
    #[serde(rename = "L_m")]
    pub gap: f64,
    #[serde(rename = "R_m")]
    pub radius: f64,
    #[serde(rename = "lambdaP_sphere_m")]
    pub lambda_sphere: Option<f64>,
    #[serde(rename = "lambdaP_plate_m")]
    pub lambda_plate: Option<f64>,
    #[serde(rename = "eta_E")]
    pub eta_e: f64,
    #[serde(rename = "eta_F")]
    pub eta_f: f64,
    #[serde(rename = "F_pfa_N")]
    pub f_pfa: f64,
    #[serde(rename = "G_pfa_N_per_m")]
    pub g_pfa: f64,
}

impl From<&PfaEstimates> for PfaRecord {
    fn from(p: &PfaEstimates) -> Self {
        PfaRecord {
            x: p.gap / p.radius,
            gap: p.gap,
            radius: p.radius,
            lambda_sphere: p.sphere.plasma_wavelength(),
            lambda_plate: p.plate.plasma_wavelength(),
            eta_e: p.eta_e,
            eta_f: p.eta_f,
            f_pfa: p.f_pfa,
            g_pfa: p.g_pfa,
        }
    }
}

fn internal(e: impl std::fmt::Display) -> Failure {
    Failure::Internal(e.to_string())
}

pub fn render<T: Serialize>(records: &[T], format: Format) -> Result<String, Failure> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in records {
                w.serialize(r).map_err(internal)?;
            }
            String::from_utf8(w.into_inner().map_err(internal)?).map_err(internal)
        }
        Format::Json => {
            let mut s = serde_json::to_string_pretty(records).map_err(internal)?;
            s.push('\n');
            Ok(s)
        }
    }
}

/// Reads scan records from CSV, or from JSON when the text starts with `[`.
pub fn read_scan(text: &str) -> Result<Vec<ScanRecord>, Failure> {
    let bad = |e: &dyn std::fmt::Display| Failure::Config(format!("scan file: {e}"));
    if text.trim_start().starts_with('[') {
        #[derive(Deserialize)]
        struct Loose {
            x: f64,
            #[serde(rename = "L_m")]
            gap: f64,
            #[serde(rename = "R_m")]
            radius: f64,
            #[serde(rename = "lambdaP_sphere_m")]
            lambda_sphere: Option<f64>,
            #[serde(rename = "lambdaP_plate_m")]
            lambda_plate: Option<f64>,
            #[serde(rename = "energy_J")]
            energy: Option<f64>,
            #[serde(rename = "force_N")]
            force: Option<f64>,
            #[serde(rename = "gradient_N_per_m")]
            gradient: Option<f64>,
            #[serde(rename = "rho_F")]
            rho_f: Option<f64>,
            #[serde(rename = "rho_G")]
            rho_g: Option<f64>,
            #[serde(rename = "eta_E")]
            eta_e: Option<f64>,
            #[serde(rename = "eta_F")]
            eta_f: Option<f64>,
            ell_max: usize,
            est_rel_err: Option<f64>,
        }
        // JSON has no NaN; failed rows come back as null
        let rows: Vec<Loose> = serde_json::from_str(text).map_err(|e| bad(&e))?;
        let n = |v: Option<f64>| v.unwrap_or(f64::NAN);
        return Ok(rows
            .into_iter()
            .map(|r| ScanRecord {
                x: r.x,
                gap: r.gap,
                radius: r.radius,
                lambda_sphere: r.lambda_sphere,
                lambda_plate: r.lambda_plate,
                energy: n(r.energy),
                force: n(r.force),
                gradient: n(r.gradient),
                rho_f: n(r.rho_f),
                rho_g: n(r.rho_g),
                eta_e: n(r.eta_e),
                eta_f: n(r.eta_f),
                ell_max: r.ell_max,
                est_rel_err: n(r.est_rel_err),
            })
            .collect());
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| bad(&e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != SCAN_COLUMNS {
        return Err(Failure::Config(format!(
            "scan file: unexpected header {}",
            header.join(",")
        )));
    }
    reader
        .deserialize()
        .collect::<Result<Vec<ScanRecord>, _>>()
        .map_err(|e| bad(&e))
}

pub const SCAN_COLUMNS: [&str; 14] = [
    "x",
    "L_m",
    "R_m",
    "lambdaP_sphere_m",
    "lambdaP_plate_m",
    "energy_J",
    "force_N",
    "gradient_N_per_m",
    "rho_F",
    "rho_G",
    "eta_E",
    "eta_F",
    "ell_max",
    "est_rel_err",
];
