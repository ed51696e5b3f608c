//! Run configuration: a flat TOML document, optionally overridden key by key
//! from the command line, validated into a [`RunConfig`] with every default
//! filled in.
//!
//! ```toml
//! R = "100nm"
//! x_range = [0.4, 0.8, 0.05]   # or x_grid = [...], or L = "50nm"
//! sphere = "gold"              # perfect | plasma | gold
//! plate_lambda_p = "136nm"     # a wavelength alone implies plasma
//! lmax = 24                    # omit for adaptive truncation
//! ```

use std::path::PathBuf;

use casimir_core::analysis::{LmaxPolicy, RhoColumn, DEFAULT_WINDOW};
use casimir_core::materials::Material;
use casimir_core::roundtrip::QuadratureSpec;
use casimir_core::spectrum::DEFAULT_LMAX_CAP;
use serde::Serialize;
use toml::{Table, Value};

use crate::Failure;

/// Environment variable consulted for the worker count when neither the flag
/// nor the config file sets one.
pub const WORKERS_ENV: &str = "CASIMIR_WORKERS";

pub const DEFAULT_TARGET_REL_ERR: f64 = 1e-3;

const KEYS: &[&str] = &[
    "command",
    "R",
    "L",
    "x_grid",
    "x_range",
    "sphere",
    "sphere_lambda_p",
    "plate",
    "plate_lambda_p",
    "lmax",
    "target_rel_err",
    "lmax_cap",
    "n_xi",
    "n_k",
    "xi_scale",
    "error_probes",
    "allow_unvalidated",
    "input",
    "column",
    "window",
    "weighted",
    "out",
    "format",
    "workers",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Energy,
    Scan,
    Fit,
    Pfa,
}

impl Command {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "energy" => Command::Energy,
            "scan" => Command::Scan,
            "fit" => Command::Fit,
            "pfa" => Command::Pfa,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Distances {
    Gap(f64),
    Grid(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub radius: Option<f64>,
    pub distances: Option<Distances>,
    pub sphere: Option<Material>,
    pub plate: Option<Material>,
    pub lmax: LmaxPolicy,
    pub quadrature: QuadratureSpec,
    pub error_probes: bool,
    pub allow_unvalidated: bool,
    pub input: Option<PathBuf>,
    pub column: RhoColumn,
    pub window: (f64, f64),
    pub weighted: bool,
    pub out: Option<PathBuf>,
    pub format: Format,
    /// `None` means all available cores.
    pub workers: Option<usize>,
}

fn config_err(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

/// Parses a length: a bare number is meters, strings take `nm`, `um` or `m`.
pub fn parse_length(key: &str, v: &Value) -> Result<f64, Failure> {
    let meters = match v {
        Value::Float(f) => *f,
        Value::Integer(i) => *i as f64,
        Value::String(s) => {
            let s = s.trim();
            // divide rather than multiply so "100nm" gives exactly 1e-7
            let (num, per_meter) = if let Some(n) = s.strip_suffix("nm") {
                (n, 1e9)
            } else if let Some(n) = s.strip_suffix("um").or_else(|| s.strip_suffix("µm")) {
                (n, 1e6)
            } else if let Some(n) = s.strip_suffix('m') {
                (n, 1.0)
            } else {
                (s, 1.0)
            };
            let n: f64 = num
                .trim()
                .parse()
                .map_err(|_| config_err(format!("`{key}`: cannot read length {s:?}")))?;
            n / per_meter
        }
        other => {
            return Err(config_err(format!(
                "`{key}`: expected a length, got {other}"
            )))
        }
    };
    if !(meters > 0.0 && meters.is_finite()) {
        return Err(config_err(format!(
            "`{key}` must be a positive length, got {meters} m"
        )));
    }
    Ok(meters)
}

fn float(key: &str, v: &Value) -> Result<f64, Failure> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(config_err(format!(
            "`{key}`: expected a number, got {other}"
        ))),
    }
}

fn count(key: &str, v: &Value) -> Result<usize, Failure> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        other => Err(config_err(format!(
            "`{key}`: expected a non-negative integer, got {other}"
        ))),
    }
}

fn boolean(key: &str, v: &Value) -> Result<bool, Failure> {
    v.as_bool()
        .ok_or_else(|| config_err(format!("`{key}`: expected true or false, got {v}")))
}

fn string<'a>(key: &str, v: &'a Value) -> Result<&'a str, Failure> {
    v.as_str()
        .ok_or_else(|| config_err(format!("`{key}`: expected a string, got {v}")))
}

fn floats(key: &str, v: &Value) -> Result<Vec<f64>, Failure> {
    v.as_array()
        .ok_or_else(|| config_err(format!("`{key}`: expected an array")))?
        .iter()
        .map(|e| float(key, e))
        .collect()
}

/// `[start, stop, step]`, inclusive of `stop` up to rounding.
fn expand_range(v: &[f64]) -> Result<Vec<f64>, Failure> {
    let [start, stop, step] = v else {
        return Err(config_err("`x_range` takes [start, stop, step]"));
    };
    if !(*step > 0.0 && stop >= start) {
        return Err(config_err("`x_range` needs step > 0 and stop >= start"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

fn material(t: &Table, surface: &str) -> Result<Option<Material>, Failure> {
    let kind_key = surface;
    let lambda_key = format!("{surface}_lambda_p");
    let lambda = t
        .get(&lambda_key)
        .map(|v| parse_length(&lambda_key, v))
        .transpose()?;
    let kind = t.get(kind_key).map(|v| string(kind_key, v)).transpose()?;
    let plasma = |l: f64| Material::plasma(l).map_err(|e| config_err(e.to_string()));
    Ok(match (kind, lambda) {
        (None, None) => None,
        (None, Some(l)) | (Some("plasma"), Some(l)) => Some(plasma(l)?),
        (Some("plasma"), None) => return Err(config_err(format!("missing key `{lambda_key}`"))),
        (Some("perfect"), None) => Some(Material::Perfect),
        (Some("gold"), None) => Some(Material::gold()),
        (Some(k @ ("perfect" | "gold")), Some(_)) => {
            return Err(config_err(format!(
                "`{lambda_key}` conflicts with `{kind_key} = \"{k}\"`"
            )))
        }
        (Some(k), _) => {
            return Err(config_err(format!(
                "`{kind_key}`: unknown material {k:?} (perfect, plasma, gold)"
            )))
        }
    })
}

/// Reads a config document and applies `overrides` on top of it.
pub fn parse_config(source: &str, overrides: &Table) -> Result<RunConfig, Failure> {
    let mut table: Table = source
        .parse()
        .map_err(|e: toml::de::Error| config_err(format!("config: {}", e.message())))?;
    for (k, v) in overrides {
        table.insert(k.clone(), v.clone());
    }
    from_table(&table)
}

pub fn from_table(t: &Table) -> Result<RunConfig, Failure> {
    if let Some(k) = t.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(config_err(format!("unknown key `{k}`")));
    }
    let required = |k: &str| {
        t.get(k)
            .ok_or_else(|| config_err(format!("missing key `{k}`")))
    };

    let command_name = string("command", required("command")?)?;
    let command = Command::parse(command_name)
        .ok_or_else(|| config_err(format!("`command`: unknown command {command_name:?}")))?;

    let radius = t.get("R").map(|v| parse_length("R", v)).transpose()?;
    let gap = t.get("L").map(|v| parse_length("L", v)).transpose()?;
    let grid = match (t.get("x_grid"), t.get("x_range")) {
        (Some(_), Some(_)) => return Err(config_err("`x_grid` and `x_range` are exclusive")),
        (Some(v), None) => Some(floats("x_grid", v)?),
        (None, Some(v)) => Some(expand_range(&floats("x_range", v)?)?),
        (None, None) => None,
    };
    if let Some(g) = &grid {
        if let Some(x) = g.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return Err(config_err(format!(
                "x grid entries must be positive, got {x}"
            )));
        }
    }
    let distances = match (gap, grid) {
        (Some(_), Some(_)) => {
            return Err(config_err(
                "`L` conflicts with `x_grid`/`x_range`; give one of them",
            ))
        }
        (Some(l), None) => Some(Distances::Gap(l)),
        (None, Some(g)) => Some(Distances::Grid(g)),
        (None, None) => None,
    };
    let sphere = material(t, "sphere")?;
    let plate = material(t, "plate")?;

    match command {
        Command::Energy | Command::Scan | Command::Pfa => {
            required("R")?;
            required("sphere")
                .or_else(|_| required("sphere_lambda_p"))
                .map_err(|_| config_err("missing key `sphere`"))?;
            required("plate")
                .or_else(|_| required("plate_lambda_p"))
                .map_err(|_| config_err("missing key `plate`"))?;
            match (command, &distances) {
                (Command::Energy, Some(Distances::Gap(_))) => {}
                (Command::Energy, _) => return Err(config_err("missing key `L`")),
                (Command::Scan, Some(Distances::Grid(_))) => {}
                (Command::Scan, Some(Distances::Gap(_))) => {
                    return Err(config_err("`scan` takes `x_grid` or `x_range`, not `L`"))
                }
                (Command::Scan, None) => return Err(config_err("missing key `x_grid`")),
                (_, None) => return Err(config_err("missing key `L`")),
                _ => {}
            }
        }
        Command::Fit => {
            required("input")?;
        }
    }

    let target = t
        .get("target_rel_err")
        .map(|v| float("target_rel_err", v))
        .transpose()?
        .unwrap_or(DEFAULT_TARGET_REL_ERR);
    if !(target > 1e-8 && target < 1e-1) {
        return Err(config_err(format!(
            "`target_rel_err` must lie in (1e-8, 1e-1), got {target}"
        )));
    }
    let cap = t
        .get("lmax_cap")
        .map(|v| count("lmax_cap", v))
        .transpose()?
        .unwrap_or(DEFAULT_LMAX_CAP);
    let lmax = match t.get("lmax") {
        Some(v) => match count("lmax", v)? {
            0 => return Err(config_err("`lmax` must be at least 1")),
            l => LmaxPolicy::Fixed(l),
        },
        None => LmaxPolicy::Adaptive {
            target_rel_err: target,
            cap,
        },
    };

    let mut quadrature = QuadratureSpec::default();
    if let Some(v) = t.get("n_xi") {
        quadrature.n_xi = count("n_xi", v)?;
    }
    if let Some(v) = t.get("n_k") {
        quadrature.n_k = count("n_k", v)?;
    }
    if let Some(v) = t.get("xi_scale") {
        quadrature.xi_scale = float("xi_scale", v)?;
    }
    quadrature
        .validate()
        .map_err(|e| config_err(e.to_string()))?;

    let column = match t.get("column").map(|v| string("column", v)).transpose()? {
        None | Some("rho_G") => RhoColumn::RhoG,
        Some("rho_F") => RhoColumn::RhoF,
        Some(c) => {
            return Err(config_err(format!(
                "`column`: expected rho_F or rho_G, got {c:?}"
            )))
        }
    };
    let window = match t.get("window") {
        None => DEFAULT_WINDOW,
        Some(v) => match floats("window", v)?.as_slice() {
            [lo, hi] if lo < hi => (*lo, *hi),
            _ => return Err(config_err("`window` takes [low, high] with low < high")),
        },
    };
    let format = match t.get("format").map(|v| string("format", v)).transpose()? {
        None if command == Command::Fit => Format::Json,
        None | Some("csv") => Format::Csv,
        Some("json") => Format::Json,
        Some(f) => {
            return Err(config_err(format!(
                "`format`: expected csv or json, got {f:?}"
            )))
        }
    };
    if command == Command::Fit && format == Format::Csv {
        return Err(config_err("`fit` writes JSON only"));
    }
    let workers = match t.get("workers") {
        Some(v) => Some(count("workers", v)?),
        None => match std::env::var(WORKERS_ENV) {
            Ok(s) => Some(s.trim().parse().map_err(|_| {
                config_err(format!("{WORKERS_ENV}: expected a worker count, got {s:?}"))
            })?),
            Err(_) => None,
        },
    };
    if workers == Some(0) {
        return Err(config_err("`workers` must be at least 1"));
    }
    let path = |k: &str| {
        t.get(k)
            .map(|v| string(k, v).map(PathBuf::from))
            .transpose()
    };

    Ok(RunConfig {
        command,
        radius,
        distances,
        sphere,
        plate,
        lmax,
        quadrature,
        error_probes: t
            .get("error_probes")
            .map(|v| boolean("error_probes", v))
            .transpose()?
            .unwrap_or(true),
        allow_unvalidated: t
            .get("allow_unvalidated")
            .map(|v| boolean("allow_unvalidated", v))
            .transpose()?
            .unwrap_or(false),
        input: path("input")?,
        column,
        window,
        weighted: t
            .get("weighted")
            .map(|v| boolean("weighted", v))
            .transpose()?
            .unwrap_or(false),
        out: path("out")?,
        format,
        workers,
    })
}
