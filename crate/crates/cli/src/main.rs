use std::path::PathBuf;
use std::process::ExitCode;

use casimir_cli::config::WORKERS_ENV;
use casimir_cli::{execute, parse_config, Failure};
use clap::{Parser, ValueEnum};
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// Energy, force and gradient at one gap.
    Energy,
    /// rho_F, rho_G and friends over an x = L/R grid.
    Scan,
    /// Constrained quartic fit of a scan file.
    Fit,
    /// Plane-plane reflectivity factors and PFA estimates.
    Pfa,
}

#[derive(Debug, Parser)]
#[command(
    name = "casimir",
    version,
    about = "Sphere-plane Casimir interaction in the scattering approach"
)]
#[command(after_help = format!(
    "Worker count: --workers, then `workers` in the config, then ${WORKERS_ENV}, \
     then all cores.\nExit codes: 0 ok, 2 config error, 3 convergence failure, 4 internal error."
))]
struct Args {
    command: Cmd,
    /// TOML run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
    #[arg(long)]
    workers: Option<i64>,
    /// Fixed multipole cutoff; adaptive when absent.
    #[arg(long)]
    lmax: Option<i64>,
    /// Target relative error for adaptive truncation.
    #[arg(long)]
    tol: Option<f64>,
    /// Scan file for `fit`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Any other config key, as `key=value` with a TOML value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn overrides(args: &Args) -> Result<Table, Failure> {
    let mut t = Table::new();
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--set expects key=value, got {kv:?}")))?;
        let value = format!("v = {v}")
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(v.to_string()));
        t.insert(k.trim().to_string(), value);
    }
    let name = match args.command {
        Cmd::Energy => "energy",
        Cmd::Scan => "scan",
        Cmd::Fit => "fit",
        Cmd::Pfa => "pfa",
    };
    t.insert("command".into(), Value::String(name.into()));
    let path = |p: &PathBuf| Value::String(p.to_string_lossy().into_owned());
    if let Some(p) = &args.out {
        t.insert("out".into(), path(p));
    }
    if let Some(p) = &args.input {
        t.insert("input".into(), path(p));
    }
    if let Some(f) = &args.format {
        t.insert("format".into(), Value::String(f.clone()));
    }
    if let Some(w) = args.workers {
        t.insert("workers".into(), Value::Integer(w));
    }
    if let Some(l) = args.lmax {
        t.insert("lmax".into(), Value::Integer(l));
    }
    if let Some(e) = args.tol {
        t.insert("target_rel_err".into(), Value::Float(e));
    }
    Ok(t)
}

fn run(args: &Args) -> Result<u8, Failure> {
    let source = match &args.config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let cfg = parse_config(&source, &overrides(args)?)?;
    let outcome = execute(&cfg)?;
    let line = match &outcome.incomplete {
        None => outcome.summary.clone(),
        Some(f) => format!("{} ({f})", outcome.summary),
    };
    if cfg.out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("casimir: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
