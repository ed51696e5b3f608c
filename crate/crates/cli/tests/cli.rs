use std::process::Command as Process;

use casimir_cli::config::{parse_config, Distances, Format};
use casimir_cli::output::{read_scan, table_from_records, SCAN_COLUMNS};
use casimir_cli::run::{produce, FitOutput};
use casimir_cli::{Command, Failure};
use casimir_core::analysis::{
    constrained_quartic_fit, rho_scan_with, LmaxPolicy, RhoColumn, ScanOptions,
};
use casimir_core::materials::Material;
use casimir_core::spectrum::ErrorProbes;
use toml::Table;

const MINIMAL: &str = r#"
command = "energy"
R = "100nm"
L = "50nm"
sphere_lambda_p = "136nm"
plate_lambda_p = "136nm"
"#;

fn parse(src: &str) -> Result<casimir_cli::RunConfig, Failure> {
    parse_config(src, &Table::new())
}

fn config_message(src: &str) -> String {
    match parse(src) {
        Err(Failure::Config(m)) => m,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn minimal_config_records_defaults() {
    let c = parse(MINIMAL).unwrap();
    assert_eq!(c.command, Command::Energy);
    assert_eq!(c.radius, Some(1e-7));
    assert_eq!(c.distances, Some(Distances::Gap(5e-8)));
    assert_eq!(c.sphere, Some(Material::gold()));
    assert_eq!(c.plate, Some(Material::gold()));
    assert_eq!(
        c.lmax,
        LmaxPolicy::Adaptive {
            target_rel_err: 1e-3,
            cap: 40
        }
    );
    assert_eq!((c.quadrature.n_xi, c.quadrature.n_k), (40, 60));
    assert_eq!(c.format, Format::Csv);
    assert!(c.error_probes && !c.allow_unvalidated);
}

#[test]
fn mixed_materials() {
    let c = parse(
        r#"
command = "energy"
R = "0.1um"
L = 5e-8
sphere_lambda_p = "136nm"
plate = "perfect"
"#,
    )
    .unwrap();
    assert_eq!(c.sphere, Some(Material::plasma(136e-9).unwrap()));
    assert_eq!(c.plate, Some(Material::Perfect));
}

#[test]
fn validation_errors_name_the_problem() {
    let neg = MINIMAL.replace("\"50nm\"", "\"-1nm\"");
    assert!(config_message(&neg).contains("`L`"));
    assert!(config_message(&format!("{MINIMAL}\nradius = 3")).contains("unknown key `radius`"));
    let no_r = MINIMAL.replace("R = \"100nm\"", "");
    assert!(config_message(&no_r).contains("missing key `R`"));
    let both = format!("{MINIMAL}\nx_grid = [0.5, 0.6]");
    assert!(config_message(&both).contains("conflicts"));
    let plasma_no_lambda = MINIMAL.replace("sphere_lambda_p = \"136nm\"", "sphere = \"plasma\"");
    assert!(config_message(&plasma_no_lambda).contains("missing key `sphere_lambda_p`"));
    assert!(config_message(&format!("{MINIMAL}\ntarget_rel_err = 0.5")).contains("target_rel_err"));
    assert!(config_message("R = ").contains("config"));
}

#[test]
fn flags_override_file_values() {
    let mut o = Table::new();
    o.insert("lmax".into(), 16.into());
    o.insert("command".into(), "pfa".into());
    o.insert("L".into(), "60nm".into());
    let c = parse_config(MINIMAL, &o).unwrap();
    assert_eq!(c.lmax, LmaxPolicy::Fixed(16));
    assert_eq!(c.command, Command::Pfa);
    assert_eq!(c.distances, Some(Distances::Gap(6e-8)));
}

fn scan_config(workers: usize, format: &str) -> String {
    format!(
        r#"
command = "scan"
R = "100nm"
x_range = [0.4, 0.8, 0.05]
sphere = "perfect"
plate = "perfect"
lmax = 6
error_probes = false
workers = {workers}
format = "{format}"
"#
    )
}

#[test]
fn scan_csv_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("scan.csv");
    let scan = produce(&parse(&scan_config(2, "csv")).unwrap()).unwrap();
    assert!(scan.incomplete.is_none());
    let mut lines = scan.text.lines();
    assert_eq!(lines.next().unwrap(), SCAN_COLUMNS.join(","));
    assert_eq!(lines.count(), 9);
    std::fs::write(&csv_path, &scan.text).unwrap();

    // the same scan straight through the library
    let grid: Vec<f64> = (0..9)
        .map(|i| ((0.4 + 0.05 * i as f64) * 1e12).round() / 1e12)
        .collect();
    let opts = ScanOptions {
        lmax: LmaxPolicy::Fixed(6),
        probes: ErrorProbes::NONE,
        workers: Some(1),
        ..ScanOptions::adaptive(1e-3)
    };
    let table = rho_scan_with(1e-7, Material::Perfect, Material::Perfect, &grid, &opts).unwrap();
    let direct = constrained_quartic_fit(&table, RhoColumn::RhoG, (0.4, 0.8)).unwrap();

    let fit_cfg = format!(
        "command = \"fit\"\ninput = {:?}\n",
        csv_path.to_str().unwrap()
    );
    let out = produce(&parse(&fit_cfg).unwrap()).unwrap();
    let parsed: FitOutput = serde_json::from_str(&out.text).unwrap();
    for (a, b) in parsed.fit.coefficients.iter().zip(direct.coefficients) {
        assert!((a - b).abs() <= 1e-15, "{a} vs {b}");
    }
    assert_eq!(parsed.fit.n_points, direct.n_points);
    assert!((parsed.fit.beta - direct.beta).abs() <= 1e-15);
    assert!(out.summary.contains("beta"));

    // the JSON rendering carries the same rows
    let json = produce(&parse(&scan_config(1, "json")).unwrap()).unwrap();
    let from_json = table_from_records(&read_scan(&json.text).unwrap()).unwrap();
    let from_csv = table_from_records(&read_scan(&scan.text).unwrap()).unwrap();
    assert_eq!(from_json, from_csv);
}

#[test]
fn output_is_byte_identical_across_worker_counts() {
    let texts: Vec<String> = [1, 2, 3]
        .iter()
        .map(|&w| {
            let mut c = parse(&scan_config(w, "csv")).unwrap();
            c.distances = Some(Distances::Grid(vec![0.5, 1.0]));
            produce(&c).unwrap().text
        })
        .collect();
    assert_eq!(texts[0], texts[1]);
    assert_eq!(texts[0], texts[2]);
}

fn casimir(args: &[&str], envs: &[(&str, &str)]) -> (i32, String, String) {
    let mut cmd = Process::new(env!("CARGO_BIN_EXE_casimir"));
    cmd.args(args).env_remove("CASIMIR_WORKERS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn binary_exit_codes_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, MINIMAL).unwrap();
    let cfg = cfg.to_str().unwrap();
    let out = dir.path().join("e.csv");

    let (code, stdout, _) = casimir(
        &[
            "energy",
            "-c",
            cfg,
            "--lmax",
            "4",
            "-o",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().count(), 1);
    assert!(stdout.starts_with("E = "));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 2);

    let (code, _, stderr) = casimir(&["energy", "-c", cfg, "--set", "L=-1"], &[]);
    assert_eq!(code, 2, "{stderr}");
    let (code, _, _) = casimir(
        &["energy", "-c", cfg, "--lmax", "2"],
        &[("CASIMIR_WORKERS", "zero")],
    );
    assert_eq!(code, 2);
    let (code, _, _) = casimir(
        &["energy", "-c", cfg, "--lmax", "2"],
        &[("CASIMIR_WORKERS", "2")],
    );
    assert_eq!(code, 0);

    // truncation cap reached before the target: output written, exit 3
    let (code, stdout, stderr) = casimir(
        &[
            "energy",
            "-c",
            cfg,
            "--tol",
            "1e-7",
            "--set",
            "lmax_cap=4",
            "--set",
            "error_probes=false",
        ],
        &[],
    );
    assert_eq!(code, 3, "{stderr}");
    assert!(stdout.starts_with("x,L_m"));
    assert!(stderr.contains("convergence failure"));

    let (code, stdout, _) = casimir(
        &[
            "pfa",
            "-c",
            cfg,
            "--set",
            "x_grid=[0.5, 1.0]",
            "--set",
            "L=false",
        ],
        &[],
    );
    // `L = false` is not a length
    assert_eq!(code, 2, "{stdout}");
}
