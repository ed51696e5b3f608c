//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.
//!
//! Run with `cargo test -p casimir-core --test acceptance -- --nocapture` to
//! see the lines.

mod common;

use std::f64::consts::PI;
use std::sync::OnceLock;

use casimir_core::analysis::{
    beta_report, constrained_quartic_fit, rho_scan_with, LmaxPolicy, RhoColumn, RhoTable,
    ScanOptions, BETA_BOUND, DEFAULT_WINDOW,
};
use casimir_core::materials::{Material, HBAR, SPEED_OF_LIGHT};
use casimir_core::pfa::{eta_factors, plane_plane_lifshitz};
use casimir_core::roundtrip::{assemble_block, Geometry, QuadratureSpec};
use casimir_core::spectrum::{
    casimir_energy_with, finite_difference_check, log_det_one_minus, ErrorProbes, SpectrumOptions,
};
use nalgebra::DMatrix;
use rand::{rngs::StdRng, Rng, SeedableRng};

const R: f64 = 100e-9;
const LMAX: usize = 24;

fn report(n: u32, name: &str, ok: bool, detail: String) {
    println!(
        "criterion {n} [{}] {name}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {n} ({name}) failed: {detail}");
}

fn options(workers: Option<usize>) -> ScanOptions {
    ScanOptions {
        lmax: LmaxPolicy::Fixed(LMAX),
        spec: QuadratureSpec::default(),
        probes: ErrorProbes::NONE,
        workers,
        allow_unvalidated: false,
    }
}

fn beta_grid() -> Vec<f64> {
    (0..9).map(|i| 0.40 + 0.05 * i as f64).collect()
}

const CROSSOVER_GRID: [f64; 6] = [0.2, 0.3, 1.0, 1.4, 1.7, 2.0];

fn scan(material: Material, grid: &[f64]) -> RhoTable {
    rho_scan_with(R, material, material, grid, &options(None)).unwrap()
}

fn beta_scan(material: Material) -> &'static RhoTable {
    static PERFECT: OnceLock<RhoTable> = OnceLock::new();
    static GOLD: OnceLock<RhoTable> = OnceLock::new();
    let cell = if material.is_perfect() {
        &PERFECT
    } else {
        &GOLD
    };
    cell.get_or_init(|| scan(material, &beta_grid()))
}

fn crossover_scan(material: Material) -> &'static RhoTable {
    static PERFECT: OnceLock<RhoTable> = OnceLock::new();
    static GOLD: OnceLock<RhoTable> = OnceLock::new();
    let cell = if material.is_perfect() {
        &PERFECT
    } else {
        &GOLD
    };
    cell.get_or_init(|| scan(material, &CROSSOVER_GRID))
}

fn beta(material: Material) -> f64 {
    constrained_quartic_fit(beta_scan(material), RhoColumn::RhoG, DEFAULT_WINDOW)
        .unwrap()
        .beta
}

#[test]
fn criterion_1_beta_perfect() {
    let b = beta(Material::Perfect);
    report(
        1,
        "beta_G perfect mirrors",
        (b + 0.483).abs() <= 0.05,
        format!("beta_G = {b:.4} (expected -0.483 +- 0.05)"),
    );
}

#[test]
fn criterion_2_beta_gold_and_bound() {
    let fits: Vec<_> = [Material::Perfect, Material::gold()]
        .iter()
        .map(|&m| constrained_quartic_fit(beta_scan(m), RhoColumn::RhoG, DEFAULT_WINDOW).unwrap())
        .collect();
    let rep = beta_report(&fits).unwrap();
    let (p, g) = (&rep.entries[0], &rep.entries[1]);
    let ok = (g.beta + 0.207).abs() <= 0.06 && g.within_bound && !p.within_bound;
    report(
        2,
        "beta_G gold and |beta_G| < 0.4 classification",
        ok,
        format!(
            "gold beta_G = {:.4} (expected -0.207 +- 0.06), inside bound {BETA_BOUND}: {}; perfect inside: {}",
            g.beta, g.within_bound, p.within_bound
        ),
    );
}

#[test]
fn criterion_3_rho_g_at_0_6() {
    let at = |m: Material| {
        beta_scan(m)
            .rows
            .iter()
            .find(|r| (r.x - 0.6).abs() < 1e-9)
            .unwrap()
            .rho_g
    };
    let (g, p) = (at(Material::gold()), at(Material::Perfect));
    report(
        3,
        "rho_G at x = 0.6",
        (g - 0.792).abs() <= 0.02 && (p - 0.780).abs() <= 0.02,
        format!("gold {g:.4} (0.792 +- 0.02), perfect {p:.4} (0.780 +- 0.02)"),
    );
}

#[test]
fn criterion_4_crossover() {
    let (g, p) = (
        crossover_scan(Material::gold()),
        crossover_scan(Material::Perfect),
    );
    let first = (g.rows[0].rho_g, p.rows[0].rho_g);
    let last = (g.rows.last().unwrap().rho_g, p.rows.last().unwrap().rho_g);
    let ok = first.0 > first.1 && last.0 < last.1;
    let table: Vec<String> = g
        .rows
        .iter()
        .zip(&p.rows)
        .map(|(a, b)| format!("x={}: {:.4}/{:.4}", a.x, a.rho_g, b.rho_g))
        .collect();
    report(
        4,
        "rho_G gold vs perfect crossover on [0.2, 2]",
        ok,
        format!("gold/perfect {}", table.join(", ")),
    );
}

#[test]
fn criterion_5_rayleigh_ratio() {
    let g = Geometry::new(10e-9, 5e-6).unwrap();
    let opts = SpectrumOptions {
        workers: None,
        probes: ErrorProbes::NONE,
    };
    let spec = QuadratureSpec::default();
    let perfect = casimir_energy_with(&g, Material::Perfect, Material::Perfect, 3, &spec, &opts)
        .unwrap()
        .energy;
    let plasma = casimir_energy_with(&g, Material::gold(), Material::Perfect, 3, &spec, &opts)
        .unwrap()
        .energy;
    let ratio = perfect / plasma;
    report(
        5,
        "Rayleigh ratio perfect/plasma sphere",
        (ratio / 1.5 - 1.0).abs() < 0.05,
        format!("E_perfect / E_plasma = {ratio:.5} (3/2 within 5%)"),
    );
}

#[test]
fn criterion_6_plane_plane_limits() {
    let hc = HBAR * SPEED_OF_LIGHT;
    let mut worst: f64 = 0.0;
    for l in [1e-8, 1e-7, 1e-6] {
        let (e, _) = plane_plane_lifshitz(l, Material::Perfect, Material::Perfect).unwrap();
        worst = worst.max((e / (-PI * PI * hc / (720.0 * l.powi(3))) - 1.0).abs());
    }
    let gold = Material::gold();
    let (ee, ef) = eta_factors(100.0 * 136e-9, gold, gold).unwrap();
    report(
        6,
        "plane-plane ideal limit and eta at 100 lambda_P",
        worst < 1e-6 && 1.0 - ee < 1e-2 && 1.0 - ef < 1e-2,
        format!("ideal rel err {worst:.1e}, eta_E = {ee:.5}, eta_F = {ef:.5}"),
    );
}

fn random_contraction(rng: &mut StdRng, n: usize, radius: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let s = a.clone().singular_values().max();
    a * (radius / s)
}

#[test]
fn criterion_7_property_suite() {
    let mut failures = Vec::new();

    // (a) signs on every grid point
    let mut n_rows = 0;
    for m in [Material::Perfect, Material::gold()] {
        for t in [beta_scan(m), crossover_scan(m)] {
            for r in &t.rows {
                n_rows += 1;
                if !(r.is_ok() && r.energy < 0.0 && r.force > 0.0 && r.gradient > 0.0) {
                    failures.push(format!("(a) {m} x = {}", r.x));
                }
            }
        }
    }
    println!("  (a) sign pattern checked on {n_rows} rows");

    // (b) trace formula vs finite differences on the beta grid
    let spec = QuadratureSpec::default();
    let (mut wf, mut wg): (f64, f64) = (0.0, 0.0);
    for m in [Material::Perfect, Material::gold()] {
        for x in beta_grid() {
            let g = Geometry::new(R, x * R).unwrap();
            let c = finite_difference_check(&g, m, m, LMAX, &spec, 1e-2, None).unwrap();
            wf = wf.max(c.force_rel_err());
            wg = wg.max(c.gradient_rel_err());
        }
    }
    if !(wf < 1e-4 && wg < 1e-3) {
        failures.push(format!("(b) force {wf:.1e}, gradient {wg:.1e}"));
    }
    println!("  (b) worst FD discrepancy: force {wf:.1e}, gradient {wg:.1e}");

    // (c) log det(1 - M) against eigenvalues
    let mut rng = StdRng::seed_from_u64(7);
    let mut wl: f64 = 0.0;
    for i in 0..200 {
        let n = 1 + i % 30;
        let radius = [1e-4, 0.1, 0.5, 0.95][i % 4];
        let a = random_contraction(&mut rng, n, radius);
        let want: f64 = a
            .complex_eigenvalues()
            .iter()
            .map(|l| (num_complex::Complex64::new(1.0, 0.0) - l).ln().re)
            .sum();
        let got = log_det_one_minus(&a).unwrap();
        wl = wl.max((got - want).abs() / want.abs().max(1e-300));
    }
    if wl >= 1e-10 {
        failures.push(format!("(c) {wl:.1e}"));
    }
    println!("  (c) log-det vs eigenvalues, worst relative {wl:.1e}");

    // (d) complex-arithmetic reference at l_max = 3
    let mut wd: f64 = 0.0;
    for (m, mat) in [
        (0, Material::gold()),
        (1, Material::gold()),
        (-2, Material::gold()),
        (1, Material::Perfect),
    ] {
        let (re, im) = common::compare(m, mat);
        wd = wd.max(re).max(im);
    }
    if wd >= 1e-9 {
        failures.push(format!("(d) {wd:.1e}"));
    }
    println!("  (d) complex reference, worst relative {wd:.1e}");

    // (e) +m / -m
    let g = Geometry::new(R, 0.5 * R).unwrap();
    let mut we: f64 = 0.0;
    for m in 1..=4 {
        for xi in [0.05, 0.7, 4.0] {
            let gold = Material::gold();
            let p = assemble_block(m, xi, &g, gold, gold, &spec, 4, false).unwrap();
            let n = assemble_block(-m, xi, &g, gold, gold, &spec, 4, false).unwrap();
            let (a, b) = (
                log_det_one_minus(&p.matrix).unwrap(),
                log_det_one_minus(&n.matrix).unwrap(),
            );
            we = we.max(((a - b) / a).abs());
        }
    }
    if we >= 1e-12 {
        failures.push(format!("(e) {we:.1e}"));
    }
    println!("  (e) +-m log-det, worst relative {we:.1e}");

    // (f) worker-count independence of a scan
    let grid = [0.5, 0.9];
    let base = rho_scan_with(
        R,
        Material::gold(),
        Material::gold(),
        &grid,
        &options(Some(1)),
    )
    .unwrap();
    let mut same = true;
    for w in [2, 4] {
        let other = rho_scan_with(
            R,
            Material::gold(),
            Material::gold(),
            &grid,
            &options(Some(w)),
        )
        .unwrap();
        for (a, b) in base.rows.iter().zip(&other.rows) {
            for (u, v) in [
                (a.energy, b.energy),
                (a.force, b.force),
                (a.gradient, b.gradient),
                (a.rho_f, b.rho_f),
                (a.rho_g, b.rho_g),
            ] {
                same &= u.to_bits() == v.to_bits();
            }
        }
    }
    if !same {
        failures.push("(f) results differ across worker counts".into());
    }
    println!("  (f) bitwise identical across 1/2/4 workers: {same}");

    report(
        7,
        "property suite (a)-(f)",
        failures.is_empty(),
        if failures.is_empty() {
            "all properties hold".into()
        } else {
            failures.join("; ")
        },
    );
}
