//! Fixtures shared by the criterion benches in `benches/`.

use casimir_core::materials::Material;
use casimir_core::roundtrip::{Geometry, QuadratureSpec};
use casimir_core::spectrum::{ErrorProbes, SpectrumOptions};

/// R = 100 nm at L/R = 0.5, the middle of the fit window.
pub fn geometry() -> Geometry {
    Geometry::new(100e-9, 50e-9).expect("valid geometry")
}

pub fn gold() -> Material {
    Material::gold()
}

pub fn spec() -> QuadratureSpec {
    QuadratureSpec::default()
}

/// Single worker and no error probes, so timings measure one evaluation.
pub fn serial() -> SpectrumOptions {
    SpectrumOptions {
        workers: Some(1),
        probes: ErrorProbes::NONE,
    }
}
