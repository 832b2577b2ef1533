//! Catalog of the named test problems on the unit disc.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::analysis::ExactSolution;
use crate::assembly::{AcousticCoefficients, InitialData, LoadRule, ProblemSpec, SourceField};
use crate::error::{Error, Result};
use crate::geometry::Point;

pub const SCENARIOS: [&str; 5] = ["pure", "adv-bulk", "adv-surface", "sdamp", "acoustic"];

/// Exponent of the manufactured acoustic solution `sin(ωt) r^k`.
pub const ACOUSTIC_K: f64 = 1.2;

#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub spec: ProblemSpec,
    pub final_time: f64,
    /// Known exact solution; `None` means errors are measured against a
    /// reference solution.
    pub exact: Option<ExactSolution>,
    pub tau0: f64,
    /// Number of boundary vertices of the seed mesh.
    pub seed_vertices: usize,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("spec", &self.spec)
            .field("final_time", &self.final_time)
            .field("exact", &self.exact.is_some())
            .field("tau0", &self.tau0)
            .finish()
    }
}

/// `exp(-20((x₁ - 1)² + x₂²))`, a bump centred on the boundary point (1, 0).
pub fn gaussian_bump(x: Point) -> f64 {
    (-20.0 * ((x[0] - 1.0).powi(2) + x[1] * x[1])).exp()
}

fn with_bump(spec: ProblemSpec) -> ProblemSpec {
    spec.with_initial(InitialData {
        u0: Some(Arc::new(gaussian_bump)),
        u1: Some(Arc::new(|_| 0.0)),
        ..Default::default()
    })
}

fn catalog_entry(name: &str, spec: ProblemSpec) -> Scenario {
    Scenario {
        name: name.to_string(),
        spec,
        final_time: 1.0,
        exact: None,
        tau0: 2f64.powi(-5),
        seed_vertices: 6,
    }
}

pub fn scenario(name: &str) -> Result<Scenario> {
    Ok(match name {
        "pure" => catalog_entry(name, with_bump(ProblemSpec::pure_second_order(1.0, 1.0, 0.0))),
        "adv-bulk" => catalog_entry(
            name,
            with_bump(ProblemSpec::advective(
                1.0,
                1.0,
                0.0,
                0.0,
                0.0,
                Arc::new(|_| [2.0, 0.0]),
                Arc::new(|_| [0.0, 0.0]),
            )),
        ),
        "adv-surface" => catalog_entry(
            name,
            with_bump(ProblemSpec::advective(
                1.0,
                1.0,
                0.0,
                0.0,
                0.0,
                Arc::new(|_| [0.0, 0.0]),
                Arc::new(|x| [-x[1], x[0]]),
            )),
        ),
        "sdamp" => catalog_entry(name, with_bump(ProblemSpec::strong_damping(1.0, 1.0, 0.0, 0.1, 0.2))),
        "acoustic" => acoustic_scenario(AcousticCoefficients::default(), ACOUSTIC_K),
        other => return Err(Error::UnknownScenario(other.to_string())),
    })
}

/// Manufactured acoustic problem with exact solution
/// `u = sin(ωt) r^k`, `δ = -(k/ω) cos(ωt) r^k`, `ω = 2π`.
pub fn acoustic_scenario(c: AcousticCoefficients, k: f64) -> Scenario {
    let w = 2.0 * PI;
    let r2 = |x: Point| x[0] * x[0] + x[1] * x[1];
    let f_bulk: SourceField = Arc::new(move |x, t| {
        let rr = r2(x);
        let s = (w * t).sin();
        (c.a_bulk - w * w) * s * rr.powf(0.5 * k) - c.c_bulk * k * k * s * rr.powf(0.5 * k - 1.0)
    });
    let f_surf: SourceField = Arc::new(move |_, t| {
        let cos = (w * t).cos();
        c.mu_surf * k * w * cos - c.k_surf * (k / w) * cos + c.c_bulk * w * cos
    });
    let exact = ExactSolution::new(Arc::new(move |x, t| (w * t).sin() * r2(x).powf(0.5 * k)))
        .with_gradient(Arc::new(move |x, t| {
            let rr = r2(x);
            let g = if rr > 0.0 { (w * t).sin() * k * rr.powf(0.5 * k - 1.0) } else { 0.0 };
            [g * x[0], g * x[1]]
        }))
        .with_surface(
            Arc::new(move |x, t| -(k / w) * (w * t).cos() * r2(x).powf(0.5 * k)),
            Some(Arc::new(move |x, t| {
                let g = -(k / w) * (w * t).cos() * k * r2(x).powf(0.5 * k - 1.0);
                [g * x[0], g * x[1]]
            })),
        );
    let spec = ProblemSpec::acoustic(c)
        .with_sources(Some(f_bulk), Some(f_surf))
        .with_load_rule(LoadRule::Quadrature)
        .with_initial(InitialData {
            u0: Some(Arc::new(|_| 0.0)),
            u1: Some(Arc::new(move |x| w * r2(x).powf(0.5 * k))),
            delta0: Some(Arc::new(move |x| -(k / w) * r2(x).powf(0.5 * k))),
            delta1: Some(Arc::new(|_| 0.0)),
        });
    Scenario {
        name: "acoustic".to_string(),
        spec,
        final_time: 0.2,
        exact: Some(exact),
        // 2⁻⁵ does not divide T = 0.2.
        tau0: 0.025,
        seed_vertices: 6,
    }
}
