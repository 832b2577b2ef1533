//! Fixtures shared by the criterion benches.

use bsfem::harness::scenario::scenario;
use bsfem::{Mesh2D, ProblemSpec, RefinementHierarchy};

/// Finest mesh of the default disc hierarchy at `level`.
pub fn disc_mesh(level: usize) -> Mesh2D {
    RefinementHierarchy::disc(6, level)
        .expect("disc hierarchy")
        .level(level)
        .expect("built level")
        .clone()
}

pub fn catalog_spec(name: &str) -> ProblemSpec {
    scenario(name).expect("catalog scenario").spec
}
