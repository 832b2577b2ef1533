//! Finite element discretization of wave equations with dynamic boundary
//! conditions on the unit disc: curved-boundary meshes, bulk-surface assembly,
//! Gauss Runge-Kutta time stepping, error analysis and convergence studies.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod timestepping;

pub use assembly::{
    assemble, AcousticCoefficients, AssembledOperators, DofLayout, DofMap, InitialData, LoadRule, ProblemSpec,
    Variant,
};
pub use error::{Error, Result};
pub use geometry::{BoundaryCurve, CurvedTriangleMap, ParametricCurve, Point};
pub use linalg::{SolverHandle, SolverMode, SparseMatrix};
pub use mesh::{Mesh2D, RefinementHierarchy};
