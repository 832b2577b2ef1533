//! Error measurement: discrete norms, errors against exact solutions (nodal
//! and lifted to the curved domain) and against finer reference solutions,
//! the Ritz projection, and estimated orders of convergence.

use std::fmt;
use std::sync::Arc;

use crate::assembly::{interpolate, AssembledOperators, DofLayout, DofMap, ProblemSpec, SourceField};
use crate::error::{Error, Result};
use crate::geometry::{dot, norm, sub, BoundaryCurve, CurvedTriangleMap, Mat2, Point};
use crate::linalg::{solve_nonsingular, SolverHandle, SparseMatrix};
use crate::mesh::{Mesh2D, RefinementHierarchy};
use crate::quadrature::{gauss4, TRIANGLE_DEGREE4};

pub type GradientField = Arc<dyn Fn(Point, f64) -> Point + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    /// `(vᵀ M v)^{1/2}`.
    Mh,
    /// `(vᵀ A v)^{1/2}`.
    Ah,
    /// `(dᵀ M A⁻¹ M d)^{1/2}`, the norm dual to `Ah` with respect to `m_h`.
    DualAh,
    /// `(vᵀ A⁻¹ v + uᵀ M u)^{1/2}` for the stacked vector `(v, u)`.
    S,
}

pub fn discrete_norm(
    x: &[f64],
    kind: NormKind,
    mass: &SparseMatrix,
    stiffness: &SparseMatrix,
    solver: &SolverHandle,
) -> Result<f64> {
    let n = mass.nrows();
    let expected = if kind == NormKind::S { 2 * n } else { n };
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: x.len(),
        });
    }
    let sq = match kind {
        NormKind::Mh => mass.quad_form(x)?,
        NormKind::Ah => stiffness.quad_form(x)?,
        NormKind::DualAh => {
            let md = mass.matvec(x)?;
            let w = solve_nonsingular(stiffness, &md, solver)?;
            crate::linalg::dot(&md, &w)
        }
        NormKind::S => {
            let (v, u) = x.split_at(n);
            let w = solve_nonsingular(stiffness, v, solver)?;
            crate::linalg::dot(v, &w) + mass.quad_form(u)?
        }
    };
    Ok(sq.max(0.0).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorMetric {
    /// Interpolant of the exact solution minus the discrete solution, in the
    /// split discrete norms.
    NodalDiscrete,
    /// Lifted discrete solution against the exact solution on the curved
    /// domain, by quadrature.
    LiftedQuadrature,
}

/// Errors split into bulk and surface parts. `l2_*` are L2 norms, `h1_*`
/// the gradient (seminorm) parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    pub l2_bulk: f64,
    pub l2_surf: f64,
    pub h1_bulk: f64,
    pub h1_surf: f64,
    pub metric: ErrorMetric,
    pub level: usize,
    pub t: f64,
    /// Weight of the surface part in the combined L2 error.
    pub surface_weight: f64,
}

impl ErrorReport {
    /// `(bulk² + μ surf²)^{1/2}`.
    pub fn combined_l2(&self) -> f64 {
        (self.l2_bulk.powi(2) + self.surface_weight * self.l2_surf.powi(2)).sqrt()
    }

    pub fn combined_h1(&self) -> f64 {
        (self.h1_bulk.powi(2) + self.h1_surf.powi(2)).sqrt()
    }
}

/// Error report of a nodal difference `e` in the split discrete norms.
pub fn nodal_error_report(ops: &AssembledOperators, e: &[f64], level: usize, t: f64) -> Result<ErrorReport> {
    let p = &ops.parts;
    let sq = |m: &SparseMatrix| -> Result<f64> { Ok(m.quad_form(e)?.max(0.0).sqrt()) };
    Ok(ErrorReport {
        l2_bulk: sq(&p.mass_bulk)?,
        l2_surf: sq(&p.mass_surf)?,
        h1_bulk: sq(&p.stiff_bulk)?,
        h1_surf: sq(&p.stiff_surf)?,
        metric: ErrorMetric::NodalDiscrete,
        level,
        t,
        surface_weight: ops.surface_weight(),
    })
}

/// Exact solution with optional derivatives. Without `surface` the surface
/// component is the trace of `bulk`; without `surface_gradient` the surface
/// gradient is the tangential part of `bulk_gradient`.
#[derive(Clone)]
pub struct ExactSolution {
    pub bulk: SourceField,
    pub bulk_gradient: Option<GradientField>,
    pub surface: Option<SourceField>,
    pub surface_gradient: Option<GradientField>,
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExactSolution")
            .field("bulk_gradient", &self.bulk_gradient.is_some())
            .field("surface", &self.surface.is_some())
            .field("surface_gradient", &self.surface_gradient.is_some())
            .finish()
    }
}

impl ExactSolution {
    pub fn new(bulk: SourceField) -> Self {
        Self {
            bulk,
            bulk_gradient: None,
            surface: None,
            surface_gradient: None,
        }
    }

    pub fn with_gradient(mut self, g: GradientField) -> Self {
        self.bulk_gradient = Some(g);
        self
    }

    pub fn with_surface(mut self, surface: SourceField, gradient: Option<GradientField>) -> Self {
        self.surface = Some(surface);
        self.surface_gradient = gradient;
        self
    }

    fn surface_value(&self, x: Point, t: f64) -> f64 {
        match &self.surface {
            Some(g) => g(x, t),
            None => (self.bulk)(x, t),
        }
    }

    fn surface_tangential(&self, x: Point, t: f64, tangent: Point) -> Option<f64> {
        match (&self.surface, &self.surface_gradient) {
            (_, Some(g)) => Some(dot(g(x, t), tangent)),
            (None, None) => self.bulk_gradient.as_ref().map(|g| dot(g(x, t), tangent)),
            (Some(_), None) => None,
        }
    }

    /// Nodal interpolant at time `t` in the layout of `dofmap`.
    pub fn interpolate(&self, mesh: &Mesh2D, dofmap: &DofMap, t: f64) -> Vec<f64> {
        let bulk = |x: Point| (self.bulk)(x, t);
        match &self.surface {
            Some(g) => {
                let surf = |x: Point| g(x, t);
                interpolate(mesh, dofmap, &bulk, Some(&surf))
            }
            None => interpolate(mesh, dofmap, &bulk, None),
        }
    }
}

/// One quadrature point of the lifted bulk domain.
struct BulkPoint {
    /// Global vertices in the local order of the map.
    vertices: [usize; 3],
    lambda: [f64; 3],
    x: Point,
    /// Derivative of the element map with respect to `(λ₁, λ₂)`.
    jacobian: Mat2,
    weight: f64,
}

struct SurfacePoint {
    vertices: [usize; 2],
    s: f64,
    x: Point,
    tangent: Point,
    /// Arc-length density `|d x / d s|`.
    speed: f64,
    weight: f64,
}

/// Which geometry the lifted integrals use.
#[derive(Clone, Copy, Debug)]
pub enum Geometry<'c> {
    /// Curved boundary triangles through the element map `G_h`.
    Curved(&'c BoundaryCurve),
    /// The polygonal domain itself (`G_h` the identity).
    Polygonal,
}

fn boundary_edge_of_triangle(mesh: &Mesh2D) -> Vec<Option<usize>> {
    let mut out = vec![None; mesh.n_triangles()];
    for (e, edge) in mesh.boundary_edges().iter().enumerate() {
        out[edge.triangle] = Some(e);
    }
    out
}

fn bulk_points(mesh: &Mesh2D, geometry: Geometry<'_>, mut f: impl FnMut(&BulkPoint) -> Result<()>) -> Result<()> {
    let edge_of = boundary_edge_of_triangle(mesh);
    let verts = mesh.vertices();
    for (ti, tri) in mesh.triangles().iter().enumerate() {
        let curved = match (geometry, edge_of[ti]) {
            (Geometry::Curved(curve), Some(e)) => {
                let [b1, b2] = mesh.boundary_edges()[e].vertices;
                let a0 = *tri.iter().find(|&&v| v != b1 && v != b2).expect("triangle has three vertices");
                Some(([a0, b1, b2], CurvedTriangleMap::new(verts[a0], [verts[b1], verts[b2]], curve)?))
            }
            _ => None,
        };
        match &curved {
            Some((vertices, map)) => {
                // Collapsed coordinates λ = (1 - s, s(1 - r), s r): the map is
                // linear in s, so a tensor Gauss rule integrates it accurately.
                for (s, ws) in gauss4() {
                    for (r, wr) in gauss4() {
                        let lambda = [1.0 - s, s * (1.0 - r), s * r];
                        let ev = map.eval(lambda)?;
                        f(&BulkPoint {
                            vertices: *vertices,
                            lambda,
                            x: ev.point,
                            jacobian: ev.jacobian,
                            weight: ws * wr * s * ev.jacobian_det.abs(),
                        })?;
                    }
                }
            }
            None => {
                let p = [verts[tri[0]], verts[tri[1]], verts[tri[2]]];
                let jacobian = [
                    [p[1][0] - p[0][0], p[2][0] - p[0][0]],
                    [p[1][1] - p[0][1], p[2][1] - p[0][1]],
                ];
                let weight = 0.5 * crate::geometry::det2(&jacobian).abs();
                for (lambda, w) in TRIANGLE_DEGREE4 {
                    f(&BulkPoint {
                        vertices: *tri,
                        lambda,
                        x: [
                            lambda[0] * p[0][0] + lambda[1] * p[1][0] + lambda[2] * p[2][0],
                            lambda[0] * p[0][1] + lambda[1] * p[1][1] + lambda[2] * p[2][1],
                        ],
                        jacobian,
                        weight: w * weight,
                    })?;
                }
            }
        }
    }
    Ok(())
}

fn surface_points(mesh: &Mesh2D, geometry: Geometry<'_>, mut f: impl FnMut(&SurfacePoint) -> Result<()>) -> Result<()> {
    let verts = mesh.vertices();
    for edge in mesh.boundary_edges() {
        let [a, b] = edge.vertices;
        let d = sub(verts[b], verts[a]);
        for (s, w) in gauss4() {
            let y = [verts[a][0] + s * d[0], verts[a][1] + s * d[1]];
            let (x, dx) = match geometry {
                Geometry::Curved(curve) => {
                    let (p, dp) = curve.project_with_derivative(y)?;
                    (p, crate::geometry::mat_vec(&dp, d))
                }
                Geometry::Polygonal => (y, d),
            };
            let speed = norm(dx);
            if speed == 0.0 {
                return Err(Error::ZeroLengthEdge);
            }
            f(&SurfacePoint {
                vertices: [a, b],
                s,
                x,
                tangent: [dx[0] / speed, dx[1] / speed],
                speed,
                weight: w,
            })?;
        }
    }
    Ok(())
}

/// Physical gradients of the three local basis functions at a bulk point.
fn basis_gradients(jacobian: &Mat2) -> Result<[Point; 3]> {
    let det = crate::geometry::det2(jacobian);
    if det == 0.0 {
        return Err(Error::DegenerateElement { element: usize::MAX, area: 0.0 });
    }
    // J⁻ᵀ applied to the reference gradients (-1,-1), (1,0), (0,1).
    let inv_t = [
        [jacobian[1][1] / det, -jacobian[1][0] / det],
        [-jacobian[0][1] / det, jacobian[0][0] / det],
    ];
    let apply = |g: Point| [inv_t[0][0] * g[0] + inv_t[0][1] * g[1], inv_t[1][0] * g[0] + inv_t[1][1] * g[1]];
    Ok([apply([-1.0, -1.0]), apply([1.0, 0.0]), apply([0.0, 1.0])])
}

#[allow(clippy::too_many_arguments)]
/// Error of `u_h` against `exact` at time `t`.
///
/// The lifted metric needs `geometry`; its gradient parts are only computed
/// when the corresponding exact gradients are supplied and are zero
/// otherwise.
pub fn error_vs_exact(
    mesh: &Mesh2D,
    geometry: Geometry<'_>,
    ops: &AssembledOperators,
    u_h: &[f64],
    exact: &ExactSolution,
    t: f64,
    metric: ErrorMetric,
    level: usize,
) -> Result<ErrorReport> {
    let dm = &ops.dofmap;
    if u_h.len() != dm.n_dofs() {
        return Err(Error::DimensionMismatch {
            expected: dm.n_dofs(),
            found: u_h.len(),
        });
    }
    match metric {
        ErrorMetric::NodalDiscrete => {
            let interp = exact.interpolate(mesh, dm, t);
            let e: Vec<f64> = interp.iter().zip(u_h).map(|(a, b)| a - b).collect();
            nodal_error_report(ops, &e, level, t)
        }
        ErrorMetric::LiftedQuadrature => {
            let (mut l2b, mut h1b, mut l2s, mut h1s) = (0.0, 0.0, 0.0, 0.0);
            bulk_points(mesh, geometry, |q| {
                let uh: f64 = (0..3).map(|k| q.lambda[k] * u_h[q.vertices[k]]).sum();
                l2b += q.weight * (uh - (exact.bulk)(q.x, t)).powi(2);
                if let Some(g) = &exact.bulk_gradient {
                    let grads = basis_gradients(&q.jacobian)?;
                    let mut gh = [0.0; 2];
                    for k in 0..3 {
                        gh[0] += u_h[q.vertices[k]] * grads[k][0];
                        gh[1] += u_h[q.vertices[k]] * grads[k][1];
                    }
                    let d = sub(gh, g(q.x, t));
                    h1b += q.weight * dot(d, d);
                }
                Ok(())
            })?;
            surface_points(mesh, geometry, |q| {
                let dofs = [surface_dof(dm, q.vertices[0])?, surface_dof(dm, q.vertices[1])?];
                let uh = (1.0 - q.s) * u_h[dofs[0]] + q.s * u_h[dofs[1]];
                l2s += q.weight * q.speed * (uh - exact.surface_value(q.x, t)).powi(2);
                if let Some(gt) = exact.surface_tangential(q.x, t, q.tangent) {
                    let duh = (u_h[dofs[1]] - u_h[dofs[0]]) / q.speed;
                    h1s += q.weight * q.speed * (duh - gt).powi(2);
                }
                Ok(())
            })?;
            Ok(ErrorReport {
                l2_bulk: l2b.sqrt(),
                l2_surf: l2s.sqrt(),
                h1_bulk: h1b.sqrt(),
                h1_surf: h1s.sqrt(),
                metric,
                level,
                t,
                surface_weight: ops.surface_weight(),
            })
        }
    }
}

fn surface_dof(dm: &DofMap, v: usize) -> Result<usize> {
    dm.surface_dof(v)
        .ok_or_else(|| Error::InvalidArgument(format!("vertex {v} is not a boundary vertex")))
}

/// Values of a fine-level solution at the coarse-level unknowns.
pub fn restrict_to_coarse(
    hierarchy: &RefinementHierarchy,
    coarse: usize,
    fine: usize,
    layout: DofLayout,
    fine_u: &[f64],
) -> Result<Vec<f64>> {
    if fine <= coarse {
        return Err(Error::HierarchyMismatch(format!(
            "reference level {fine} is not finer than level {coarse}"
        )));
    }
    let injection = hierarchy.injection_between(coarse, fine)?;
    let coarse_mesh = hierarchy.level(coarse).expect("checked by injection_between");
    let fine_mesh = hierarchy.level(fine).expect("checked by injection_between");
    let coarse_dm = DofMap::new(coarse_mesh, layout);
    let fine_dm = DofMap::new(fine_mesh, layout);
    if fine_u.len() != fine_dm.n_dofs() {
        return Err(Error::HierarchyMismatch(format!(
            "reference has {} unknowns, level {fine} has {}",
            fine_u.len(),
            fine_dm.n_dofs()
        )));
    }
    let mut out: Vec<f64> = injection.iter().map(|&v| fine_u[v]).collect();
    if let Some(_offset) = coarse_dm.delta_offset() {
        for &v in coarse_dm.boundary_vertex_order() {
            let fd = fine_dm.surface_dof(injection[v]).ok_or_else(|| {
                Error::HierarchyMismatch(format!("boundary vertex {v} is interior on level {fine}"))
            })?;
            out.push(fine_u[fd]);
        }
    }
    Ok(out)
}

/// Error of a coarse solution against a finer reference of the same
/// hierarchy, measured in the coarse discrete norms.
pub fn error_vs_reference(
    hierarchy: &RefinementHierarchy,
    coarse: usize,
    coarse_ops: &AssembledOperators,
    coarse_u: &[f64],
    fine: usize,
    fine_u: &[f64],
    t: f64,
) -> Result<ErrorReport> {
    let restricted = restrict_to_coarse(hierarchy, coarse, fine, coarse_ops.dofmap.layout(), fine_u)?;
    if coarse_u.len() != restricted.len() {
        return Err(Error::HierarchyMismatch(format!(
            "coarse solution has {} unknowns, level {coarse} has {}",
            coarse_u.len(),
            restricted.len()
        )));
    }
    let e: Vec<f64> = restricted.iter().zip(coarse_u).map(|(a, b)| a - b).collect();
    nodal_error_report(coarse_ops, &e, coarse, t)
}

/// Time-independent function with its gradient, for the Ritz projection.
#[derive(Clone)]
pub struct RitzTarget {
    pub u: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
    pub gradient: Option<Arc<dyn Fn(Point) -> Point + Send + Sync>>,
    pub surface_gradient: Option<Arc<dyn Fn(Point) -> Point + Send + Sync>>,
}

/// Nodal vector of the Ritz projection: `a_h(R u, φₖ) = a(u, φₖ^ℓ)` for the
/// form `a(u, v) = ∫∇u·∇v + β∫∇_Γu·∇_Γv + κ∫uv` on the boundary.
pub fn ritz_project(
    mesh: &Mesh2D,
    geometry: Geometry<'_>,
    spec: &ProblemSpec,
    target: &RitzTarget,
    solver: &SolverHandle,
) -> Result<Vec<f64>> {
    if !(spec.kappa > 0.0) {
        return Err(Error::InvalidArgument("the Ritz projection requires kappa > 0".into()));
    }
    let grad = target.gradient.as_ref().ok_or(Error::MissingGradient("bulk"))?;
    let dm = DofMap::new(mesh, DofLayout::TraceCoupled);
    let stiffness = crate::assembly::assemble_stiffness(mesh, spec, &dm)?;
    let mut g = vec![0.0; mesh.n_vertices()];
    bulk_points(mesh, geometry, |q| {
        let grads = basis_gradients(&q.jacobian)?;
        let gu = grad(q.x);
        for k in 0..3 {
            g[q.vertices[k]] += q.weight * dot(gu, grads[k]);
        }
        Ok(())
    })?;
    surface_points(mesh, geometry, |q| {
        let gt = match &target.surface_gradient {
            Some(sg) => dot(sg(q.x), q.tangent),
            None => dot(grad(q.x), q.tangent),
        };
        let u = (target.u)(q.x);
        let [a, b] = q.vertices;
        // ∫ ∇_Γu·∇_Γφ ds = ∫ (∇_Γu·T) dφ/ds ds with dφ/ds = ∓1 on [0, 1].
        g[a] += q.weight * (-spec.beta * gt + spec.kappa * u * (1.0 - q.s) * q.speed);
        g[b] += q.weight * (spec.beta * gt + spec.kappa * u * q.s * q.speed);
        Ok(())
    })?;
    solve_nonsingular(&stiffness, &g, solver)
}

/// `log(eᵢ/eᵢ₊₁) / log(hᵢ/hᵢ₊₁)` for consecutive pairs.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != hs.len() || errors.len() < 2 {
        return Err(Error::InvalidArgument(
            "eoc needs at least two errors and one mesh size per error".into(),
        ));
    }
    if let Some(&e) = errors.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::NonPositiveError(e));
    }
    if hs.iter().any(|&h| !(h > 0.0)) || hs.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("mesh sizes must be positive and strictly decreasing".into()));
    }
    Ok(errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect())
}

/// Whether a convergence table is indexed by mesh width or time step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyAxis {
    Space,
    Time,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub scenario: String,
    pub level: usize,
    pub h: f64,
    pub tau: f64,
    pub n_dofs: usize,
    pub report: ErrorReport,
    /// Relative energy drift over the run; NaN when not recorded.
    pub energy_drift: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub axis: StudyAxis,
    rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn new(axis: StudyAxis) -> Self {
        Self { axis, rows: Vec::new() }
    }

    pub fn rows(&self) -> &[ConvergenceRow] {
        &self.rows
    }

    fn parameter(&self, row: &ConvergenceRow) -> f64 {
        match self.axis {
            StudyAxis::Space => row.h,
            StudyAxis::Time => row.tau,
        }
    }

    /// Appends a row; the study parameter must strictly decrease.
    pub fn push(&mut self, row: ConvergenceRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if !(self.parameter(&row) < self.parameter(last)) {
                return Err(Error::Config(format!(
                    "study parameter must strictly decrease: {} then {}",
                    self.parameter(last),
                    self.parameter(&row)
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    /// Rates of `norm` between consecutive rows; NaN where an error is zero.
    pub fn eoc_by(&self, norm: impl Fn(&ErrorReport) -> f64) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| {
                let (e0, e1) = (norm(&w[0].report), norm(&w[1].report));
                let (p0, p1) = (self.parameter(&w[0]), self.parameter(&w[1]));
                eoc(&[e0, e1], &[p0, p1]).map(|r| r[0]).unwrap_or(f64::NAN)
            })
            .collect()
    }

    pub fn eoc_l2(&self) -> Vec<f64> {
        self.eoc_by(ErrorReport::combined_l2)
    }
}
