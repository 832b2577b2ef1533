//! Assembly of the mass, stiffness and velocity-form matrices and of the load
//! vector for the four wave problems with dynamic boundary conditions, on the
//! polygonal domain with piecewise linear elements.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{dot, norm, signed_area, sub, Point};
use crate::linalg::{SolverHandle, SparseMatrix};
use crate::mesh::Mesh2D;
use crate::quadrature::{gauss2, TRIANGLE_DEGREE2, TRIANGLE_DEGREE4};

pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type SourceField = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Point) -> Point + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    PureSecondOrder,
    Advective,
    StrongDamping,
    Acoustic,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::PureSecondOrder => "pure",
            Variant::Advective => "advective",
            Variant::StrongDamping => "strong-damping",
            Variant::Acoustic => "acoustic",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcousticCoefficients {
    pub c_bulk: f64,
    pub c_surf: f64,
    pub mu_surf: f64,
    pub a_bulk: f64,
    pub k_surf: f64,
}

impl Default for AcousticCoefficients {
    fn default() -> Self {
        Self {
            c_bulk: 1.0,
            c_surf: 1.0,
            mu_surf: 1.0,
            a_bulk: 1.0,
            k_surf: 1.0,
        }
    }
}

/// How sources enter the load vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LoadRule {
    /// Mass matrices applied to nodal values of the sources.
    #[default]
    Interpolated,
    /// Degree-four quadrature of the sources against the basis; needed when a
    /// source is singular at a vertex.
    Quadrature,
}

#[derive(Clone, Default)]
pub struct InitialData {
    pub u0: Option<ScalarField>,
    pub u1: Option<ScalarField>,
    pub delta0: Option<ScalarField>,
    pub delta1: Option<ScalarField>,
}

/// Variant tag plus every coefficient, field, source and initial datum of one
/// problem. Coefficients not used by the variant are ignored.
#[derive(Clone)]
pub struct ProblemSpec {
    pub variant: Variant,
    pub mu: f64,
    pub beta: f64,
    pub kappa: f64,
    pub alpha_bulk: f64,
    pub alpha_surf: f64,
    pub velocity_bulk: Option<VectorField>,
    pub velocity_surf: Option<VectorField>,
    pub damping_bulk: f64,
    pub damping_surf: f64,
    pub acoustic: AcousticCoefficients,
    pub source_bulk: Option<SourceField>,
    pub source_surf: Option<SourceField>,
    pub initial: InitialData,
    pub load_rule: LoadRule,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("variant", &self.variant)
            .field("mu", &self.mu)
            .field("beta", &self.beta)
            .field("kappa", &self.kappa)
            .field("alpha_bulk", &self.alpha_bulk)
            .field("alpha_surf", &self.alpha_surf)
            .field("damping_bulk", &self.damping_bulk)
            .field("damping_surf", &self.damping_surf)
            .field("acoustic", &self.acoustic)
            .field("load_rule", &self.load_rule)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    fn base(variant: Variant) -> Self {
        Self {
            variant,
            mu: 1.0,
            beta: 1.0,
            kappa: 0.0,
            alpha_bulk: 0.0,
            alpha_surf: 0.0,
            velocity_bulk: None,
            velocity_surf: None,
            damping_bulk: 0.0,
            damping_surf: 0.0,
            acoustic: AcousticCoefficients::default(),
            source_bulk: None,
            source_surf: None,
            initial: InitialData::default(),
            load_rule: LoadRule::Interpolated,
        }
    }

    pub fn pure_second_order(mu: f64, beta: f64, kappa: f64) -> Self {
        Self {
            mu,
            beta,
            kappa,
            ..Self::base(Variant::PureSecondOrder)
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn advective(
        mu: f64,
        beta: f64,
        kappa: f64,
        alpha_bulk: f64,
        alpha_surf: f64,
        velocity_bulk: VectorField,
        velocity_surf: VectorField,
    ) -> Self {
        Self {
            mu,
            beta,
            kappa,
            alpha_bulk,
            alpha_surf,
            velocity_bulk: Some(velocity_bulk),
            velocity_surf: Some(velocity_surf),
            ..Self::base(Variant::Advective)
        }
    }

    pub fn strong_damping(mu: f64, beta: f64, kappa: f64, damping_bulk: f64, damping_surf: f64) -> Self {
        Self {
            mu,
            beta,
            kappa,
            damping_bulk,
            damping_surf,
            ..Self::base(Variant::StrongDamping)
        }
    }

    pub fn acoustic(coefficients: AcousticCoefficients) -> Self {
        Self {
            acoustic: coefficients,
            ..Self::base(Variant::Acoustic)
        }
    }

    pub fn with_sources(mut self, bulk: Option<SourceField>, surf: Option<SourceField>) -> Self {
        self.source_bulk = bulk;
        self.source_surf = surf;
        self
    }

    pub fn with_initial(mut self, initial: InitialData) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_load_rule(mut self, rule: LoadRule) -> Self {
        self.load_rule = rule;
        self
    }

    /// Weight of the surface mass in `m_h`.
    pub fn surface_mass_weight(&self) -> f64 {
        match self.variant {
            Variant::Acoustic => self.acoustic.mu_surf,
            _ => self.mu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        match self.variant {
            Variant::Acoustic => {
                let c = self.acoustic;
                if !(c.c_bulk > 0.0 && c.c_surf > 0.0 && c.mu_surf > 0.0 && c.a_bulk > 0.0 && c.k_surf > 0.0) {
                    return bad("acoustic coefficients must be positive");
                }
            }
            _ => {
                if !(self.mu > 0.0) {
                    return bad("mu must be positive");
                }
                if !(self.beta >= 0.0 && self.kappa >= 0.0) {
                    return bad("beta and kappa must be non-negative");
                }
            }
        }
        match self.variant {
            Variant::Advective => {
                if !(self.alpha_bulk >= 0.0 && self.alpha_surf >= 0.0) {
                    return bad("alpha coefficients must be non-negative");
                }
                if self.velocity_bulk.is_none() {
                    return Err(Error::MissingField("velocity_bulk"));
                }
                if self.velocity_surf.is_none() {
                    return Err(Error::MissingField("velocity_surf"));
                }
            }
            Variant::StrongDamping => {
                if !(self.beta > 0.0) {
                    return bad("strong damping requires beta > 0");
                }
                if !(self.damping_bulk > 0.0 && self.damping_surf > 0.0) {
                    return bad("damping coefficients must be positive");
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofLayout {
    /// One unknown per vertex; the surface function is the trace.
    TraceCoupled,
    /// Bulk unknowns per vertex followed by independent surface unknowns per
    /// boundary vertex.
    AcousticBlock,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    layout: DofLayout,
    n_vertices: usize,
    boundary_vertices: Vec<usize>,
    surface_slot: Vec<Option<usize>>,
}

impl DofMap {
    pub fn new(mesh: &Mesh2D, layout: DofLayout) -> Self {
        let boundary_vertices = mesh.boundary_vertices();
        let mut surface_slot = vec![None; mesh.n_vertices()];
        for (k, &v) in boundary_vertices.iter().enumerate() {
            surface_slot[v] = Some(k);
        }
        Self {
            layout,
            n_vertices: mesh.n_vertices(),
            boundary_vertices,
            surface_slot,
        }
    }

    pub fn for_problem(mesh: &Mesh2D, spec: &ProblemSpec) -> Self {
        let layout = match spec.variant {
            Variant::Acoustic => DofLayout::AcousticBlock,
            _ => DofLayout::TraceCoupled,
        };
        Self::new(mesh, layout)
    }

    pub fn layout(&self) -> DofLayout {
        self.layout
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_dofs(&self) -> usize {
        match self.layout {
            DofLayout::TraceCoupled => self.n_vertices,
            DofLayout::AcousticBlock => self.n_vertices + self.boundary_vertices.len(),
        }
    }

    /// Offset of the first surface unknown for the block layout.
    pub fn delta_offset(&self) -> Option<usize> {
        match self.layout {
            DofLayout::TraceCoupled => None,
            DofLayout::AcousticBlock => Some(self.n_vertices),
        }
    }

    pub fn boundary_vertex_order(&self) -> &[usize] {
        &self.boundary_vertices
    }

    /// Global index of the unknown carrying the surface function at vertex `v`.
    pub fn surface_dof(&self, v: usize) -> Option<usize> {
        let slot = self.surface_slot.get(v).copied().flatten()?;
        Some(match self.layout {
            DofLayout::TraceCoupled => v,
            DofLayout::AcousticBlock => self.n_vertices + slot,
        })
    }
}

/// Gradients of the three barycentric coordinates and the (positive) area.
pub fn barycentric_gradients(p: [Point; 3]) -> Result<([Point; 3], f64)> {
    let area = signed_area(p[0], p[1], p[2]);
    if !(area > 0.0) {
        return Err(Error::DegenerateElement { element: usize::MAX, area });
    }
    let inv = 0.5 / area;
    let mut g = [[0.0; 2]; 3];
    for k in 0..3 {
        let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
        g[k] = [(a[1] - b[1]) * inv, (b[0] - a[0]) * inv];
    }
    Ok((g, area))
}

pub fn local_bulk_mass(p: [Point; 3]) -> Result<[[f64; 3]; 3]> {
    let (_, area) = barycentric_gradients(p)?;
    let mut m = [[area / 12.0; 3]; 3];
    for (k, row) in m.iter_mut().enumerate() {
        row[k] = area / 6.0;
    }
    Ok(m)
}

pub fn local_bulk_stiffness(p: [Point; 3]) -> Result<[[f64; 3]; 3]> {
    let (g, area) = barycentric_gradients(p)?;
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * dot(g[i], g[j]);
        }
    }
    Ok(k)
}

pub fn local_edge_mass(length: f64) -> [[f64; 2]; 2] {
    [[length / 3.0, length / 6.0], [length / 6.0, length / 3.0]]
}

pub fn local_edge_stiffness(length: f64) -> [[f64; 2]; 2] {
    let s = 1.0 / length;
    [[s, -s], [-s, s]]
}

/// `∫ (α φⱼ + v·∇φⱼ) φₖ` with `v` linear through its nodal values; entry
/// `[k][j]`.
pub fn local_bulk_advection(p: [Point; 3], alpha: f64, v_nodal: [Point; 3]) -> Result<[[f64; 3]; 3]> {
    let (g, area) = barycentric_gradients(p)?;
    let mut b = [[0.0; 3]; 3];
    for (lambda, w) in TRIANGLE_DEGREE2 {
        let v = [
            lambda[0] * v_nodal[0][0] + lambda[1] * v_nodal[1][0] + lambda[2] * v_nodal[2][0],
            lambda[0] * v_nodal[0][1] + lambda[1] * v_nodal[1][1] + lambda[2] * v_nodal[2][1],
        ];
        for k in 0..3 {
            for j in 0..3 {
                b[k][j] += w * area * (alpha * lambda[j] + dot(v, g[j])) * lambda[k];
            }
        }
    }
    Ok(b)
}

/// Surface counterpart of [`local_bulk_advection`] on the straight edge
/// `a`-`b`, using the tangential derivative along the edge.
pub fn local_edge_advection(a: Point, b: Point, alpha: f64, v_nodal: [Point; 2]) -> Result<[[f64; 2]; 2]> {
    let e = sub(b, a);
    let len = norm(e);
    if len == 0.0 {
        return Err(Error::ZeroLengthEdge);
    }
    let t = [e[0] / len, e[1] / len];
    let dphi = [-1.0 / len, 1.0 / len];
    let mut m = [[0.0; 2]; 2];
    for (s, w) in gauss2() {
        let phi = [1.0 - s, s];
        let vt = (1.0 - s) * dot(v_nodal[0], t) + s * dot(v_nodal[1], t);
        for k in 0..2 {
            for j in 0..2 {
                m[k][j] += w * len * (alpha * phi[j] + vt * dphi[j]) * phi[k];
            }
        }
    }
    Ok(m)
}

fn degenerate(element: usize, e: Error) -> Error {
    match e {
        Error::DegenerateElement { area, .. } => Error::DegenerateElement { element, area },
        other => other,
    }
}

/// Bulk and surface pieces of the mass and stiffness forms, each of full
/// dof dimension. Surface pieces act on the unknowns carrying the surface
/// function (the trace or the independent surface field).
#[derive(Clone, Debug)]
pub struct OperatorParts {
    pub mass_bulk: SparseMatrix,
    pub mass_surf: SparseMatrix,
    pub stiff_bulk: SparseMatrix,
    pub stiff_surf: SparseMatrix,
}

impl OperatorParts {
    pub fn assemble(mesh: &Mesh2D, dofmap: &DofMap) -> Result<Self> {
        let n = dofmap.n_dofs();
        let mut mb = Vec::with_capacity(9 * mesh.n_triangles());
        let mut kb = Vec::with_capacity(9 * mesh.n_triangles());
        for (ti, tri) in mesh.triangles().iter().enumerate() {
            let p = mesh.triangle_points(ti);
            let m = local_bulk_mass(p).map_err(|e| degenerate(ti, e))?;
            let k = local_bulk_stiffness(p).map_err(|e| degenerate(ti, e))?;
            for i in 0..3 {
                for j in 0..3 {
                    mb.push((tri[i], tri[j], m[i][j]));
                    kb.push((tri[i], tri[j], k[i][j]));
                }
            }
        }
        let mut ms = Vec::with_capacity(4 * mesh.boundary_edges().len());
        let mut ks = Vec::with_capacity(4 * mesh.boundary_edges().len());
        for edge in mesh.boundary_edges() {
            let [a, b] = edge.vertices;
            let len = norm(sub(mesh.vertices()[b], mesh.vertices()[a]));
            if len == 0.0 {
                return Err(Error::ZeroLengthEdge);
            }
            let dofs = [surface_dof(dofmap, a)?, surface_dof(dofmap, b)?];
            let (m, k) = (local_edge_mass(len), local_edge_stiffness(len));
            for i in 0..2 {
                for j in 0..2 {
                    ms.push((dofs[i], dofs[j], m[i][j]));
                    ks.push((dofs[i], dofs[j], k[i][j]));
                }
            }
        }
        Ok(Self {
            mass_bulk: SparseMatrix::from_triplets(n, n, &mb)?,
            mass_surf: SparseMatrix::from_triplets(n, n, &ms)?,
            stiff_bulk: SparseMatrix::from_triplets(n, n, &kb)?,
            stiff_surf: SparseMatrix::from_triplets(n, n, &ks)?,
        })
    }
}

fn surface_dof(dofmap: &DofMap, v: usize) -> Result<usize> {
    dofmap
        .surface_dof(v)
        .ok_or_else(|| Error::InvalidArgument(format!("boundary edge vertex {v} is not flagged as boundary")))
}

fn mass_from_parts(parts: &OperatorParts, spec: &ProblemSpec) -> Result<SparseMatrix> {
    SparseMatrix::linear_combination(&[
        (1.0, &parts.mass_bulk),
        (spec.surface_mass_weight(), &parts.mass_surf),
    ])
}

fn stiffness_from_parts(parts: &OperatorParts, spec: &ProblemSpec) -> Result<SparseMatrix> {
    match spec.variant {
        Variant::Acoustic => {
            let c = spec.acoustic;
            SparseMatrix::linear_combination(&[
                (c.a_bulk, &parts.mass_bulk),
                (c.c_bulk, &parts.stiff_bulk),
                (c.k_surf, &parts.mass_surf),
                (c.c_surf, &parts.stiff_surf),
            ])
        }
        _ => SparseMatrix::linear_combination(&[
            (1.0, &parts.stiff_bulk),
            (spec.beta, &parts.stiff_surf),
            (spec.kappa, &parts.mass_surf),
        ]),
    }
}

fn velocity_from_parts(mesh: &Mesh2D, spec: &ProblemSpec, dofmap: &DofMap, parts: &OperatorParts) -> Result<SparseMatrix> {
    let n = dofmap.n_dofs();
    match spec.variant {
        Variant::PureSecondOrder => Ok(SparseMatrix::zeros(n, n)),
        Variant::StrongDamping => SparseMatrix::linear_combination(&[
            (spec.damping_bulk, &parts.stiff_bulk),
            (spec.damping_surf, &parts.stiff_surf),
        ]),
        Variant::Advective => advection_matrix(mesh, spec, dofmap),
        Variant::Acoustic => {
            // c_Ω [[0, -Trᵀ M_Γ], [M_Γ Tr, 0]] in (bulk, surface) block order.
            let c = spec.acoustic.c_bulk;
            let mut t = Vec::new();
            for (i, j, v) in parts.mass_surf.triplets() {
                let bulk_col = j - n_bulk_offset(dofmap, j)?;
                t.push((i, bulk_col, c * v));
                t.push((bulk_col, i, -c * v));
            }
            SparseMatrix::from_triplets(n, n, &t)
        }
    }
}

/// For a surface unknown `j` in the block layout, the distance to the bulk
/// unknown of the same vertex.
fn n_bulk_offset(dofmap: &DofMap, j: usize) -> Result<usize> {
    let offset = dofmap
        .delta_offset()
        .ok_or_else(|| Error::InvalidArgument("coupling requires the block layout".into()))?;
    let slot = j - offset;
    Ok(j - dofmap.boundary_vertex_order()[slot])
}

fn advection_matrix(mesh: &Mesh2D, spec: &ProblemSpec, dofmap: &DofMap) -> Result<SparseMatrix> {
    let vb = spec.velocity_bulk.as_ref().ok_or(Error::MissingField("velocity_bulk"))?;
    let vs = spec.velocity_surf.as_ref().ok_or(Error::MissingField("velocity_surf"))?;
    let n = dofmap.n_dofs();
    let verts = mesh.vertices();
    let nodal_bulk: Vec<Point> = verts.iter().map(|&x| vb(x)).collect();
    let mut t = Vec::with_capacity(9 * mesh.n_triangles());
    for (ti, tri) in mesh.triangles().iter().enumerate() {
        let v = [nodal_bulk[tri[0]], nodal_bulk[tri[1]], nodal_bulk[tri[2]]];
        let b = local_bulk_advection(mesh.triangle_points(ti), spec.alpha_bulk, v).map_err(|e| degenerate(ti, e))?;
        for k in 0..3 {
            for j in 0..3 {
                t.push((tri[k], tri[j], b[k][j]));
            }
        }
    }
    for edge in mesh.boundary_edges() {
        let [a, b] = edge.vertices;
        let m = local_edge_advection(verts[a], verts[b], spec.alpha_surf, [vs(verts[a]), vs(verts[b])])?;
        let dofs = [surface_dof(dofmap, a)?, surface_dof(dofmap, b)?];
        for k in 0..2 {
            for j in 0..2 {
                t.push((dofs[k], dofs[j], m[k][j]));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &t)
}

/// Mass matrix of `m_h`.
pub fn assemble_mass(mesh: &Mesh2D, spec: &ProblemSpec, dofmap: &DofMap) -> Result<SparseMatrix> {
    mass_from_parts(&OperatorParts::assemble(mesh, dofmap)?, spec)
}

/// Stiffness matrix of `a_h`.
pub fn assemble_stiffness(mesh: &Mesh2D, spec: &ProblemSpec, dofmap: &DofMap) -> Result<SparseMatrix> {
    stiffness_from_parts(&OperatorParts::assemble(mesh, dofmap)?, spec)
}

/// Matrix of the velocity form `b_h`.
pub fn assemble_velocity_form(mesh: &Mesh2D, spec: &ProblemSpec, dofmap: &DofMap) -> Result<SparseMatrix> {
    spec.validate()?;
    velocity_from_parts(mesh, spec, dofmap, &OperatorParts::assemble(mesh, dofmap)?)
}

/// Nodal values of `bulk` at every vertex and, for the block layout, of
/// `surface` at every boundary vertex. Without a surface function the trace
/// of `bulk` is used.
pub fn interpolate(
    mesh: &Mesh2D,
    dofmap: &DofMap,
    bulk: &dyn Fn(Point) -> f64,
    surface: Option<&dyn Fn(Point) -> f64>,
) -> Vec<f64> {
    let mut out: Vec<f64> = mesh.vertices().iter().map(|&x| bulk(x)).collect();
    if dofmap.layout() == DofLayout::AcousticBlock {
        let f = surface.unwrap_or(bulk);
        out.extend(dofmap.boundary_vertex_order().iter().map(|&v| f(mesh.vertices()[v])));
    }
    out
}

struct QuadraturePoint<const K: usize> {
    point: Point,
    weight: f64,
    dofs: [usize; K],
    basis: [f64; K],
}

enum LoadKind {
    Zero,
    Interpolated {
        mass_bulk: SparseMatrix,
        mass_surf: SparseMatrix,
        bulk_nodes: Vec<Point>,
        surface_nodes: Vec<(usize, Point)>,
    },
    Quadrature {
        bulk: Vec<QuadraturePoint<3>>,
        surface: Vec<QuadraturePoint<2>>,
    },
}

/// Time-dependent load vector `b̄(t)`; sources enter through the PDE-level
/// duality without the surface mass weight.
pub struct LoadEvaluator {
    n: usize,
    source_bulk: Option<SourceField>,
    source_surf: Option<SourceField>,
    kind: LoadKind,
}

impl fmt::Debug for LoadEvaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            LoadKind::Zero => "zero",
            LoadKind::Interpolated { .. } => "interpolated",
            LoadKind::Quadrature { .. } => "quadrature",
        };
        f.debug_struct("LoadEvaluator").field("n", &self.n).field("kind", &kind).finish()
    }
}

impl LoadEvaluator {
    pub fn new(mesh: &Mesh2D, spec: &ProblemSpec, dofmap: &DofMap, parts: &OperatorParts) -> Result<Self> {
        let n = dofmap.n_dofs();
        let (source_bulk, source_surf) = (spec.source_bulk.clone(), spec.source_surf.clone());
        let kind = if source_bulk.is_none() && source_surf.is_none() {
            LoadKind::Zero
        } else {
            match spec.load_rule {
                LoadRule::Interpolated => LoadKind::Interpolated {
                    mass_bulk: parts.mass_bulk.clone(),
                    mass_surf: parts.mass_surf.clone(),
                    bulk_nodes: mesh.vertices().to_vec(),
                    surface_nodes: dofmap
                        .boundary_vertex_order()
                        .iter()
                        .map(|&v| (dofmap.surface_dof(v).expect("boundary vertex"), mesh.vertices()[v]))
                        .collect(),
                },
                LoadRule::Quadrature => {
                    let mut bulk = Vec::with_capacity(6 * mesh.n_triangles());
                    for (ti, tri) in mesh.triangles().iter().enumerate() {
                        let p = mesh.triangle_points(ti);
                        let area = mesh.triangle_area(ti);
                        for (l, w) in TRIANGLE_DEGREE4 {
                            bulk.push(QuadraturePoint {
                                point: [
                                    l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                                    l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
                                ],
                                weight: w * area,
                                dofs: *tri,
                                basis: l,
                            });
                        }
                    }
                    let mut surface = Vec::new();
                    for edge in mesh.boundary_edges() {
                        let [a, b] = edge.vertices;
                        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
                        let len = norm(sub(pb, pa));
                        for (s, w) in crate::quadrature::gauss4() {
                            surface.push(QuadraturePoint {
                                point: [(1.0 - s) * pa[0] + s * pb[0], (1.0 - s) * pa[1] + s * pb[1]],
                                weight: w * len,
                                dofs: [surface_dof(dofmap, a)?, surface_dof(dofmap, b)?],
                                basis: [1.0 - s, s],
                            });
                        }
                    }
                    LoadKind::Quadrature { bulk, surface }
                }
            }
        };
        Ok(Self {
            n,
            source_bulk,
            source_surf,
            kind,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, LoadKind::Zero)
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        match &self.kind {
            LoadKind::Zero => {}
            LoadKind::Interpolated {
                mass_bulk,
                mass_surf,
                bulk_nodes,
                surface_nodes,
            } => {
                if let Some(f) = &self.source_bulk {
                    let mut nodal = vec![0.0; self.n];
                    for (v, &x) in bulk_nodes.iter().enumerate() {
                        nodal[v] = f(x, t);
                    }
                    mass_bulk.matvec_into(&nodal, &mut out);
                }
                if let Some(g) = &self.source_surf {
                    let mut nodal = vec![0.0; self.n];
                    for &(dof, x) in surface_nodes {
                        nodal[dof] = g(x, t);
                    }
                    let mut tmp = vec![0.0; self.n];
                    mass_surf.matvec_into(&nodal, &mut tmp);
                    out.iter_mut().zip(&tmp).for_each(|(o, v)| *o += v);
                }
            }
            LoadKind::Quadrature { bulk, surface } => {
                if let Some(f) = &self.source_bulk {
                    for q in bulk {
                        let fv = q.weight * f(q.point, t);
                        for k in 0..3 {
                            out[q.dofs[k]] += fv * q.basis[k];
                        }
                    }
                }
                if let Some(g) = &self.source_surf {
                    for q in surface {
                        let gv = q.weight * g(q.point, t);
                        for k in 0..2 {
                            out[q.dofs[k]] += gv * q.basis[k];
                        }
                    }
                }
            }
        }
        out
    }
}

/// Load vector at time `t`.
pub fn assemble_load(mesh: &Mesh2D, spec: &ProblemSpec, dofmap: &DofMap, t: f64) -> Result<Vec<f64>> {
    let parts = OperatorParts::assemble(mesh, dofmap)?;
    Ok(LoadEvaluator::new(mesh, spec, dofmap, &parts)?.eval(t))
}

/// Sampled monotonicity margins of the advective velocity form: the bulk
/// margin `α_Ω - ½ div v_Ω` per triangle and the surface margin
/// `α_Γ + ½ (v_Ω·ν - div_Γ v_Γ)` per boundary edge, both for the nodally
/// interpolated fields on the polygonal domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonotonicityReport {
    pub bulk_min: f64,
    pub surface_min: f64,
    pub violations: usize,
}

pub fn monotonicity_check(mesh: &Mesh2D, spec: &ProblemSpec, eps: f64) -> Result<MonotonicityReport> {
    let vb = spec.velocity_bulk.as_ref().ok_or(Error::MissingField("velocity_bulk"))?;
    let vs = spec.velocity_surf.as_ref().ok_or(Error::MissingField("velocity_surf"))?;
    let verts = mesh.vertices();
    let mut report = MonotonicityReport {
        bulk_min: f64::INFINITY,
        surface_min: f64::INFINITY,
        violations: 0,
    };
    for (ti, tri) in mesh.triangles().iter().enumerate() {
        let (g, _) = barycentric_gradients(mesh.triangle_points(ti)).map_err(|e| degenerate(ti, e))?;
        let div: f64 = (0..3).map(|k| dot(vb(verts[tri[k]]), g[k])).sum();
        let margin = spec.alpha_bulk - 0.5 * div;
        report.bulk_min = report.bulk_min.min(margin);
        if margin < -eps {
            report.violations += 1;
        }
    }
    for (ei, edge) in mesh.boundary_edges().iter().enumerate() {
        let [a, b] = edge.vertices;
        let nu = mesh.edge_normal(ei)?;
        let e = sub(verts[b], verts[a]);
        let len = norm(e);
        let t = [e[0] / len, e[1] / len];
        let div_s = dot(sub(vs(verts[b]), vs(verts[a])), t) / len;
        for (s, _) in gauss2() {
            let va = vb(verts[a]);
            let vbb = vb(verts[b]);
            let v = [(1.0 - s) * va[0] + s * vbb[0], (1.0 - s) * va[1] + s * vbb[1]];
            let margin = spec.alpha_surf + 0.5 * (dot(v, nu) - div_s);
            report.surface_min = report.surface_min.min(margin);
            if margin < -eps {
                report.violations += 1;
            }
        }
    }
    Ok(report)
}

/// Matrices and load of one semi-discrete problem, `M ü + B u̇ + A u = b̄(t)`.
#[derive(Debug)]
pub struct AssembledOperators {
    pub dofmap: DofMap,
    pub mass: SparseMatrix,
    pub stiffness: SparseMatrix,
    pub velocity: SparseMatrix,
    pub parts: OperatorParts,
    pub load: LoadEvaluator,
    surface_weight: f64,
}

impl AssembledOperators {
    pub fn n_dofs(&self) -> usize {
        self.dofmap.n_dofs()
    }

    /// Weight of the surface mass in `M` (`μ`, or `μ_Γ` for the block layout).
    pub fn surface_weight(&self) -> f64 {
        self.surface_weight
    }

    /// Estimate of the smallest `ρ ≥ 0` making `B + ρ M` monotone, from power
    /// iterations on `M⁻¹ sym(B)`.
    pub fn quasi_monotonicity_shift(&self, iterations: usize) -> Result<f64> {
        let sym = SparseMatrix::linear_combination(&[(0.5, &self.velocity), (0.5, &self.velocity.transpose())])?;
        if sym.max_abs() == 0.0 {
            return Ok(0.0);
        }
        let solver = SolverHandle::direct();
        let n = self.n_dofs();
        let apply = |x: &[f64]| -> Result<Vec<f64>> { solver.solve(&self.mass, &sym.matvec(x)?) };
        let rayleigh = |x: &[f64]| -> Result<f64> { Ok(sym.quad_form(x)? / self.mass.quad_form(x)?) };
        let normalize = |x: &mut Vec<f64>| -> Result<()> {
            let s = self.mass.quad_form(x)?.sqrt();
            if s > 0.0 {
                x.iter_mut().for_each(|v| *v /= s);
            }
            Ok(())
        };
        // Deterministic, non-symmetric start vector.
        let start: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 104_729) as f64 / 104_729.0).collect();

        let mut x = start.clone();
        normalize(&mut x)?;
        for _ in 0..iterations {
            x = apply(&x)?;
            normalize(&mut x)?;
        }
        let radius = rayleigh(&x)?.abs() * 1.05;

        let mut y = start;
        normalize(&mut y)?;
        for _ in 0..iterations {
            let my = apply(&y)?;
            y = my.iter().zip(&y).map(|(a, b)| a - radius * b).collect();
            normalize(&mut y)?;
        }
        let lambda_min = rayleigh(&y)?;
        Ok((-lambda_min).max(0.0))
    }
}

/// Assembles every operator of `spec` on `mesh`.
pub fn assemble(mesh: &Mesh2D, spec: &ProblemSpec) -> Result<AssembledOperators> {
    spec.validate()?;
    let dofmap = DofMap::for_problem(mesh, spec);
    let parts = OperatorParts::assemble(mesh, &dofmap)?;
    if spec.variant == Variant::Advective {
        let report = monotonicity_check(mesh, spec, 1e-12)?;
        if report.violations > 0 {
            log::warn!(
                "advective form is not monotone at {} sample points (bulk margin {:.3e}, surface margin {:.3e})",
                report.violations,
                report.bulk_min,
                report.surface_min
            );
        }
    }
    let mass = mass_from_parts(&parts, spec)?;
    let stiffness = stiffness_from_parts(&parts, spec)?;
    let velocity = velocity_from_parts(mesh, spec, &dofmap, &parts)?;
    let load = LoadEvaluator::new(mesh, spec, &dofmap, &parts)?;
    Ok(AssembledOperators {
        dofmap,
        mass,
        stiffness,
        velocity,
        parts,
        load,
        surface_weight: spec.surface_mass_weight(),
    })
}
