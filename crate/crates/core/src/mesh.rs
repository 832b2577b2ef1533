//! Triangulations of the disc with boundary vertices on the curve, nested
//! midpoint refinement, validation and the plain-text mesh format.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fmt::{self, Write as _};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{self, norm, project_to_boundary, signed_area, sub, BoundaryCurve, Point};

/// Boundary edge stored in the counter-clockwise orientation of its owning
/// triangle, so the outward normal is the tangent rotated clockwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub triangle: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh2D {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    is_boundary: Vec<bool>,
    h: f64,
}

impl Mesh2D {
    /// Builds a mesh from vertices and counter-clockwise triangles. Boundary
    /// edges are the edges owned by exactly one triangle. Vertex flags are
    /// taken as given so that inconsistent input can still be validated.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, is_boundary: Vec<bool>) -> Result<Self> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(Error::InvalidArgument("mesh needs vertices and triangles".into()));
        }
        if is_boundary.len() != vertices.len() {
            return Err(Error::DimensionMismatch {
                expected: vertices.len(),
                found: is_boundary.len(),
            });
        }
        if let Some(&bad) = triangles.iter().flatten().find(|&&v| v >= vertices.len()) {
            return Err(Error::InvalidArgument(format!("vertex index {bad} out of range")));
        }
        let boundary_edges = find_boundary_edges(&triangles);
        Ok(Self::from_parts(vertices, triangles, boundary_edges, is_boundary))
    }

    fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
        is_boundary: Vec<bool>,
    ) -> Self {
        let h = triangles
            .iter()
            .map(|t| triangle_diameter(&vertices, t))
            .fold(0.0, f64::max);
        Self {
            vertices,
            triangles,
            boundary_edges,
            is_boundary,
            h,
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn is_boundary(&self) -> &[bool] {
        &self.is_boundary
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Maximal element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Flagged boundary vertices in increasing index order.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| self.is_boundary[v]).collect()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [i, j, k] = self.triangles[t];
        [self.vertices[i], self.vertices[j], self.vertices[k]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_points(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Area of the polygonal domain.
    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Length of the polygonal boundary.
    pub fn boundary_length(&self) -> f64 {
        self.boundary_edges
            .iter()
            .map(|e| norm(sub(self.vertices[e.vertices[1]], self.vertices[e.vertices[0]])))
            .sum()
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_degrees(&self) -> f64 {
        let mut min = f64::INFINITY;
        for t in 0..self.triangles.len() {
            let p = self.triangle_points(t);
            for k in 0..3 {
                let u = sub(p[(k + 1) % 3], p[k]);
                let v = sub(p[(k + 2) % 3], p[k]);
                let cos = geometry::dot(u, v) / (norm(u) * norm(v));
                min = min.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        min
    }

    /// Unit outward normal of boundary edge `e`.
    pub fn edge_normal(&self, e: usize) -> Result<Point> {
        let edge = self.boundary_edges[e];
        geometry::outward_normal(
            self.vertices[edge.vertices[0]],
            self.vertices[edge.vertices[1]],
            self.centroid(edge.triangle),
        )
    }

    /// Writes the mesh in the plain text format:
    /// `nv nt nb`, then `x y flag` per vertex, `i j k` per triangle and
    /// `i j tri` per boundary edge, with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} {} {}",
            self.vertices.len(),
            self.triangles.len(),
            self.boundary_edges.len()
        );
        for (v, &b) in self.vertices.iter().zip(&self.is_boundary) {
            let _ = writeln!(s, "{:.16e} {:.16e} {}", v[0], v[1], u8::from(b));
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        for e in &self.boundary_edges {
            let _ = writeln!(s, "{} {} {}", e.vertices[0], e.vertices[1], e.triangle);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |detail: String| Error::Parse { what: "mesh", detail };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut next_fields = |expect: usize| -> Result<Vec<&str>> {
            let line = lines.next().ok_or_else(|| err("unexpected end of file".into()))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != expect {
                return Err(err(format!("expected {expect} fields in `{line}`")));
            }
            Ok(fields)
        };
        let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| err(format!("`{s}`: {e}")));
        let parse_f64 = |s: &str| s.parse::<f64>().map_err(|e| err(format!("`{s}`: {e}")));

        let header = next_fields(3)?;
        let (nv, nt, nb) = (
            parse_usize(header[0])?,
            parse_usize(header[1])?,
            parse_usize(header[2])?,
        );
        let mut vertices = Vec::with_capacity(nv);
        let mut is_boundary = Vec::with_capacity(nv);
        for _ in 0..nv {
            let f = next_fields(3)?;
            vertices.push([parse_f64(f[0])?, parse_f64(f[1])?]);
            is_boundary.push(match f[2] {
                "0" => false,
                "1" => true,
                other => return Err(err(format!("boundary flag `{other}`"))),
            });
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let f = next_fields(3)?;
            triangles.push([parse_usize(f[0])?, parse_usize(f[1])?, parse_usize(f[2])?]);
        }
        let mut boundary_edges = Vec::with_capacity(nb);
        for _ in 0..nb {
            let f = next_fields(3)?;
            boundary_edges.push(BoundaryEdge {
                vertices: [parse_usize(f[0])?, parse_usize(f[1])?],
                triangle: parse_usize(f[2])?,
            });
        }
        let in_range = triangles.iter().flatten().all(|&v| v < nv)
            && boundary_edges
                .iter()
                .all(|e| e.vertices.iter().all(|&v| v < nv) && e.triangle < nt);
        if !in_range {
            return Err(err("index out of range".into()));
        }
        Ok(Self::from_parts(vertices, triangles, boundary_edges, is_boundary))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn triangle_diameter(vertices: &[Point], t: &[usize; 3]) -> f64 {
    (0..3)
        .map(|k| norm(sub(vertices[t[(k + 1) % 3]], vertices[t[k]])))
        .fold(0.0, f64::max)
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Edges owned by exactly one triangle, in triangle order.
fn find_boundary_edges(triangles: &[[usize; 3]]) -> Vec<BoundaryEdge> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            *count.entry(edge_key(t[k], t[(k + 1) % 3])).or_default() += 1;
        }
    }
    let mut edges = Vec::new();
    for (ti, t) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if count[&edge_key(a, b)] == 1 {
                edges.push(BoundaryEdge {
                    vertices: [a, b],
                    triangle: ti,
                });
            }
        }
    }
    edges
}

/// Fan of `n` triangles around the origin with boundary vertices at angles
/// `2πk/n` on the unit circle. Vertex 0 is the center.
pub fn seed_disc_mesh(n: usize) -> Result<Mesh2D> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("seed mesh needs n >= 4, got {n}")));
    }
    let mut vertices = vec![[0.0, 0.0]];
    for k in 0..n {
        let theta = TAU * k as f64 / n as f64;
        vertices.push([theta.cos(), theta.sin()]);
    }
    let triangles = (0..n).map(|k| [0, 1 + k, 1 + (k + 1) % n]).collect();
    let mut is_boundary = vec![true; n + 1];
    is_boundary[0] = false;
    Mesh2D::new(vertices, triangles, is_boundary)
}

/// Red refinement: every triangle is split into four through its edge
/// midpoints, and midpoints of boundary edges are projected onto `curve`.
/// Coarse vertices keep their indices.
pub fn refine(mesh: &Mesh2D, curve: &BoundaryCurve) -> Result<Mesh2D> {
    let boundary: std::collections::HashSet<(usize, usize)> = mesh
        .boundary_edges
        .iter()
        .map(|e| edge_key(e.vertices[0], e.vertices[1]))
        .collect();

    let mut vertices = mesh.vertices.clone();
    let mut is_boundary = mesh.is_boundary.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>, is_boundary: &mut Vec<bool>| -> Result<usize> {
        let key = edge_key(a, b);
        if let Some(&m) = midpoint.get(&key) {
            return Ok(m);
        }
        let (pa, pb) = (vertices[a], vertices[b]);
        let mut p = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
        let on_boundary = boundary.contains(&key);
        if on_boundary {
            p = project_to_boundary(p, curve)?;
        }
        vertices.push(p);
        is_boundary.push(on_boundary);
        let m = vertices.len() - 1;
        midpoint.insert(key, m);
        Ok(m)
    };

    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for t in &mesh.triangles {
        let [a, b, c] = *t;
        let ab = mid(a, b, &mut vertices, &mut is_boundary)?;
        let bc = mid(b, c, &mut vertices, &mut is_boundary)?;
        let ca = mid(c, a, &mut vertices, &mut is_boundary)?;
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    Mesh2D::new(vertices, triangles, is_boundary)
}

/// Maximal element diameter.
pub fn mesh_width(mesh: &Mesh2D) -> f64 {
    mesh.h()
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NonPositiveArea { triangle: usize, area: f64 },
    OffCurveVertex { vertex: usize, distance: f64 },
    /// An edge shared by more than two triangles.
    NonConformingEdge { vertices: [usize; 2], count: usize },
    MultipleBoundaryEdges { triangle: usize, count: usize },
    /// Vertex flag disagrees with membership in a boundary edge.
    BoundaryFlagMismatch { vertex: usize, flagged: bool },
    /// The stored boundary edge list disagrees with the triangle topology.
    BoundaryEdgeList,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveArea { triangle, area } => {
                write!(f, "triangle {triangle} has non-positive area {area:e}")
            }
            Violation::OffCurveVertex { vertex, distance } => {
                write!(f, "boundary vertex {vertex} is {distance:e} off the curve")
            }
            Violation::NonConformingEdge { vertices, count } => {
                write!(f, "edge {vertices:?} is shared by {count} triangles")
            }
            Violation::MultipleBoundaryEdges { triangle, count } => {
                write!(f, "triangle {triangle} has {count} boundary edges")
            }
            Violation::BoundaryFlagMismatch { vertex, flagged } => {
                write!(f, "vertex {vertex} boundary flag is {flagged} but topology disagrees")
            }
            Violation::BoundaryEdgeList => f.write_str("stored boundary edges disagree with topology"),
        }
    }
}

/// Tolerance for boundary vertices lying on the curve.
pub const ON_CURVE_TOL: f64 = 1e-12;

/// Checks every mesh invariant and reports all violations found.
pub fn validate(mesh: &Mesh2D, curve: &BoundaryCurve) -> Vec<Violation> {
    let mut out = Vec::new();
    for t in 0..mesh.triangles.len() {
        let area = mesh.triangle_area(t);
        if !(area > 0.0) {
            out.push(Violation::NonPositiveArea { triangle: t, area });
        }
    }

    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &mesh.triangles {
        for k in 0..3 {
            *count.entry(edge_key(t[k], t[(k + 1) % 3])).or_default() += 1;
        }
    }
    let mut shared: Vec<_> = count.iter().filter(|(_, &c)| c > 2).collect();
    shared.sort();
    for (&(a, b), &c) in shared {
        out.push(Violation::NonConformingEdge { vertices: [a, b], count: c });
    }

    let topological = find_boundary_edges(&mesh.triangles);
    if topological != mesh.boundary_edges {
        out.push(Violation::BoundaryEdgeList);
    }
    let mut per_triangle = vec![0usize; mesh.triangles.len()];
    let mut on_boundary = vec![false; mesh.vertices.len()];
    for e in &topological {
        per_triangle[e.triangle] += 1;
        on_boundary[e.vertices[0]] = true;
        on_boundary[e.vertices[1]] = true;
    }
    for (t, &c) in per_triangle.iter().enumerate() {
        if c > 1 {
            out.push(Violation::MultipleBoundaryEdges { triangle: t, count: c });
        }
    }
    for v in 0..mesh.vertices.len() {
        if mesh.is_boundary[v] != on_boundary[v] {
            out.push(Violation::BoundaryFlagMismatch {
                vertex: v,
                flagged: mesh.is_boundary[v],
            });
        }
        if mesh.is_boundary[v] || on_boundary[v] {
            let distance = curve.distance(mesh.vertices[v]).unwrap_or(f64::INFINITY);
            if distance > ON_CURVE_TOL {
                out.push(Violation::OffCurveVertex { vertex: v, distance });
            }
        }
    }
    out
}

/// Nested meshes obtained by repeated refinement. Because refinement keeps
/// coarse vertices as a prefix, injection from a coarse level into any finer
/// level is the identity on indices.
#[derive(Clone, Debug)]
pub struct RefinementHierarchy {
    levels: Vec<Mesh2D>,
    vertex_injection: Vec<Vec<usize>>,
}

impl RefinementHierarchy {
    /// Seed mesh plus `refinements` levels of refinement.
    pub fn build(seed: Mesh2D, curve: &BoundaryCurve, refinements: usize) -> Result<Self> {
        let mut levels = vec![seed];
        let mut vertex_injection = Vec::with_capacity(refinements);
        for _ in 0..refinements {
            let fine = refine(levels.last().expect("non-empty"), curve)?;
            vertex_injection.push((0..levels.last().expect("non-empty").n_vertices()).collect());
            levels.push(fine);
        }
        Ok(Self {
            levels,
            vertex_injection,
        })
    }

    /// `seed_disc_mesh(n)` refined up to and including `max_level`.
    pub fn disc(n: usize, max_level: usize) -> Result<Self> {
        Self::build(seed_disc_mesh(n)?, &BoundaryCurve::unit_circle(), max_level)
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> Option<&Mesh2D> {
        self.levels.get(l)
    }

    pub fn levels(&self) -> &[Mesh2D] {
        &self.levels
    }

    /// Map from vertices of level `l` to the identical vertices of `l + 1`.
    pub fn injection(&self, l: usize) -> Option<&[usize]> {
        self.vertex_injection.get(l).map(Vec::as_slice)
    }

    /// Composite injection from `coarse` into `fine`.
    pub fn injection_between(&self, coarse: usize, fine: usize) -> Result<Vec<usize>> {
        if coarse > fine || fine >= self.levels.len() {
            return Err(Error::HierarchyMismatch(format!(
                "cannot inject level {coarse} into level {fine} of {}",
                self.levels.len()
            )));
        }
        let mut map: Vec<usize> = (0..self.levels[coarse].n_vertices()).collect();
        for l in coarse..fine {
            let step = &self.vertex_injection[l];
            for m in &mut map {
                *m = step[*m];
            }
        }
        Ok(map)
    }
}
