//! Smooth boundary curves, the closest-point projection onto them, and the
//! element-wise curved map that carries a straight boundary triangle onto its
//! curved counterpart in the exact domain.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// 2x2 matrix stored row-major.
pub type Mat2 = [[f64; 2]; 2];

pub type CurveFn = Arc<dyn Fn(f64) -> Point + Send + Sync>;

/// Points closer to the circle center than this are rejected by the circle
/// projection.
pub const CIRCLE_PROJECTION_MIN_RADIUS: f64 = 0.1;

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub(crate) fn scale(s: f64, a: Point) -> Point {
    [s * a[0], s * a[1]]
}

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub(crate) fn mat_vec(m: &Mat2, v: Point) -> Point {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

#[inline]
pub(crate) fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Signed area of the triangle `(a, b, c)`; positive when counter-clockwise.
#[inline]
pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * cross(sub(b, a), sub(c, a))
}

/// A closed, smooth, non-self-intersecting curve given by a `2π`-periodic
/// parametrization. The second derivative is needed to differentiate the
/// closest-point map.
#[derive(Clone)]
pub struct ParametricCurve {
    point: CurveFn,
    derivative: CurveFn,
    second_derivative: CurveFn,
    samples: usize,
}

impl ParametricCurve {
    pub fn new(point: CurveFn, derivative: CurveFn, second_derivative: CurveFn) -> Self {
        Self {
            point,
            derivative,
            second_derivative,
            samples: 720,
        }
    }

    /// Number of parameter samples used to seed the closest-point search.
    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples.max(16);
        self
    }
}

#[derive(Clone)]
pub enum BoundaryCurve {
    UnitCircle,
    Parametric(ParametricCurve),
}

impl fmt::Debug for BoundaryCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCurve::UnitCircle => f.write_str("UnitCircle"),
            BoundaryCurve::Parametric(c) => f
                .debug_struct("Parametric")
                .field("samples", &c.samples)
                .finish_non_exhaustive(),
        }
    }
}

impl BoundaryCurve {
    pub fn unit_circle() -> Self {
        BoundaryCurve::UnitCircle
    }

    /// Axis-aligned ellipse with semi-axes `a` and `b`, centered at the origin.
    pub fn ellipse(a: f64, b: f64) -> Self {
        BoundaryCurve::Parametric(ParametricCurve::new(
            Arc::new(move |t: f64| [a * t.cos(), b * t.sin()]),
            Arc::new(move |t: f64| [-a * t.sin(), b * t.cos()]),
            Arc::new(move |t: f64| [-a * t.cos(), -b * t.sin()]),
        ))
    }

    pub fn point(&self, theta: f64) -> Point {
        match self {
            BoundaryCurve::UnitCircle => [theta.cos(), theta.sin()],
            BoundaryCurve::Parametric(c) => (c.point)(theta),
        }
    }

    pub fn derivative(&self, theta: f64) -> Point {
        match self {
            BoundaryCurve::UnitCircle => [-theta.sin(), theta.cos()],
            BoundaryCurve::Parametric(c) => (c.derivative)(theta),
        }
    }

    fn second_derivative(&self, theta: f64) -> Point {
        match self {
            BoundaryCurve::UnitCircle => [-theta.cos(), -theta.sin()],
            BoundaryCurve::Parametric(c) => (c.second_derivative)(theta),
        }
    }

    /// Closest point on the curve and its parameter in `[0, 2π)`.
    pub fn closest_point(&self, x: Point) -> Result<(Point, f64)> {
        match self {
            BoundaryCurve::UnitCircle => {
                let r = norm(x);
                if r < CIRCLE_PROJECTION_MIN_RADIUS {
                    return Err(Error::AmbiguousProjection(x[0], x[1]));
                }
                let theta = x[1].atan2(x[0]).rem_euclid(TAU);
                Ok(([x[0] / r, x[1] / r], theta))
            }
            BoundaryCurve::Parametric(c) => parametric_closest_point(self, c.samples, x),
        }
    }

    /// Distance from `x` to the curve.
    pub fn distance(&self, x: Point) -> Result<f64> {
        if let BoundaryCurve::UnitCircle = self {
            return Ok((norm(x) - 1.0).abs());
        }
        let (p, _) = self.closest_point(x)?;
        Ok(norm(sub(x, p)))
    }

    /// Closest point together with the derivative of the closest-point map.
    pub fn project_with_derivative(&self, x: Point) -> Result<(Point, Mat2)> {
        let (p, theta) = self.closest_point(x)?;
        let d1 = self.derivative(theta);
        let d2 = self.second_derivative(theta);
        // Implicit differentiation of (γ(θ) - x)·γ'(θ) = 0.
        let denom = dot(d1, d1) + dot(sub(p, x), d2);
        if denom.abs() < 1e-300 {
            return Err(Error::AmbiguousProjection(x[0], x[1]));
        }
        let jac = [
            [d1[0] * d1[0] / denom, d1[0] * d1[1] / denom],
            [d1[1] * d1[0] / denom, d1[1] * d1[1] / denom],
        ];
        Ok((p, jac))
    }
}

fn parametric_closest_point(curve: &BoundaryCurve, samples: usize, x: Point) -> Result<(Point, f64)> {
    let dist2 = |t: f64| {
        let d = sub(curve.point(t), x);
        dot(d, d)
    };
    let step = TAU / samples as f64;
    let values: Vec<f64> = (0..samples).map(|k| dist2(k as f64 * step)).collect();

    let mut candidates: Vec<(f64, f64)> = Vec::new();
    for k in 0..samples {
        let prev = values[(k + samples - 1) % samples];
        let next = values[(k + 1) % samples];
        if values[k] <= prev && values[k] <= next {
            let theta = refine_parameter(curve, x, k as f64 * step, step);
            candidates.push((dist2(theta), theta));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (best_d2, best_theta) = *candidates
        .first()
        .ok_or(Error::AmbiguousProjection(x[0], x[1]))?;

    for &(d2, theta) in candidates.iter().skip(1) {
        let separation = (theta - best_theta).rem_euclid(TAU);
        let separation = separation.min(TAU - separation);
        if separation > 2.0 * step && (d2 - best_d2).abs() <= 1e-10 * best_d2.max(1e-30) {
            return Err(Error::AmbiguousProjection(x[0], x[1]));
        }
    }
    let theta = best_theta.rem_euclid(TAU);
    Ok((curve.point(theta), theta))
}

/// Newton iteration on `g(θ) = (γ(θ) - x)·γ'(θ)`, safeguarded by bisection in
/// `[θ0 - h, θ0 + h]`.
fn refine_parameter(curve: &BoundaryCurve, x: Point, theta0: f64, h: f64) -> f64 {
    let g = |t: f64| dot(sub(curve.point(t), x), curve.derivative(t));
    let (mut lo, mut hi) = (theta0 - h, theta0 + h);
    let (glo, ghi) = (g(lo), g(hi));
    let bracketed = glo <= 0.0 && ghi >= 0.0;
    let mut t = theta0;
    for _ in 0..60 {
        let gt = g(t);
        if gt == 0.0 {
            break;
        }
        if bracketed {
            if gt < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
        }
        let d1 = curve.derivative(t);
        let dg = dot(d1, d1) + dot(sub(curve.point(t), x), curve.second_derivative(t));
        let mut next = if dg > 0.0 { t - gt / dg } else { f64::NAN };
        if bracketed && !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        } else if !next.is_finite() {
            break;
        }
        if (next - t).abs() <= 1e-15 * (1.0 + t.abs()) {
            t = next;
            break;
        }
        t = next;
    }
    t
}

/// Closest point on `curve` to `x`.
pub fn project_to_boundary(x: Point, curve: &BoundaryCurve) -> Result<Point> {
    curve.closest_point(x).map(|(p, _)| p)
}

/// Evaluation of a [`CurvedTriangleMap`] at one barycentric point.
#[derive(Clone, Copy, Debug)]
pub struct MapEval {
    pub point: Point,
    /// Derivative with respect to the reference coordinates `(λ₁, λ₂)`,
    /// row-major, i.e. the Jacobian of `G_h ∘ F_E`.
    pub jacobian: Mat2,
    pub jacobian_det: f64,
}

/// Curved map of a triangle with one interior vertex `a₀` and one boundary
/// edge `a₁a₂` (both endpoints on the curve):
///
/// `G(λ) = λ₀ a₀ + (λ₁ + λ₂) P((λ₁ a₁ + λ₂ a₂) / (λ₁ + λ₂))`
///
/// with `P` the closest-point projection. It fixes the vertices, is the
/// identity on both interior edges and maps the straight edge onto the arc.
#[derive(Clone, Copy, Debug)]
pub struct CurvedTriangleMap<'c> {
    interior: Point,
    boundary: [Point; 2],
    curve: &'c BoundaryCurve,
    area: f64,
}

impl<'c> CurvedTriangleMap<'c> {
    /// `interior, boundary[0], boundary[1]` must be counter-clockwise.
    pub fn new(interior: Point, boundary: [Point; 2], curve: &'c BoundaryCurve) -> Result<Self> {
        let area = signed_area(interior, boundary[0], boundary[1]);
        if area <= 0.0 {
            return Err(Error::DegenerateElement { element: usize::MAX, area });
        }
        Ok(Self {
            interior,
            boundary,
            curve,
            area,
        })
    }

    /// Area of the straight triangle.
    pub fn straight_area(&self) -> f64 {
        self.area
    }

    /// Affine map of the straight triangle.
    pub fn affine(&self, lambda: [f64; 3]) -> Point {
        let [a0, a1, a2] = [self.interior, self.boundary[0], self.boundary[1]];
        [
            lambda[0] * a0[0] + lambda[1] * a1[0] + lambda[2] * a2[0],
            lambda[0] * a0[1] + lambda[1] * a1[1] + lambda[2] * a2[1],
        ]
    }

    pub fn eval(&self, lambda: [f64; 3]) -> Result<MapEval> {
        let [a0, a1, a2] = [self.interior, self.boundary[0], self.boundary[1]];
        let s = lambda[1] + lambda[2];

        // Edge endpoints already lie on the curve; using them directly keeps
        // the map exactly the identity on the interior edges.
        let (y, projected, dp) = if lambda[2] == 0.0 && lambda[1] > 0.0 {
            let (_, dp) = self.curve.project_with_derivative(a1)?;
            (a1, a1, dp)
        } else if lambda[1] == 0.0 && lambda[2] > 0.0 {
            let (_, dp) = self.curve.project_with_derivative(a2)?;
            (a2, a2, dp)
        } else {
            // At the interior vertex the edge point is undefined; the limit
            // along the median is used for the derivative.
            let y = if s > 0.0 {
                [
                    (lambda[1] * a1[0] + lambda[2] * a2[0]) / s,
                    (lambda[1] * a1[1] + lambda[2] * a2[1]) / s,
                ]
            } else {
                scale(0.5, add(a1, a2))
            };
            let (p, dp) = self.curve.project_with_derivative(y)?;
            (y, p, dp)
        };

        let point = [
            lambda[0] * a0[0] + s * projected[0],
            lambda[0] * a0[1] + s * projected[1],
        ];
        // dG/dλ₁ = P(y) - a₀ + DP(y)(a₁ - y), and likewise for λ₂.
        let base = sub(projected, a0);
        let col1 = add(base, mat_vec(&dp, sub(a1, y)));
        let col2 = add(base, mat_vec(&dp, sub(a2, y)));
        let jacobian = [[col1[0], col2[0]], [col1[1], col2[1]]];
        Ok(MapEval {
            point,
            jacobian,
            jacobian_det: det2(&jacobian),
        })
    }

    /// Determinant of `DG_h` in physical coordinates (the reference-coordinate
    /// determinant divided by that of the affine map).
    pub fn physical_jacobian_det(&self, lambda: [f64; 3]) -> Result<f64> {
        Ok(self.eval(lambda)?.jacobian_det / (2.0 * self.area))
    }
}

/// Unit outward normal of the straight boundary edge `a`-`b`, oriented away
/// from the centroid of the triangle that owns the edge.
pub fn outward_normal(a: Point, b: Point, centroid: Point) -> Result<Point> {
    let t = sub(b, a);
    let len = norm(t);
    if len == 0.0 || !len.is_finite() {
        return Err(Error::ZeroLengthEdge);
    }
    let mut n = [t[1] / len, -t[0] / len];
    let mid = scale(0.5, add(a, b));
    if dot(n, sub(mid, centroid)) < 0.0 {
        n = [-n[0], -n[1]];
    }
    Ok(n)
}
