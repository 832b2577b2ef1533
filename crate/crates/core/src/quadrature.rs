//! Quadrature rules on the reference triangle (barycentric points, weights
//! summing to one) and on the unit interval.

#![allow(clippy::excessive_precision)]

/// Edge-midpoint rule, exact for quadratics.
pub const TRIANGLE_DEGREE2: [([f64; 3], f64); 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

const D4_A1: f64 = 0.445_948_490_915_964_886_3;
const D4_A2: f64 = 0.091_576_213_509_770_743_46;
const D4_W1: f64 = 0.223_381_589_678_011_465_7;
const D4_W2: f64 = 0.109_951_743_655_321_867_6;

/// Six-point rule exact for polynomials of degree four.
pub const TRIANGLE_DEGREE4: [([f64; 3], f64); 6] = [
    ([D4_A1, D4_A1, 1.0 - 2.0 * D4_A1], D4_W1),
    ([D4_A1, 1.0 - 2.0 * D4_A1, D4_A1], D4_W1),
    ([1.0 - 2.0 * D4_A1, D4_A1, D4_A1], D4_W1),
    ([D4_A2, D4_A2, 1.0 - 2.0 * D4_A2], D4_W2),
    ([D4_A2, 1.0 - 2.0 * D4_A2, D4_A2], D4_W2),
    ([1.0 - 2.0 * D4_A2, D4_A2, D4_A2], D4_W2),
];

/// Two-point Gauss rule on `[0, 1]`, exact for cubics.
pub fn gauss2() -> [(f64, f64); 2] {
    let d = 0.5 / 3f64.sqrt();
    [(0.5 - d, 0.5), (0.5 + d, 0.5)]
}

/// Four-point Gauss rule on `[0, 1]`, exact for degree seven.
pub fn gauss4() -> [(f64, f64); 4] {
    let r = (6.0f64 / 5.0).sqrt();
    let x1 = ((3.0 - 2.0 * r) / 7.0).sqrt();
    let x2 = ((3.0 + 2.0 * r) / 7.0).sqrt();
    let w1 = (18.0 + 30f64.sqrt()) / 36.0;
    let w2 = (18.0 - 30f64.sqrt()) / 36.0;
    [
        (0.5 * (1.0 - x2), 0.5 * w2),
        (0.5 * (1.0 - x1), 0.5 * w1),
        (0.5 * (1.0 + x1), 0.5 * w1),
        (0.5 * (1.0 + x2), 0.5 * w2),
    ]
}
