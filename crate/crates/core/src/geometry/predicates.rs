//! Exact orientation and in-sphere predicates.
//!
//! Thin wrappers over Shewchuk's adaptive-precision predicates with the sign
//! conventions used by the triangulation: `orient*` is positive for a
//! right-handed (counter-clockwise in 2D) vertex order, and `in_sphere*` is
//! positive when the query lies strictly inside the circumscribing
//! circle/sphere regardless of vertex order.

use robust::{Coord, Coord3D};

#[inline]
fn c2(p: &[f64; 3]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

#[inline]
fn c3(p: &[f64; 3]) -> Coord3D<f64> {
    Coord3D {
        x: p[0],
        y: p[1],
        z: p[2],
    }
}

/// Sign of `det[b - a, c - a]`.
#[inline]
pub(crate) fn orient2(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    robust::orient2d(c2(a), c2(b), c2(c))
}

/// Sign of `det[b - a, c - a, d - a]`.
#[inline]
pub(crate) fn orient3(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3], d: &[f64; 3]) -> f64 {
    -robust::orient3d(c3(a), c3(b), c3(c), c3(d))
}

#[inline]
pub(crate) fn in_circle(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3], q: &[f64; 3]) -> f64 {
    let o = robust::orient2d(c2(a), c2(b), c2(c));
    robust::incircle(c2(a), c2(b), c2(c), c2(q)) * o.signum()
}

#[inline]
pub(crate) fn in_sphere(
    a: &[f64; 3],
    b: &[f64; 3],
    c: &[f64; 3],
    d: &[f64; 3],
    q: &[f64; 3],
) -> f64 {
    let o = robust::orient3d(c3(a), c3(b), c3(c), c3(d));
    robust::insphere(c3(a), c3(b), c3(c), c3(d), c3(q)) * o.signum()
}

/// Orientation of `dim + 1` points.
#[inline]
pub(crate) fn orient(dim: usize, p: &[[f64; 3]]) -> f64 {
    if dim == 2 {
        orient2(&p[0], &p[1], &p[2])
    } else {
        orient3(&p[0], &p[1], &p[2], &p[3])
    }
}

#[inline]
pub(crate) fn in_ball(dim: usize, p: &[[f64; 3]], q: &[f64; 3]) -> f64 {
    if dim == 2 {
        in_circle(&p[0], &p[1], &p[2], q)
    } else {
        in_sphere(&p[0], &p[1], &p[2], &p[3], q)
    }
}
