//! Measures of single triangles and tetrahedra.

use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Volumes (areas in 2D) below this are treated as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

/// A triangle (2D) or tetrahedron (3D) given by indices into a point list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Simplex {
    verts: [usize; 4],
    len: u8,
    /// Radius of the circumscribing circle/sphere.
    pub circumradius: f64,
    /// Unsigned area (2D) or volume (3D).
    pub volume: f64,
}

impl Simplex {
    pub(crate) fn new(vertices: &[usize], circumradius: f64, volume: f64) -> Self {
        let mut verts = [usize::MAX; 4];
        verts[..vertices.len()].copy_from_slice(vertices);
        Simplex {
            verts,
            len: vertices.len() as u8,
            circumradius,
            volume,
        }
    }

    pub fn vertices(&self) -> &[usize] {
        &self.verts[..self.len as usize]
    }
}

#[inline]
fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Signed area/volume of the simplex with the given vertices.
pub(crate) fn signed_volume(dim: usize, v: &[[f64; 3]]) -> f64 {
    if dim == 2 {
        let e1 = sub(&v[1], &v[0]);
        let e2 = sub(&v[2], &v[0]);
        0.5 * (e1[0] * e2[1] - e1[1] * e2[0])
    } else {
        let e1 = sub(&v[1], &v[0]);
        let e2 = sub(&v[2], &v[0]);
        let e3 = sub(&v[3], &v[0]);
        dot(&e1, &cross(&e2, &e3)) / 6.0
    }
}

/// Circumcenter of a non-degenerate simplex.
pub(crate) fn circumcenter_raw(dim: usize, v: &[[f64; 3]]) -> [f64; 3] {
    let a = v[0];
    if dim == 2 {
        let b = sub(&v[1], &a);
        let c = sub(&v[2], &a);
        let d = 2.0 * (b[0] * c[1] - b[1] * c[0]);
        let bb = b[0] * b[0] + b[1] * b[1];
        let cc = c[0] * c[0] + c[1] * c[1];
        let ux = (c[1] * bb - b[1] * cc) / d;
        let uy = (b[0] * cc - c[0] * bb) / d;
        [a[0] + ux, a[1] + uy, 0.0]
    } else {
        let b = sub(&v[1], &a);
        let c = sub(&v[2], &a);
        let d = sub(&v[3], &a);
        let denom = 2.0 * dot(&b, &cross(&c, &d));
        let cd = cross(&c, &d);
        let db = cross(&d, &b);
        let bc = cross(&b, &c);
        let (bb, cc, dd) = (dot(&b, &b), dot(&c, &c), dot(&d, &d));
        let mut u = [0.0; 3];
        for k in 0..3 {
            u[k] = (bb * cd[k] + cc * db[k] + dd * bc[k]) / denom;
        }
        [a[0] + u[0], a[1] + u[1], a[2] + u[2]]
    }
}

fn to_coords(vertices: &[&[f64]]) -> Result<(usize, Vec<[f64; 3]>), GeometryError> {
    let dim = vertices.first().map_or(0, |v| v.len());
    if !(dim == 2 || dim == 3) {
        return Err(GeometryError::UnsupportedDimension(dim));
    }
    if vertices.iter().any(|v| v.len() != dim) {
        return Err(GeometryError::DimensionMismatch);
    }
    if vertices.len() != dim + 1 {
        return Err(GeometryError::DegenerateSimplex);
    }
    let coords = vertices
        .iter()
        .map(|v| {
            let mut c = [0.0; 3];
            c[..dim].copy_from_slice(v);
            c
        })
        .collect();
    Ok((dim, coords))
}

/// Circumcenter and circumradius of a triangle or tetrahedron.
pub fn circumsphere(vertices: &[&[f64]]) -> Result<(Vec<f64>, f64), GeometryError> {
    let (dim, v) = to_coords(vertices)?;
    if signed_volume(dim, &v).abs() < DEGENERACY_TOLERANCE {
        return Err(GeometryError::DegenerateSimplex);
    }
    let center = circumcenter_raw(dim, &v);
    let r = dot(&sub(&center, &v[0]), &sub(&center, &v[0])).sqrt();
    Ok((center[..dim].to_vec(), r))
}

/// Radius of the circle/sphere through all vertices.
pub fn circumradius(vertices: &[&[f64]]) -> Result<f64, GeometryError> {
    circumsphere(vertices).map(|(_, r)| r)
}

/// Unsigned area/volume; zero for degenerate input.
pub fn simplex_volume(vertices: &[&[f64]]) -> Result<f64, GeometryError> {
    let (dim, v) = to_coords(vertices)?;
    Ok(signed_volume(dim, &v).abs())
}

/// Affine map from a point to barycentric coordinates of one simplex.
///
/// `lambda[1..=d] = inv * (q - origin)` and `lambda[0] = 1 - sum`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BarycentricMap {
    origin: [f64; 3],
    inv: [[f64; 3]; 3],
}

impl BarycentricMap {
    pub(crate) fn new(dim: usize, v: &[[f64; 3]]) -> Option<Self> {
        let origin = v[0];
        let mut inv = [[0.0; 3]; 3];
        if dim == 2 {
            let e1 = sub(&v[1], &origin);
            let e2 = sub(&v[2], &origin);
            let det = e1[0] * e2[1] - e2[0] * e1[1];
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            inv[0][0] = e2[1] / det;
            inv[0][1] = -e2[0] / det;
            inv[1][0] = -e1[1] / det;
            inv[1][1] = e1[0] / det;
        } else {
            let e1 = sub(&v[1], &origin);
            let e2 = sub(&v[2], &origin);
            let e3 = sub(&v[3], &origin);
            // columns e1, e2, e3; inverse rows are the reciprocal basis
            let c23 = cross(&e2, &e3);
            let c31 = cross(&e3, &e1);
            let c12 = cross(&e1, &e2);
            let det = dot(&e1, &c23);
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            for k in 0..3 {
                inv[0][k] = c23[k] / det;
                inv[1][k] = c31[k] / det;
                inv[2][k] = c12[k] / det;
            }
        }
        Some(BarycentricMap { origin, inv })
    }

    /// All `dim + 1` barycentric coordinates of `q`.
    pub(crate) fn coordinates(&self, dim: usize, q: &[f64; 3]) -> [f64; 4] {
        let d = sub(q, &self.origin);
        let mut out = [0.0; 4];
        let mut sum = 0.0;
        for (k, row) in self.inv.iter().take(dim).enumerate() {
            let l = dot(row, &d);
            out[k + 1] = l;
            sum += l;
        }
        out[0] = 1.0 - sum;
        out
    }

    /// Smallest barycentric coordinate of `q`.
    #[inline]
    pub(crate) fn min_coordinate(&self, dim: usize, q: &[f64; 3]) -> f64 {
        let d = sub(q, &self.origin);
        let mut sum = 0.0;
        let mut min = f64::INFINITY;
        for row in self.inv.iter().take(dim) {
            let l = dot(row, &d);
            sum += l;
            min = min.min(l);
        }
        min.min(1.0 - sum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn right_triangle_circumradius_is_half_hypotenuse() {
        let r = circumradius(&[&[0.0, 0.0], &[3.0, 0.0], &[0.0, 4.0]]).unwrap();
        assert_relative_eq!(r, 2.5, max_relative = 1e-12);
    }

    #[test]
    fn unit_corner_tetrahedron() {
        let v: [&[f64]; 4] = [
            &[0.0, 0.0, 0.0],
            &[1.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0],
            &[0.0, 0.0, 1.0],
        ];
        let (c, r) = circumsphere(&v).unwrap();
        assert_relative_eq!(r, 3f64.sqrt() / 2.0, max_relative = 1e-12);
        for x in c {
            assert_relative_eq!(x, 0.5, max_relative = 1e-12);
        }
        assert_relative_eq!(simplex_volume(&v).unwrap(), 1.0 / 6.0, max_relative = 1e-12);
    }

    #[test]
    fn collinear_triangle_is_degenerate() {
        let err = circumradius(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0]]).unwrap_err();
        assert!(matches!(err, GeometryError::DegenerateSimplex));
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let err = circumradius(&[&[0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, GeometryError::DimensionMismatch));
    }

    #[test]
    fn centroid_has_equal_barycentric_coordinates() {
        let v = [
            [0.0, 0.0, 0.0],
            [2.0, 0.0, 0.0],
            [0.0, 3.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let map = BarycentricMap::new(3, &v).unwrap();
        let g = [0.5, 0.75, 0.25];
        assert_relative_eq!(map.min_coordinate(3, &g), 0.25, max_relative = 1e-12);
        assert!(map.min_coordinate(3, &[2.0, 2.0, 2.0]) < 0.0);
    }

    proptest::proptest! {
        #[test]
        fn circumcenter_is_equidistant(
            pts in proptest::collection::vec(-10.0f64..10.0, 12)
        ) {
            let v: Vec<&[f64]> = pts.chunks(3).collect();
            if let Ok((c, r)) = circumsphere(&v) {
                for p in &v {
                    let d: f64 = p.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    proptest::prop_assert!((d - r).abs() <= 1e-9 * r.max(1.0));
                }
            }
        }
    }
}
