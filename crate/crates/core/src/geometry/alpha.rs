//! Alpha shapes: Delaunay simplices filtered by circumradius.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::delaunay::{facet_incidence, pad_points, triangulate, Triangulation};
use super::simplex::{circumcenter_raw, signed_volume, BarycentricMap, Simplex};
use super::GeometryError;

/// Barycentric slack under which a query still counts as inside.
pub const CONTAINMENT_TOLERANCE: f64 = 1e-9;

/// Per-axis affine map between physical bounds and the unit box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Normalization {
    pub fn identity(dim: usize) -> Self {
        Normalization {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn widths(&self) -> Vec<f64> {
        self.upper
            .iter()
            .zip(&self.lower)
            .map(|(u, l)| u - l)
            .collect()
    }

    /// Product of bound widths: converts normalized measures to physical units.
    pub fn volume_scale(&self) -> f64 {
        self.widths().iter().product()
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| (v - l) / (u - l))
            .collect()
    }

    pub fn denormalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| l + v * (u - l))
            .collect()
    }
}

/// Facet of a retained simplex (an edge in 2D, a triangle in 3D).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Facet {
    verts: [usize; 3],
    len: u8,
}

impl Facet {
    pub fn vertices(&self) -> &[usize] {
        &self.verts[..self.len as usize]
    }
}

/// The retained part of a Delaunay triangulation at a given alpha radius,
/// with its boundary, connected regions and a point-location index.
#[derive(Debug, Clone)]
pub struct AlphaShape {
    dim: usize,
    points: Vec<[f64; 3]>,
    simplices: Vec<Simplex>,
    alpha_radius: f64,
    boundary_facets: Vec<Facet>,
    region_labels: Vec<usize>,
    n_regions: usize,
    normalization: Normalization,
    locator: Locator,
}

impl AlphaShape {
    pub(crate) fn from_parts(
        dim: usize,
        points: Vec<[f64; 3]>,
        simplices: Vec<Simplex>,
        alpha_radius: f64,
    ) -> Self {
        let incidence = facet_incidence(&simplices);
        let mut boundary_facets: Vec<Facet> = incidence
            .iter()
            .filter(|(_, s)| s.len() == 1)
            .map(|(k, _)| Facet {
                verts: *k,
                len: dim as u8,
            })
            .collect();
        boundary_facets.sort_unstable();

        // BFS over shared-facet adjacency
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); simplices.len()];
        for owners in incidence.values() {
            if owners.len() >= 2 {
                for &a in owners {
                    for &b in owners {
                        if a != b {
                            adjacency[a].push(b);
                        }
                    }
                }
            }
        }
        let mut region_labels = vec![usize::MAX; simplices.len()];
        let mut n_regions = 0;
        let mut queue = VecDeque::new();
        for seed in 0..simplices.len() {
            if region_labels[seed] != usize::MAX {
                continue;
            }
            region_labels[seed] = n_regions;
            queue.push_back(seed);
            while let Some(s) = queue.pop_front() {
                for &t in &adjacency[s] {
                    if region_labels[t] == usize::MAX {
                        region_labels[t] = n_regions;
                        queue.push_back(t);
                    }
                }
            }
            n_regions += 1;
        }

        let locator = Locator::build(dim, &points, &simplices);
        AlphaShape {
            dim,
            points,
            simplices,
            alpha_radius,
            boundary_facets,
            region_labels,
            n_regions,
            normalization: Normalization::identity(dim),
            locator,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn alpha_radius(&self) -> f64 {
        self.alpha_radius
    }

    pub fn boundary_facets(&self) -> &[Facet] {
        &self.boundary_facets
    }

    pub fn region_labels(&self) -> &[usize] {
        &self.region_labels
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    /// Number of connected components under shared-facet adjacency.
    pub fn count_regions(&self) -> Result<usize, GeometryError> {
        if self.is_empty() {
            return Err(GeometryError::EmptyShape);
        }
        Ok(self.n_regions)
    }

    /// Number of regions, zero for an empty shape.
    pub fn n_regions(&self) -> usize {
        self.n_regions
    }

    /// Total area (2D) or volume (3D) of the retained simplices.
    pub fn measure(&self) -> f64 {
        self.simplices.iter().map(|s| s.volume).sum()
    }

    /// Measure of each region, indexed by region label.
    pub fn region_measures(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_regions];
        for (s, &r) in self.simplices.iter().zip(&self.region_labels) {
            m[r] += s.volume;
        }
        m
    }

    /// Index of a retained simplex containing `q` (boundary included).
    pub fn locate(&self, q: &[f64]) -> Option<usize> {
        if q.len() != self.dim || self.is_empty() {
            return None;
        }
        let mut p = [0.0; 3];
        p[..self.dim].copy_from_slice(q);
        self.locator.locate(self.dim, &p)
    }

    /// Containing simplex and the barycentric weights of `q` with respect to
    /// its vertices (in [`Simplex::vertices`] order).
    pub fn barycentric(&self, q: &[f64]) -> Option<(usize, Vec<f64>)> {
        let s = self.locate(q)?;
        let mut p = [0.0; 3];
        p[..self.dim].copy_from_slice(q);
        let w = self.locator.maps[s].coordinates(self.dim, &p);
        Some((s, w[..=self.dim].to_vec()))
    }

    /// Whether `q` lies in some retained simplex (boundary counts as inside).
    pub fn contains(&self, q: &[f64]) -> bool {
        self.locate(q).is_some()
    }

    /// Axis-aligned bounding box of the retained simplices.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.is_empty() {
            return None;
        }
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for s in &self.simplices {
            for &v in s.vertices() {
                for k in 0..self.dim {
                    lo[k] = lo[k].min(self.points[v][k]);
                    hi[k] = hi[k].max(self.points[v][k]);
                }
            }
        }
        Some((lo, hi))
    }

    pub fn to_document(&self) -> ShapeDocument {
        ShapeDocument {
            dim: self.dim,
            points: self.points.iter().map(|p| p[..self.dim].to_vec()).collect(),
            simplices: self
                .simplices
                .iter()
                .map(|s| s.vertices().to_vec())
                .collect(),
            boundary_facets: self
                .boundary_facets
                .iter()
                .map(|f| f.vertices().to_vec())
                .collect(),
            alpha_radius: self.alpha_radius.is_finite().then_some(self.alpha_radius),
            region_labels: self.region_labels.clone(),
            n_regions: self.n_regions,
            normalization: self.normalization.clone(),
        }
    }

    /// Rebuilds a shape from its exported form; boundary and regions are
    /// recomputed from the simplices.
    pub fn from_document(doc: &ShapeDocument) -> Result<Self, GeometryError> {
        let (dim, points) = if doc.points.is_empty() {
            (doc.dim, Vec::new())
        } else {
            pad_points(&doc.points)?
        };
        if dim != doc.dim {
            return Err(GeometryError::DimensionMismatch);
        }
        let mut simplices = Vec::with_capacity(doc.simplices.len());
        for idx in &doc.simplices {
            if idx.len() != dim + 1 || idx.iter().any(|&i| i >= points.len()) {
                return Err(GeometryError::InvalidDocument(format!(
                    "bad simplex {idx:?}"
                )));
            }
            let coords: Vec<[f64; 3]> = idx.iter().map(|&i| points[i]).collect();
            let vol = signed_volume(dim, &coords).abs();
            let c = circumcenter_raw(dim, &coords);
            let r = (0..dim)
                .map(|k| (c[k] - coords[0][k]).powi(2))
                .sum::<f64>()
                .sqrt();
            simplices.push(Simplex::new(idx, r, vol));
        }
        let alpha = doc.alpha_radius.unwrap_or(f64::INFINITY);
        Ok(Self::from_parts(dim, points, simplices, alpha)
            .with_normalization(doc.normalization.clone()))
    }
}

/// Serialized alpha shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeDocument {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub simplices: Vec<Vec<usize>>,
    pub boundary_facets: Vec<Vec<usize>>,
    /// `null` encodes an infinite radius (convex hull).
    pub alpha_radius: Option<f64>,
    pub region_labels: Vec<usize>,
    pub n_regions: usize,
    pub normalization: Normalization,
}

impl Triangulation {
    /// Keeps the simplices with circumradius <= `alpha_radius`. May be empty.
    pub fn filter(&self, alpha_radius: f64) -> AlphaShape {
        let kept: Vec<Simplex> = self
            .simplices()
            .iter()
            .filter(|s| s.circumradius <= alpha_radius)
            .copied()
            .collect();
        AlphaShape::from_parts(self.dim(), self.points().to_vec(), kept, alpha_radius)
    }
}

/// Alpha shape of `points`; `EmptyShape` when no simplex survives.
pub fn alpha_shape<P: AsRef<[f64]>>(
    points: &[P],
    alpha_radius: f64,
) -> Result<AlphaShape, GeometryError> {
    if !(alpha_radius > 0.0) {
        return Err(GeometryError::InvalidAlpha(alpha_radius));
    }
    let (dim, pts) = pad_points(points)?;
    let shape = triangulate(dim, pts)?.filter(alpha_radius);
    if shape.is_empty() {
        return Err(GeometryError::EmptyShape);
    }
    Ok(shape)
}

/// Convex hull, i.e. the alpha shape at infinite radius.
pub fn convex_hull<P: AsRef<[f64]>>(points: &[P]) -> Result<AlphaShape, GeometryError> {
    alpha_shape(points, f64::INFINITY)
}

/// Uniform grid over simplex bounding boxes.
#[derive(Debug, Clone)]
struct Locator {
    lo: [f64; 3],
    cell: [f64; 3],
    res: [usize; 3],
    start: Vec<u32>,
    items: Vec<u32>,
    maps: Vec<BarycentricMap>,
}

impl Locator {
    fn build(dim: usize, points: &[[f64; 3]], simplices: &[Simplex]) -> Self {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        let mut maps = Vec::with_capacity(simplices.len());
        if !simplices.is_empty() {
            lo = [f64::INFINITY; 3];
            hi = [f64::NEG_INFINITY; 3];
        }
        for s in simplices {
            let coords: Vec<[f64; 3]> = s.vertices().iter().map(|&v| points[v]).collect();
            for c in &coords {
                for k in 0..dim {
                    lo[k] = lo[k].min(c[k]);
                    hi[k] = hi[k].max(c[k]);
                }
            }
            // volume filtering upstream guarantees invertibility
            maps.push(BarycentricMap::new(dim, &coords).expect("degenerate simplex in shape"));
        }
        let per_axis = ((simplices.len().max(1) as f64)
            .powf(1.0 / dim as f64)
            .ceil() as usize)
            .clamp(1, 128);
        let mut res = [1usize; 3];
        let mut cell = [1.0; 3];
        for k in 0..dim {
            res[k] = per_axis;
            let w = (hi[k] - lo[k]).max(1e-300);
            cell[k] = w / per_axis as f64;
        }
        let n_cells = res.iter().product::<usize>();
        let pad = 1e-9;
        let range = |s: &Simplex, k: usize| -> (usize, usize) {
            let mut a = f64::INFINITY;
            let mut b = f64::NEG_INFINITY;
            for &v in s.vertices() {
                a = a.min(points[v][k]);
                b = b.max(points[v][k]);
            }
            let span = (hi[k] - lo[k]).max(1e-300);
            let ia = (((a - lo[k]) / cell[k]) - pad * span / cell[k])
                .floor()
                .max(0.0) as usize;
            let ib = (((b - lo[k]) / cell[k]) + pad * span / cell[k])
                .floor()
                .max(0.0) as usize;
            (ia.min(res[k] - 1), ib.min(res[k] - 1))
        };
        let mut counts = vec![0u32; n_cells + 1];
        let mut ranges = Vec::with_capacity(simplices.len());
        for s in simplices {
            let mut r = [(0usize, 0usize); 3];
            for (k, rk) in r.iter_mut().enumerate().take(dim) {
                *rk = range(s, k);
            }
            for x in r[0].0..=r[0].1 {
                for y in r[1].0..=r[1].1 {
                    for z in r[2].0..=r[2].1 {
                        counts[(x * res[1] + y) * res[2] + z] += 1;
                    }
                }
            }
            ranges.push(r);
        }
        let mut start = vec![0u32; n_cells + 1];
        for i in 0..n_cells {
            start[i + 1] = start[i] + counts[i];
        }
        let mut fill = start.clone();
        let mut items = vec![0u32; start[n_cells] as usize];
        for (si, r) in ranges.iter().enumerate() {
            for x in r[0].0..=r[0].1 {
                for y in r[1].0..=r[1].1 {
                    for z in r[2].0..=r[2].1 {
                        let c = (x * res[1] + y) * res[2] + z;
                        items[fill[c] as usize] = si as u32;
                        fill[c] += 1;
                    }
                }
            }
        }
        Locator {
            lo,
            cell,
            res,
            start,
            items,
            maps,
        }
    }

    fn locate(&self, dim: usize, q: &[f64; 3]) -> Option<usize> {
        if self.maps.is_empty() {
            return None;
        }
        let mut idx = [0usize; 3];
        for k in 0..dim {
            let t = (q[k] - self.lo[k]) / self.cell[k];
            // allow queries on the outer bbox face to snap inwards
            if t < -1e-6 || t > self.res[k] as f64 + 1e-6 || !t.is_finite() {
                return None;
            }
            idx[k] = (t.max(0.0) as usize).min(self.res[k] - 1);
        }
        let c = (idx[0] * self.res[1] + idx[1]) * self.res[2] + idx[2];
        let (a, b) = (self.start[c] as usize, self.start[c + 1] as usize);
        self.items[a..b]
            .iter()
            .map(|&s| s as usize)
            .find(|&s| self.maps[s].min_coordinate(dim, q) >= -CONTAINMENT_TOLERANCE)
    }
}
