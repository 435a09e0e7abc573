//! Incremental Bowyer–Watson Delaunay triangulation in 2D and 3D.
//!
//! The convex hull is closed with "infinite" cells sharing a virtual vertex,
//! so no bounding super-simplex is needed. Predicates are exact; exact
//! degeneracies (cocircular/cospherical lattices, common in Sobol nets) are
//! broken by a deterministic per-point perturbation far below any geometric
//! scale of interest. All measures are computed on the original coordinates.

use std::collections::HashMap;

use super::predicates::{in_ball, orient, orient2, orient3};
use super::simplex::{circumcenter_raw, signed_volume, Simplex, DEGENERACY_TOLERANCE};
use super::GeometryError;

const INF: u32 = u32::MAX;
const NONE: u32 = u32::MAX;

/// Relative magnitude of the symbolic-perturbation jitter.
const JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
struct Cell {
    v: [u32; 4],
    n: [u32; 4],
}

/// A Delaunay triangulation of a 2D or 3D point set.
#[derive(Debug, Clone)]
pub struct Triangulation {
    dim: usize,
    points: Vec<[f64; 3]>,
    simplices: Vec<Simplex>,
    /// Input points that duplicate an earlier point.
    duplicates: Vec<usize>,
    /// Simplices dropped for having (numerically) zero volume.
    n_degenerate: usize,
}

impl Triangulation {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn duplicates(&self) -> &[usize] {
        &self.duplicates
    }

    pub fn degenerate_count(&self) -> usize {
        self.n_degenerate
    }

    pub fn max_circumradius(&self) -> f64 {
        self.simplices
            .iter()
            .map(|s| s.circumradius)
            .fold(0.0, f64::max)
    }

    pub fn min_circumradius(&self) -> f64 {
        self.simplices
            .iter()
            .map(|s| s.circumradius)
            .fold(f64::INFINITY, f64::min)
    }

    /// Coordinates of a point, trimmed to the triangulation dimension.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i][..self.dim]
    }
}

/// Converts caller coordinates into padded `[f64; 3]` storage.
pub(crate) fn pad_points<P: AsRef<[f64]>>(
    points: &[P],
) -> Result<(usize, Vec<[f64; 3]>), GeometryError> {
    let dim = points.first().map_or(0, |p| p.as_ref().len());
    if points.is_empty() {
        return Err(GeometryError::DegenerateInput("empty point set".into()));
    }
    if !(dim == 2 || dim == 3) {
        return Err(GeometryError::UnsupportedDimension(dim));
    }
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(GeometryError::DimensionMismatch);
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let mut c = [0.0; 3];
        c[..dim].copy_from_slice(p);
        out.push(c);
    }
    Ok((dim, out))
}

/// Computes the Delaunay triangulation of `points`.
pub fn delaunay<P: AsRef<[f64]>>(points: &[P]) -> Result<Triangulation, GeometryError> {
    let (dim, pts) = pad_points(points)?;
    triangulate(dim, pts)
}

pub(crate) fn triangulate(
    dim: usize,
    points: Vec<[f64; 3]>,
) -> Result<Triangulation, GeometryError> {
    let n = points.len();
    if n < dim + 1 {
        return Err(GeometryError::DegenerateInput(format!(
            "need at least {} points, got {n}",
            dim + 1
        )));
    }

    // exact duplicates are skipped
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a].partial_cmp(&points[b]).unwrap().then(a.cmp(&b)));
    let mut duplicates = Vec::new();
    let mut unique = Vec::with_capacity(n);
    for (k, &i) in order.iter().enumerate() {
        if k > 0 && points[order[k - 1]] == points[i] {
            duplicates.push(i);
        } else {
            unique.push(i);
        }
    }
    duplicates.sort_unstable();
    unique.sort_unstable();

    let (lo, hi) = bbox(&points, &unique);
    let extent = (0..dim).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
    if extent <= 0.0 {
        return Err(GeometryError::DegenerateInput("all points coincide".into()));
    }
    let jittered: Vec<[f64; 3]> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut q = *p;
            for (k, x) in q.iter_mut().enumerate().take(dim) {
                *x += JITTER * extent * unit_hash(i as u64, k as u64);
            }
            q
        })
        .collect();

    let mut tds = Tds::new(dim, jittered);
    let seed = tds.initial_simplex(&unique)?;
    let mut rest: Vec<usize> = unique
        .iter()
        .copied()
        .filter(|i| !seed.contains(i))
        .collect();
    sort_morton(&tds.pts, dim, &mut rest, &lo, extent);
    for i in rest {
        tds.insert(i as u32);
    }

    let vol_tol = DEGENERACY_TOLERANCE * extent.powi(dim as i32);
    let mut simplices = Vec::new();
    let mut n_degenerate = 0;
    let nv = dim + 1;
    for (c, cell) in tds.cells.iter().enumerate() {
        if !tds.alive[c] || cell.v[..nv].contains(&INF) {
            continue;
        }
        let idx: Vec<usize> = cell.v[..nv].iter().map(|&v| v as usize).collect();
        let coords: Vec<[f64; 3]> = idx.iter().map(|&i| points[i]).collect();
        let vol = signed_volume(dim, &coords).abs();
        if vol < vol_tol {
            n_degenerate += 1;
            continue;
        }
        let cc = circumcenter_raw(dim, &coords);
        let r = (0..dim)
            .map(|k| (cc[k] - coords[0][k]).powi(2))
            .sum::<f64>()
            .sqrt();
        simplices.push(Simplex::new(&idx, r, vol));
    }
    if simplices.is_empty() {
        let what = if dim == 2 { "collinear" } else { "coplanar" };
        return Err(GeometryError::DegenerateInput(format!(
            "all points are {what}"
        )));
    }

    Ok(Triangulation {
        dim,
        points,
        simplices,
        duplicates,
        n_degenerate,
    })
}

fn bbox(points: &[[f64; 3]], idx: &[usize]) -> ([f64; 3], [f64; 3]) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in idx {
        for k in 0..3 {
            lo[k] = lo[k].min(points[i][k]);
            hi[k] = hi[k].max(points[i][k]);
        }
    }
    (lo, hi)
}

/// Deterministic value in [-1, 1] from (index, axis), splitmix64-based.
fn unit_hash(i: u64, k: u64) -> f64 {
    let mut z = i
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(k.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(0x2545_F491_4F6C_DD1D);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

fn sort_morton(pts: &[[f64; 3]], dim: usize, idx: &mut [usize], lo: &[f64; 3], extent: f64) {
    fn spread(mut x: u64) -> u64 {
        // 21 bits into every third bit
        x &= 0x1f_ffff;
        x = (x | x << 32) & 0x1f00000000ffff;
        x = (x | x << 16) & 0x1f0000ff0000ff;
        x = (x | x << 8) & 0x100f00f00f00f00f;
        x = (x | x << 4) & 0x10c30c30c30c30c3;
        x = (x | x << 2) & 0x1249249249249249;
        x
    }
    let scale = ((1u64 << 21) - 1) as f64 / extent;
    let key = |i: usize| -> u64 {
        let mut k = 0u64;
        for a in 0..dim {
            let q = ((pts[i][a] - lo[a]).max(0.0) * scale) as u64;
            k |= spread(q.min((1 << 21) - 1)) << a;
        }
        k
    };
    idx.sort_by_key(|&i| (key(i), i));
}

/// Triangulation data structure used during construction.
struct Tds {
    dim: usize,
    nv: usize,
    pts: Vec<[f64; 3]>,
    cells: Vec<Cell>,
    alive: Vec<bool>,
    free: Vec<u32>,
    mark: Vec<u64>,
    epoch: u64,
    hint: u32,
    rng: u64,
}

impl Tds {
    fn new(dim: usize, pts: Vec<[f64; 3]>) -> Self {
        Tds {
            dim,
            nv: dim + 1,
            pts,
            cells: Vec::new(),
            alive: Vec::new(),
            free: Vec::new(),
            mark: Vec::new(),
            epoch: 0,
            hint: 0,
            rng: 0x853c_49e6_748f_ea9b,
        }
    }

    fn next_rand(&mut self) -> usize {
        self.rng ^= self.rng << 13;
        self.rng ^= self.rng >> 7;
        self.rng ^= self.rng << 17;
        self.rng as usize
    }

    fn alloc(&mut self, cell: Cell) -> u32 {
        if let Some(c) = self.free.pop() {
            self.cells[c as usize] = cell;
            self.alive[c as usize] = true;
            c
        } else {
            self.cells.push(cell);
            self.alive.push(true);
            self.mark.push(0);
            (self.cells.len() - 1) as u32
        }
    }

    /// Finds `dim + 1` affinely independent points and builds the first cell
    /// plus its infinite neighbours.
    fn initial_simplex(&mut self, unique: &[usize]) -> Result<Vec<usize>, GeometryError> {
        let p = &self.pts;
        let i0 = unique[0];
        let i1 = unique[1];
        let collinear = |a: usize, b: usize, c: usize| -> bool {
            let proj = |u: usize, v: usize| {
                let m = |x: &[f64; 3]| [x[u], x[v], 0.0];
                orient2(&m(&p[a]), &m(&p[b]), &m(&p[c])) == 0.0
            };
            proj(0, 1) && (self.dim == 2 || (proj(1, 2) && proj(0, 2)))
        };
        let i2 = unique[2..]
            .iter()
            .copied()
            .find(|&c| !collinear(i0, i1, c))
            .ok_or_else(|| GeometryError::DegenerateInput("all points are collinear".into()))?;
        let mut seed = vec![i0, i1, i2];
        if self.dim == 3 {
            let i3 = unique[2..]
                .iter()
                .copied()
                .find(|&c| c != i2 && orient3(&p[i0], &p[i1], &p[i2], &p[c]) != 0.0)
                .ok_or_else(|| GeometryError::DegenerateInput("all points are coplanar".into()))?;
            seed.push(i3);
        }
        let coords: Vec<[f64; 3]> = seed.iter().map(|&i| p[i]).collect();
        if orient(self.dim, &coords) < 0.0 {
            seed.swap(0, 1);
        }

        let nv = self.nv;
        let mut v = [NONE; 4];
        for k in 0..nv {
            v[k] = seed[k] as u32;
        }
        let c0 = self.alloc(Cell { v, n: [NONE; 4] });
        let mut new_cells = vec![c0];
        for k in 0..nv {
            let mut iv = v;
            iv[k] = INF;
            // flip so that a point beyond the facet orients positively
            let (a, b) = if k == 0 {
                (1, 2)
            } else {
                (0, if k == 1 { 2 } else { 1 })
            };
            iv.swap(a, b);
            let mut nb = [NONE; 4];
            nb[iv.iter().position(|&x| x == INF).unwrap()] = c0;
            let ic = self.alloc(Cell { v: iv, n: nb });
            self.cells[c0 as usize].n[k] = ic;
            new_cells.push(ic);
        }
        self.glue(&new_cells[1..]);
        self.hint = c0;
        Ok(seed)
    }

    /// Connects the still-unset neighbour slots of `cells` by matching facets.
    fn glue(&mut self, cells: &[u32]) {
        let nv = self.nv;
        let mut facets: Vec<([u32; 3], u32, usize)> = Vec::with_capacity(cells.len() * nv);
        for &c in cells {
            let cell = self.cells[c as usize];
            for j in 0..nv {
                if cell.n[j] != NONE {
                    continue;
                }
                let mut key = [NONE; 3];
                let mut m = 0;
                for (t, &x) in cell.v[..nv].iter().enumerate() {
                    if t != j {
                        key[m] = x;
                        m += 1;
                    }
                }
                key[..nv - 1].sort_unstable();
                facets.push((key, c, j));
            }
        }
        facets.sort_unstable_by_key(|f| f.0);
        let mut k = 0;
        while k + 1 < facets.len() {
            if facets[k].0 == facets[k + 1].0 {
                let (_, a, ja) = facets[k];
                let (_, b, jb) = facets[k + 1];
                self.cells[a as usize].n[ja] = b;
                self.cells[b as usize].n[jb] = a;
                k += 2;
            } else {
                debug_assert!(false, "unmatched facet during gluing");
                k += 1;
            }
        }
    }

    #[inline]
    fn coords_with(&self, c: u32, replace: usize, q: &[f64; 3]) -> [[f64; 3]; 4] {
        let cell = &self.cells[c as usize];
        let mut out = [[0.0; 3]; 4];
        for k in 0..self.nv {
            out[k] = if k == replace {
                *q
            } else {
                self.pts[cell.v[k] as usize]
            };
        }
        out
    }

    #[inline]
    fn inf_slot(&self, c: u32) -> Option<usize> {
        self.cells[c as usize].v[..self.nv]
            .iter()
            .position(|&x| x == INF)
    }

    fn orient_replaced(&self, c: u32, k: usize, q: &[f64; 3]) -> f64 {
        orient(self.dim, &self.coords_with(c, k, q))
    }

    fn conflicts(&self, c: u32, q: &[f64; 3]) -> bool {
        match self.inf_slot(c) {
            Some(k) => {
                let o = self.orient_replaced(c, k, q);
                if o > 0.0 {
                    true
                } else if o == 0.0 {
                    let f = self.cells[c as usize].n[k];
                    self.conflicts(f, q)
                } else {
                    false
                }
            }
            None => in_ball(self.dim, &self.coords_with(c, usize::MAX, q), q) > 0.0,
        }
    }

    /// Visibility walk to a cell in conflict with `q`.
    fn locate(&mut self, q: &[f64; 3]) -> u32 {
        let mut c = self.hint;
        if !self.alive[c as usize] {
            c = self.alive.iter().position(|&a| a).unwrap() as u32;
        }
        let max_steps = 4 * self.cells.len() + 64;
        for _ in 0..max_steps {
            if let Some(k) = self.inf_slot(c) {
                if self.orient_replaced(c, k, q) > 0.0 {
                    return c;
                }
                c = self.cells[c as usize].n[k];
                continue;
            }
            let off = self.next_rand() % self.nv;
            let mut next = None;
            for t in 0..self.nv {
                let i = (t + off) % self.nv;
                if self.orient_replaced(c, i, q) < 0.0 {
                    next = Some(self.cells[c as usize].n[i]);
                    break;
                }
            }
            match next {
                Some(nc) => c = nc,
                None => return c,
            }
        }
        // walk failed to terminate; scan
        (0..self.cells.len() as u32)
            .find(|&c| self.alive[c as usize] && self.conflicts(c, q))
            .expect("no conflicting cell found")
    }

    fn insert(&mut self, pi: u32) {
        let q = self.pts[pi as usize];
        let start = self.locate(&q);
        if !self.conflicts(start, &q) {
            // walk ended on a cell whose circumsphere only touches q
            log::debug!("point {pi} skipped: no strict conflict");
            return;
        }
        self.epoch += 1;
        let in_cav = self.epoch * 2;
        let out_cav = self.epoch * 2 + 1;
        let nv = self.nv;

        let mut cavity = vec![start];
        self.mark[start as usize] = in_cav;
        let mut boundary: Vec<(u32, usize, u32)> = Vec::new();
        let mut head = 0;
        while head < cavity.len() {
            let c = cavity[head];
            head += 1;
            for i in 0..nv {
                let nb = self.cells[c as usize].n[i];
                let m = self.mark[nb as usize];
                if m == in_cav {
                    continue;
                }
                if m != out_cav && self.conflicts(nb, &q) {
                    self.mark[nb as usize] = in_cav;
                    cavity.push(nb);
                } else {
                    self.mark[nb as usize] = out_cav;
                    boundary.push((c, i, nb));
                }
            }
        }

        let mut created = Vec::with_capacity(boundary.len());
        for &(c, i, nb) in &boundary {
            let mut v = self.cells[c as usize].v;
            v[i] = pi;
            let mut n = [NONE; 4];
            n[i] = nb;
            let nc = self.alloc(Cell { v, n });
            let back = self.cells[nb as usize].n[..nv]
                .iter()
                .position(|&x| x == c)
                .expect("broken adjacency");
            self.cells[nb as usize].n[back] = nc;
            created.push(nc);
        }
        for &c in &cavity {
            self.alive[c as usize] = false;
            self.free.push(c);
        }
        // freed slots may be reused before gluing; marks must not leak
        for &c in &created {
            self.mark[c as usize] = 0;
        }
        self.glue(&created);
        self.hint = *created
            .iter()
            .find(|&&c| self.inf_slot(c).is_none())
            .unwrap_or(&created[0]);
    }
}

/// Facet of a simplex: its vertex indices without the `skip`-th one, sorted.
pub(crate) fn facet_key(verts: &[usize], skip: usize) -> [usize; 3] {
    let mut key = [usize::MAX; 3];
    let mut m = 0;
    for (t, &v) in verts.iter().enumerate() {
        if t != skip {
            key[m] = v;
            m += 1;
        }
    }
    key[..m].sort_unstable();
    key
}

/// Facet -> incident simplices for a set of simplices.
pub(crate) fn facet_incidence(simplices: &[Simplex]) -> HashMap<[usize; 3], Vec<usize>> {
    let mut map: HashMap<[usize; 3], Vec<usize>> = HashMap::with_capacity(simplices.len() * 3);
    for (s, simplex) in simplices.iter().enumerate() {
        let v = simplex.vertices();
        for skip in 0..v.len() {
            map.entry(facet_key(v, skip)).or_default().push(s);
        }
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn total_volume(t: &Triangulation) -> f64 {
        t.simplices().iter().map(|s| s.volume).sum()
    }

    #[test]
    fn unit_square_two_triangles() {
        let t = delaunay(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert_eq!(t.simplices().len(), 2);
        assert_relative_eq!(total_volume(&t), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn single_tetrahedron() {
        let t = delaunay(&[
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert_eq!(t.simplices().len(), 1);
        assert_relative_eq!(total_volume(&t), 1.0 / 6.0, max_relative = 1e-12);
    }

    #[test]
    fn coplanar_and_collinear_inputs_rejected() {
        let flat = [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
        ];
        assert!(matches!(
            delaunay(&flat),
            Err(GeometryError::DegenerateInput(_))
        ));
        let line = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        assert!(matches!(
            delaunay(&line),
            Err(GeometryError::DegenerateInput(_))
        ));
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let pts: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0]];
        assert!(matches!(
            delaunay(&pts),
            Err(GeometryError::DimensionMismatch)
        ));
    }

    #[test]
    fn lattice_cube_fills_volume() {
        // 5x5x5 lattice: maximally cospherical input
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    pts.push([i as f64 / 4.0, j as f64 / 4.0, k as f64 / 4.0]);
                }
            }
        }
        let t = delaunay(&pts).unwrap();
        assert_relative_eq!(total_volume(&t), 1.0, max_relative = 1e-9);
        let used: std::collections::HashSet<usize> = t
            .simplices()
            .iter()
            .flat_map(|s| s.vertices().to_vec())
            .collect();
        assert_eq!(used.len(), pts.len());
    }

    #[test]
    fn duplicates_are_ignored() {
        let t = delaunay(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]).unwrap();
        assert_eq!(t.duplicates(), &[3]);
        assert_relative_eq!(total_volume(&t), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn random_cloud_is_delaunay_2d() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<[f64; 2]> = (0..300).map(|_| [rng.gen(), rng.gen()]).collect();
        let t = delaunay(&pts).unwrap();
        for s in t.simplices() {
            let v: Vec<&[f64]> = s.vertices().iter().map(|&i| t.point(i)).collect();
            let (c, r) = super::super::circumsphere(&v).unwrap();
            for p in &pts {
                let d = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt();
                assert!(d >= r - 1e-7);
            }
        }
        // Euler: triangles = 2n - 2 - h for points in general position
        assert!(t.simplices().len() > 500);
    }

    #[test]
    fn r3_sequence_matches_reference_hull_and_count() {
        // reference values from an independent Qhull run on the same points
        let a = [0.8191725134632688, 0.6710436068137292, 0.54970047803706];
        let pts: Vec<[f64; 3]> = (1..=500)
            .map(|i| {
                let f = |k: usize| (0.5 + i as f64 * a[k]).rem_euclid(1.0);
                [f(0), f(1), f(2)]
            })
            .collect();
        let t = delaunay(&pts).unwrap();
        assert_relative_eq!(total_volume(&t), 0.884538005705073, max_relative = 1e-9);
        // Qhull reports 2900 simplices, 23 of them with volume below 1e-12
        assert_eq!(t.simplices().len(), 2877);
        for s in t.simplices().iter().step_by(7) {
            let v: Vec<&[f64]> = s.vertices().iter().map(|&i| t.point(i)).collect();
            let (c, r) = super::super::circumsphere(&v).unwrap();
            for p in &pts {
                let d = (0..3).map(|k| (p[k] - c[k]).powi(2)).sum::<f64>().sqrt();
                assert!(d >= r - 1e-7);
            }
        }
    }
}
