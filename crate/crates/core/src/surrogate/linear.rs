//! Piecewise-linear interpolation over the Delaunay triangulation of the
//! training inputs, with nearest-neighbour values outside their hull.

use crate::geometry::{convex_hull, AlphaShape};

use super::{Interpolator, MinMax, SurrogateError};

#[derive(Debug, Clone)]
pub struct LinearInterpolator {
    hull: AlphaShape,
    scale: MinMax,
    values: Vec<Vec<f64>>,
}

impl LinearInterpolator {
    /// Triangulates `inputs` (2 or 3 columns) in bounds-normalized
    /// coordinates so that axes with large units do not dominate.
    pub fn new(inputs: &[Vec<f64>], values: &[Vec<f64>]) -> Result<Self, SurrogateError> {
        if inputs.is_empty() {
            return Err(SurrogateError::EmptyInput);
        }
        if inputs.len() != values.len() {
            return Err(SurrogateError::ShapeMismatch {
                row: inputs.len().min(values.len()),
                got: values.len(),
                expected: inputs.len(),
            });
        }
        let n_out = values[0].len();
        if let Some(row) = values.iter().position(|v| v.len() != n_out) {
            return Err(SurrogateError::ShapeMismatch {
                row,
                got: values[row].len(),
                expected: n_out,
            });
        }
        let scale = MinMax::fit(inputs);
        let unit: Vec<Vec<f64>> = inputs.iter().map(|r| scale.normalize(r)).collect();
        let hull = convex_hull(&unit)?;
        Ok(LinearInterpolator {
            hull,
            scale,
            values: values.to_vec(),
        })
    }

    fn nearest(&self, q: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, p) in self.hull.points().iter().enumerate() {
            let d: f64 = q.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    fn predict_one(&self, x: &[f64]) -> Vec<f64> {
        let q = self.scale.normalize(x);
        match self.hull.barycentric(&q) {
            Some((s, w)) => {
                let verts = self.hull.simplices()[s].vertices();
                let mut out = vec![0.0; self.n_outputs()];
                for (&v, &wk) in verts.iter().zip(&w) {
                    for (o, y) in out.iter_mut().zip(&self.values[v]) {
                        *o += wk * y;
                    }
                }
                out
            }
            None => self.values[self.nearest(&q)].clone(),
        }
    }
}

impl Interpolator for LinearInterpolator {
    fn n_inputs(&self) -> usize {
        self.hull.dim()
    }

    fn n_outputs(&self) -> usize {
        self.values[0].len()
    }

    fn predict(&self, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        inputs.iter().map(|x| self.predict_one(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sobol, Bounds};

    #[test]
    fn reproduces_affine_functions_inside_hull() {
        let b = Bounds::new(vec![0.2, 0.5, 40.0], vec![0.6, 1.5, 120.0]).unwrap();
        let x = sobol(3, &b, 7).unwrap().inputs;
        let f = |r: &[f64]| vec![3.0 * r[0] - r[1] + 0.01 * r[2], 7.0];
        let y: Vec<Vec<f64>> = x.iter().map(|r| f(r)).collect();
        let lin = LinearInterpolator::new(&x, &y).unwrap();
        let q = sobol(
            3,
            &Bounds::new(vec![0.3, 0.7, 60.0], vec![0.5, 1.3, 100.0]).unwrap(),
            6,
        )
        .unwrap()
        .inputs;
        for (p, r) in lin.predict(&q).iter().zip(&q) {
            let e = f(r);
            assert!(
                (p[0] - e[0]).abs() < 1e-9 && (p[1] - 7.0).abs() < 1e-9,
                "{p:?} {e:?}"
            );
        }
    }

    #[test]
    fn training_points_are_interpolated_exactly() {
        let x = sobol(2, &Bounds::unit(2), 6).unwrap().inputs;
        let y: Vec<Vec<f64>> = x
            .iter()
            .map(|r| vec![(r[0] * 5.0).sin() + r[1] * r[1]])
            .collect();
        let lin = LinearInterpolator::new(&x, &y).unwrap();
        for (p, e) in lin.predict(&x).iter().zip(&y) {
            assert!((p[0] - e[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn outside_hull_uses_nearest_sample() {
        let x = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
        ];
        let y = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        let lin = LinearInterpolator::new(&x, &y).unwrap();
        assert_eq!(lin.predict(&[vec![1.5, 1.2]]), vec![vec![4.0]]);
        assert_eq!(lin.predict(&[vec![-0.5, 0.1]]), vec![vec![1.0]]);
    }
}
