//! Bisection for the largest alpha radius that keeps the share of violated
//! points inside the shape under a tolerance.

use crate::geometry::{AlphaShape, Triangulation};

use super::DsidError;

/// Number of times the lower multiplier is halved when it does not meet the
/// tolerance.
pub const BRACKET_REPAIRS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaSearch {
    /// Allowed violated share inside the shape (percent).
    pub v_max_pct: f64,
    /// Radius that the multipliers scale.
    pub base_radius: f64,
    pub multiplier_bounds: [f64; 2],
    pub delta_tol: f64,
    pub iter_max: usize,
}

impl AlphaSearch {
    /// Search on bounds-normalized data in `dim` dimensions, whose base
    /// radius (product of unit upper bounds over the dimension) is `1/dim`.
    pub fn normalized(
        dim: usize,
        v_max_pct: f64,
        bracket: [f64; 2],
        delta_tol: f64,
        iter_max: usize,
    ) -> Self {
        AlphaSearch {
            v_max_pct,
            base_radius: 1.0 / dim as f64,
            multiplier_bounds: bracket,
            delta_tol,
            iter_max,
        }
    }

    /// Largest violation count tolerated with `v_num` violated points inside.
    pub fn allowed(&self, n_sat: usize, v_num: usize) -> f64 {
        self.v_max_pct * (n_sat + v_num) as f64 / 100.0
    }
}

#[derive(Debug, Clone)]
pub struct AlphaOutcome {
    pub shape: AlphaShape,
    pub alpha_radius: f64,
    pub multiplier: f64,
    /// Indices into the violated cloud of the points inside the shape.
    pub violated_inside: Vec<usize>,
    /// Final bisection bracket.
    pub bracket: [f64; 2],
    pub iterations: usize,
    pub max_iterations_hit: bool,
    /// Times the lower bracket end was halved before bisecting.
    pub repairs: usize,
}

impl AlphaOutcome {
    pub fn v_num(&self) -> usize {
        self.violated_inside.len()
    }
}

fn violations(shape: &AlphaShape, p_vio: &[Vec<f64>]) -> Vec<usize> {
    if shape.is_empty() {
        return Vec::new();
    }
    (0..p_vio.len())
        .filter(|&i| shape.contains(&p_vio[i]))
        .collect()
}

/// Bisection on the alpha multiplier over a triangulation of the satisfied
/// points.
///
/// A midpoint is accepted when the violated points inside its shape number
/// at most `v_max% (n_sat + v_num) / 100`; accepted midpoints raise the
/// lower end, rejected ones lower the upper end. The search ends when an
/// accepted midpoint leaves a bracket no wider than `delta_tol`, or after
/// `iter_max` midpoints, in which case the shape at the last accepted lower
/// end is returned and flagged. If the lower end itself is not accepted it
/// is halved up to [`BRACKET_REPAIRS`] times before the search fails with
/// `BracketInvalid`.
pub fn find_alpha_radius(
    tri: &Triangulation,
    p_vio: &[Vec<f64>],
    search: &AlphaSearch,
) -> Result<AlphaOutcome, DsidError> {
    let n_sat = tri.points().len();
    if n_sat == 0 {
        return Err(DsidError::EmptySatisfied);
    }
    let [mut lo, mut hi] = search.multiplier_bounds;
    let accepted = |m: f64| {
        let shape = tri.filter(search.base_radius * m);
        let inside = violations(&shape, p_vio);
        let ok = inside.len() as f64 <= search.allowed(n_sat, inside.len());
        (ok, shape, inside)
    };

    let mut repairs = 0;
    let (mut best_shape, mut best_inside) = loop {
        let (ok, shape, inside) = accepted(lo);
        if ok {
            break (shape, inside);
        }
        if repairs == BRACKET_REPAIRS {
            return Err(DsidError::BracketInvalid {
                lower: lo,
                upper: hi,
            });
        }
        lo *= 0.5;
        repairs += 1;
    };
    if hi <= lo {
        return Err(DsidError::BracketInvalid {
            lower: lo,
            upper: hi,
        });
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < search.iter_max {
        iterations += 1;
        let mid = lo + (hi - lo) / 2.0;
        let (ok, shape, inside) = accepted(mid);
        if ok {
            lo = mid;
            best_shape = shape;
            best_inside = inside;
            if hi - lo <= search.delta_tol {
                converged = true;
                break;
            }
        } else {
            hi = mid;
        }
    }
    if !converged {
        log::warn!("alpha search stopped after {iterations} iterations with bracket [{lo}, {hi}]");
    }
    Ok(AlphaOutcome {
        shape: best_shape,
        alpha_radius: search.base_radius * lo,
        multiplier: lo,
        violated_inside: best_inside,
        bracket: [lo, hi],
        iterations,
        max_iterations_hit: !converged,
        repairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::delaunay;
    use crate::sampling::{sobol, Bounds};

    fn search(v: f64) -> AlphaSearch {
        AlphaSearch::normalized(2, v, [1e-3, 1e3], 1e-3, 50)
    }

    /// C-shaped satisfied set with violated points filling the notch.
    fn c_shape() -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let pts = sobol(2, &Bounds::unit(2), 10).unwrap().inputs;
        let notch = |p: &[f64]| p[0] > 0.35 && (0.35..=0.65).contains(&p[1]);
        let (mut sat, mut vio) = (Vec::new(), Vec::new());
        for p in pts {
            if notch(&p) {
                vio.push(p)
            } else {
                sat.push(p)
            }
        }
        (sat, vio)
    }

    #[test]
    fn no_violations_converges_to_upper_end() {
        let pts = sobol(2, &Bounds::unit(2), 7).unwrap().inputs;
        let tri = delaunay(&pts).unwrap();
        let out = find_alpha_radius(&tri, &[], &search(0.0)).unwrap();
        assert!(!out.max_iterations_hit);
        assert!(1e3 - out.multiplier <= 1e-3);
        assert_eq!(out.shape.simplices().len(), tri.simplices().len());
        assert_eq!(out.shape.n_regions(), 1);
    }

    #[test]
    fn zero_tolerance_shape_excludes_notch() {
        let (sat, vio) = c_shape();
        let tri = delaunay(&sat).unwrap();
        let out = find_alpha_radius(&tri, &vio, &search(0.0)).unwrap();
        assert!(!out.max_iterations_hit);
        assert!(out.bracket[1] - out.bracket[0] <= 1e-3);
        let inside = vio.iter().filter(|p| out.shape.contains(p)).count();
        assert_eq!(inside, 0);
        assert_eq!(out.v_num(), 0);
        // the shape is not the convex hull, which would swallow the notch
        assert!(out.multiplier < 1e3 - 1.0);
    }

    #[test]
    fn looser_tolerance_allows_larger_radius() {
        let (sat, vio) = c_shape();
        let tri = delaunay(&sat).unwrap();
        let strict = find_alpha_radius(&tri, &vio, &search(0.0)).unwrap();
        let loose = find_alpha_radius(&tri, &vio, &search(1.0)).unwrap();
        assert!(loose.alpha_radius > strict.alpha_radius);
        let allowed = search(1.0).allowed(sat.len(), loose.v_num());
        assert!(loose.v_num() as f64 <= allowed);
    }

    #[test]
    fn unrepairable_bracket_is_reported() {
        // a violated point coincides with a satisfied vertex, so it is
        // inside every non-empty shape; the empty shape needs a radius below
        // the smallest circumradius, which 60 halvings of 1e3 cannot reach
        let pts = sobol(2, &Bounds::unit(2), 5).unwrap().inputs;
        let tri = delaunay(&pts).unwrap();
        let s = AlphaSearch {
            multiplier_bounds: [1e3, 1e4],
            ..search(0.0)
        };
        let vio = vec![pts[3].clone()];
        let r = find_alpha_radius(&tri, &vio, &s);
        assert!(r.is_ok(), "halving reaches an empty shape");
        let s = AlphaSearch {
            base_radius: 1e30,
            multiplier_bounds: [1e3, 1e4],
            ..search(0.0)
        };
        assert!(matches!(
            find_alpha_radius(&tri, &vio, &s),
            Err(DsidError::BracketInvalid { .. })
        ));
    }
}
