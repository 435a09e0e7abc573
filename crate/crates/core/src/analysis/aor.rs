//! Acceptable operating region: the largest bounds-normalized cube around a
//! nominal operating point whose corners all lie in the design space.

use serde::{Deserialize, Serialize};

use super::{AnalysisError, KpiStats};
use crate::geometry::AlphaShape;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AorSettings {
    pub delta_tol: f64,
    pub iter_max: usize,
}

impl Default for AorSettings {
    fn default() -> Self {
        AorSettings {
            delta_tol: 1e-3,
            iter_max: 40,
        }
    }
}

/// Proven acceptable range of one decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mpar {
    pub lower: f64,
    pub upper: f64,
    pub half_range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AorReport {
    pub nop: Vec<f64>,
    pub nop_normalized: Vec<f64>,
    /// Normalized half-width of the cube.
    pub half_width: f64,
    pub mpar: Vec<Mpar>,
    /// `(2 h)^d` in normalized units.
    pub size_normalized: f64,
    /// `(2 h)^d` times the product of the bound widths.
    pub size_physical: f64,
    /// Cube corners in physical units.
    pub vertices: Vec<Vec<f64>>,
    pub iterations: usize,
    pub max_iterations_hit: bool,
    pub kpi_stats: Option<KpiStats>,
}

/// The `2^d` corners of the cube of half-width `h` around `center`.
pub fn cube_vertices(center: &[f64], h: f64) -> Vec<Vec<f64>> {
    let d = center.len();
    (0..1usize << d)
        .map(|mask| {
            (0..d)
                .map(|k| center[k] + if mask >> k & 1 == 1 { h } else { -h })
                .collect()
        })
        .collect()
}

/// Bisection on the normalized half-width over `[0, 1]`.
///
/// A midpoint is accepted when all cube corners lie in `shape`; the search
/// ends at an accepted midpoint once the bracket it was drawn from is no
/// wider than `delta_tol`, or after `iter_max` midpoints (flagged). The
/// returned half-width is always an accepted one, so the cube is inside.
pub fn find_aor(
    shape: &AlphaShape,
    nop: &[f64],
    settings: &AorSettings,
) -> Result<AorReport, AnalysisError> {
    let norm = shape.normalization();
    if nop.len() != shape.dim() {
        return Err(AnalysisError::DimensionMismatch {
            expected: shape.dim(),
            got: nop.len(),
        });
    }
    let center = norm.normalize(nop);
    if !shape.contains(&center) {
        return Err(AnalysisError::NopOutsideSpace(nop.to_vec()));
    }
    let inside = |h: f64| cube_vertices(&center, h).iter().all(|v| shape.contains(v));
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < settings.iter_max {
        iterations += 1;
        let gap = hi - lo;
        let mid = lo + gap / 2.0;
        if inside(mid) {
            lo = mid;
            if gap <= settings.delta_tol {
                converged = true;
                break;
            }
        } else {
            hi = mid;
        }
    }
    if !converged {
        log::warn!("AOR search stopped after {iterations} iterations at half-width {lo}");
    }
    Ok(report(shape, nop, center, lo, iterations, !converged))
}

fn report(
    shape: &AlphaShape,
    nop: &[f64],
    center: Vec<f64>,
    h: f64,
    iterations: usize,
    max_iterations_hit: bool,
) -> AorReport {
    let norm = shape.normalization();
    let widths = norm.widths();
    let d = nop.len() as i32;
    let mpar = nop
        .iter()
        .zip(&widths)
        .map(|(&c, &w)| Mpar {
            lower: c - h * w,
            upper: c + h * w,
            half_range: h * w,
        })
        .collect();
    let size_normalized = (2.0 * h).powi(d);
    AorReport {
        nop: nop.to_vec(),
        vertices: cube_vertices(&center, h)
            .iter()
            .map(|v| norm.denormalize(v))
            .collect(),
        nop_normalized: center,
        half_width: h,
        mpar,
        size_normalized,
        size_physical: size_normalized * norm.volume_scale(),
        iterations,
        max_iterations_hit,
        kpi_stats: None,
    }
}

/// Per-decision `(MPAR_L, MPAR_U)` of a report.
pub fn mpar(report: &AorReport) -> Vec<(f64, f64)> {
    report.mpar.iter().map(|m| (m.lower, m.upper)).collect()
}

impl AorReport {
    /// Table of NOP, MPAR and AOR size, one decision per line.
    pub fn summary(&self, names: &[String]) -> String {
        let mut s = format!(
            "{:<14}{:>12}{:>12}{:>12}{:>12}\n",
            "decision", "NOP", "MPAR +/-", "lower", "upper"
        );
        for (k, m) in self.mpar.iter().enumerate() {
            let name = names.get(k).map_or("?", String::as_str);
            s.push_str(&format!(
                "{:<14}{:>12.4}{:>12.4}{:>12.4}{:>12.4}\n",
                name, self.nop[k], m.half_range, m.lower, m.upper
            ));
        }
        s.push_str(&format!("normalized half-width {:.5}\n", self.half_width));
        s.push_str(&format!(
            "AOR size (physical)   {:.6}\n",
            self.size_physical
        ));
        s.push_str(&format!(
            "AOR size (normalized) {:.6}\n",
            self.size_normalized
        ));
        if self.max_iterations_hit {
            s.push_str("warning: AOR search hit its iteration limit\n");
        }
        if let Some(st) = &self.kpi_stats {
            s.push_str(&st.summary());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{convex_hull, Normalization};

    fn unit_cube() -> AlphaShape {
        let corners: Vec<Vec<f64>> = cube_vertices(&[0.5, 0.5, 0.5], 0.5);
        convex_hull(&corners).unwrap()
    }

    #[test]
    fn centre_of_unit_cube() {
        let r = find_aor(&unit_cube(), &[0.5, 0.5, 0.5], &AorSettings::default()).unwrap();
        assert!((r.half_width - 0.5).abs() <= 1e-3);
        assert!(!r.max_iterations_hit);
        for (l, u) in mpar(&r) {
            assert!(((u - l) - 2.0 * r.half_width).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_nop_has_no_room() {
        let r = find_aor(&unit_cube(), &[0.0, 0.3, 0.7], &AorSettings::default()).unwrap();
        assert!(r.half_width <= 1e-3);
    }

    #[test]
    fn outside_nop_is_an_error() {
        assert!(matches!(
            find_aor(&unit_cube(), &[1.2, 0.5, 0.5], &AorSettings::default()),
            Err(AnalysisError::NopOutsideSpace(_))
        ));
    }

    #[test]
    fn zero_width_mpar_is_the_nop() {
        let r = report(
            &unit_cube(),
            &[0.2, 0.3, 0.4],
            vec![0.2, 0.3, 0.4],
            0.0,
            1,
            false,
        );
        for ((l, u), c) in mpar(&r).into_iter().zip([0.2, 0.3, 0.4]) {
            assert_eq!((l, u), (c, c));
        }
    }

    #[test]
    fn physical_ranges_scale_with_bound_widths() {
        let shape = unit_cube().with_normalization(Normalization {
            lower: vec![0.21, 0.5, 40.0],
            upper: vec![0.63, 1.5, 120.0],
        });
        let nop = [0.42, 1.0, 80.0];
        let r = find_aor(&shape, &nop, &AorSettings::default()).unwrap();
        let ratios: Vec<f64> = r
            .mpar
            .iter()
            .zip([0.42, 1.0, 80.0])
            .map(|(m, w)| m.half_range / w)
            .collect();
        assert!(ratios.iter().all(|q| (q - r.half_width).abs() < 1e-12));
        assert!((r.size_physical - (2.0 * r.half_width).powi(3) * 0.42 * 80.0).abs() < 1e-9);
        for v in &r.vertices {
            assert!(shape.contains(&shape.normalization().normalize(v)));
        }
    }
}
