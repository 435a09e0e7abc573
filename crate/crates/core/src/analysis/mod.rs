//! Flexibility and KPI analysis inside an identified design space.

mod aor;
mod stats;

use serde::{Deserialize, Serialize};

use crate::dsid::LabeledCloud;
use crate::geometry::{AlphaShape, GeometryError};
use crate::sampling::SamplingError;

pub use aor::{cube_vertices, find_aor, mpar, AorReport, AorSettings, Mpar};
pub use stats::{
    kpi_stats, summarize, Densify, Histogram, KpiStats, KpiSummary, Region, HISTOGRAM_BINS,
};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("nominal operating point {0:?} lies outside the design space")]
    NopOutsideSpace(Vec<f64>),
    #[error("no samples inside the region")]
    EmptyRegion,
    #[error("expected {expected} decisions, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// AOR of a NOP together with the KPI statistics inside it.
pub fn analyze_nop(
    shape: &AlphaShape,
    nop: &[f64],
    cloud: Option<&LabeledCloud>,
    densify: Option<Densify<'_>>,
    settings: &AorSettings,
) -> Result<AorReport, AnalysisError> {
    let mut r = find_aor(shape, nop, settings)?;
    if let Some(cloud) = cloud {
        let (lower, upper): (Vec<f64>, Vec<f64>) =
            r.mpar.iter().map(|m| (m.lower, m.upper)).unzip();
        let region = Region::Box {
            lower: &lower,
            upper: &upper,
        };
        r.kpi_stats = match kpi_stats(region, cloud, densify) {
            Ok(s) => Some(s),
            Err(AnalysisError::EmptyRegion) => None,
            Err(e) => return Err(e),
        };
    }
    Ok(r)
}

/// Relative change from `a` to `b` in percent; `None` when `a` is zero and
/// `b` is not.
pub fn percent_change(a: f64, b: f64) -> Option<f64> {
    if a == b {
        Some(0.0)
    } else if a == 0.0 {
        None
    } else {
        Some((b - a) / a.abs() * 100.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NopComparison {
    pub schema_version: u32,
    pub decision_names: Vec<String>,
    pub a: AorReport,
    pub b: AorReport,
    pub aor_size_change_pct: Option<f64>,
    /// Per decision, change of the MPAR half-range.
    pub mpar_change_pct: Vec<Option<f64>>,
    /// Per KPI, change of the mean inside the AOR.
    pub kpi_avg_change_pct: Vec<Option<f64>>,
}

/// AORs of two NOPs and the percentage change from the first to the second.
pub fn compare_nops(
    shape: &AlphaShape,
    nop_a: &[f64],
    nop_b: &[f64],
    cloud: Option<&LabeledCloud>,
    densify: Option<Densify<'_>>,
    settings: &AorSettings,
) -> Result<NopComparison, AnalysisError> {
    let a = analyze_nop(shape, nop_a, cloud, densify, settings)?;
    let b = analyze_nop(shape, nop_b, cloud, densify, settings)?;
    let mpar_change_pct = a
        .mpar
        .iter()
        .zip(&b.mpar)
        .map(|(x, y)| percent_change(x.half_range, y.half_range))
        .collect();
    let kpi_avg_change_pct = match (&a.kpi_stats, &b.kpi_stats) {
        (Some(sa), Some(sb)) => sa
            .kpis
            .iter()
            .zip(&sb.kpis)
            .map(|(x, y)| percent_change(x.avg, y.avg))
            .collect(),
        _ => Vec::new(),
    };
    Ok(NopComparison {
        schema_version: REPORT_SCHEMA_VERSION,
        decision_names: cloud.map(|c| c.decision_names.clone()).unwrap_or_default(),
        aor_size_change_pct: percent_change(a.size_physical, b.size_physical),
        a,
        b,
        mpar_change_pct,
        kpi_avg_change_pct,
    })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:+.1}%"))
}

impl NopComparison {
    pub fn summary(&self) -> String {
        let mut s = format!("{:<22}{:>14}{:>14}{:>10}\n", "", "NOP A", "NOP B", "change");
        s.push_str(&format!(
            "{:<22}{:>14.6}{:>14.6}{:>10}\n",
            "AOR size",
            self.a.size_physical,
            self.b.size_physical,
            pct(self.aor_size_change_pct)
        ));
        for (k, c) in self.mpar_change_pct.iter().enumerate() {
            let name = self.decision_names.get(k).map_or("?", String::as_str);
            s.push_str(&format!(
                "{:<22}{:>14.4}{:>14.4}{:>10}\n",
                format!("MPAR {name} +/-"),
                self.a.mpar[k].half_range,
                self.b.mpar[k].half_range,
                pct(*c)
            ));
        }
        if let (Some(sa), Some(sb)) = (&self.a.kpi_stats, &self.b.kpi_stats) {
            for (k, c) in self.kpi_avg_change_pct.iter().enumerate() {
                s.push_str(&format!(
                    "{:<22}{:>14.4}{:>14.4}{:>10}\n",
                    format!("avg {}", sa.kpis[k].name),
                    sa.kpis[k].avg,
                    sb.kpis[k].avg,
                    pct(*c)
                ));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::convex_hull;
    use crate::model::SphereBenchmark;
    use crate::sampling::{sobol, Bounds};

    fn ball_hull() -> AlphaShape {
        let m = SphereBenchmark::default();
        let pts: Vec<Vec<f64>> = sobol(3, &Bounds::unit(3), 12)
            .unwrap()
            .inputs
            .into_iter()
            .filter(|p| m.is_feasible(p))
            .collect();
        convex_hull(&pts).unwrap()
    }

    #[test]
    fn identical_nops_have_zero_deltas() {
        let shape = ball_hull();
        let nop = [0.5, 0.5, 0.5];
        let c = compare_nops(&shape, &nop, &nop, None, None, &AorSettings::default()).unwrap();
        assert_eq!(c.aor_size_change_pct, Some(0.0));
        assert!(c.mpar_change_pct.iter().all(|v| *v == Some(0.0)));
    }

    #[test]
    fn mpar_deltas_are_equal_across_decisions() {
        let shape = ball_hull();
        let c = compare_nops(
            &shape,
            &[0.5, 0.5, 0.5],
            &[0.58, 0.45, 0.52],
            None,
            None,
            &AorSettings::default(),
        )
        .unwrap();
        let first = c.mpar_change_pct[0].unwrap();
        assert!(first < 0.0);
        for v in &c.mpar_change_pct {
            assert!((v.unwrap() - first).abs() < 1e-9);
        }
    }

    #[test]
    fn percent_change_edge_cases() {
        assert_eq!(percent_change(0.0, 0.0), Some(0.0));
        assert_eq!(percent_change(0.0, 1.0), None);
        assert_eq!(percent_change(4.0, 3.0), Some(-25.0));
    }
}
