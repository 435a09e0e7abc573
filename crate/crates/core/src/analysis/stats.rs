//! KPI statistics over a region of the decision space.

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::dsid::LabeledCloud;
use crate::geometry::AlphaShape;
use crate::sampling::{sobol, Bounds};
use crate::surrogate::Interpolator;

pub const HISTOGRAM_BINS: usize = 20;

/// A region in physical units.
#[derive(Debug, Clone, Copy)]
pub enum Region<'a> {
    /// An alpha shape carrying its normalization.
    Shape(&'a AlphaShape),
    /// An axis-aligned box.
    Box { lower: &'a [f64], upper: &'a [f64] },
}

impl Region<'_> {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Shape(s) => s.contains(&s.normalization().normalize(x)),
            Region::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(v, (l, u))| l <= v && v <= u),
        }
    }

    /// Bounding box in physical units, `None` for an empty shape.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            Region::Shape(s) => {
                let (lo, hi) = s.bounding_box()?;
                let n = s.normalization();
                Some((n.denormalize(&lo), n.denormalize(&hi)))
            }
            Region::Box { lower, upper } => Some((lower.to_vec(), upper.to_vec())),
        }
    }
}

/// Surrogate densification of a region with `2^power` Sobol points drawn in
/// its bounding box.
#[derive(Clone, Copy)]
pub struct Densify<'a> {
    pub interpolator: &'a dyn Interpolator,
    pub power: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `HISTOGRAM_BINS + 1` equal-width edges over the observed range.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiSummary {
    pub name: String,
    pub min: f64,
    pub avg: f64,
    pub max: f64,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiStats {
    /// Truth samples inside the region.
    pub samples_before_support: usize,
    /// Samples after adding predicted points (equal when not densified).
    pub samples_after_support: usize,
    pub kpis: Vec<KpiSummary>,
}

impl KpiStats {
    pub fn summary(&self) -> String {
        let mut s = format!("{:<16}{:>12}{:>12}{:>12}\n", "KPI", "min", "avg", "max");
        for k in &self.kpis {
            s.push_str(&format!(
                "{:<16}{:>12.4}{:>12.4}{:>12.4}\n",
                k.name, k.min, k.avg, k.max
            ));
        }
        s.push_str(&format!(
            "samples {} ({} after support)\n",
            self.samples_before_support, self.samples_after_support
        ));
        s
    }
}

fn histogram(values: &[f64], min: f64, max: f64) -> Histogram {
    let width = (max - min) / HISTOGRAM_BINS as f64;
    let edges = (0..=HISTOGRAM_BINS)
        .map(|i| min + width * i as f64)
        .collect();
    let mut counts = vec![0; HISTOGRAM_BINS];
    for &v in values {
        let b = if width > 0.0 {
            (((v - min) / width) as usize).min(HISTOGRAM_BINS - 1)
        } else {
            0
        };
        counts[b] += 1;
    }
    Histogram { edges, counts }
}

/// Summaries of each KPI column over `rows`.
pub fn summarize(names: &[String], rows: &[Vec<f64>]) -> Vec<KpiSummary> {
    names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            let min = col.iter().copied().fold(f64::INFINITY, f64::min);
            let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let avg = col.iter().sum::<f64>() / col.len() as f64;
            KpiSummary {
                name: name.clone(),
                min,
                avg,
                max,
                histogram: histogram(&col, min, max),
            }
        })
        .collect()
}

/// Min, mean, max and a histogram of every KPI over the cloud rows inside
/// `region`, optionally joined by surrogate predictions at extra points.
pub fn kpi_stats(
    region: Region<'_>,
    cloud: &LabeledCloud,
    densify: Option<Densify<'_>>,
) -> Result<KpiStats, AnalysisError> {
    let mut rows: Vec<Vec<f64>> = (0..cloud.len())
        .filter(|&i| region.contains(&cloud.decisions[i]))
        .map(|i| cloud.kpis[i].clone())
        .collect();
    let before = rows.len();
    if let Some(d) = densify {
        if let Some((lo, hi)) = region.bounding_box() {
            let degenerate = lo.iter().zip(&hi).any(|(l, h)| !(h > l));
            if !degenerate {
                let b = Bounds::new(lo, hi)?;
                let pts: Vec<Vec<f64>> = sobol(b.dim(), &b, d.power)?
                    .inputs
                    .into_iter()
                    .filter(|x| region.contains(x))
                    .collect();
                rows.extend(d.interpolator.predict(&pts));
            }
        }
    }
    if rows.is_empty() {
        return Err(AnalysisError::EmptyRegion);
    }
    Ok(KpiStats {
        samples_before_support: before,
        samples_after_support: rows.len(),
        kpis: summarize(&cloud.kpi_names, &rows),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_kpi_collapses_statistics() {
        let rows = vec![vec![3.5]; 10];
        let s = &summarize(&["k".into()], &rows)[0];
        assert_eq!((s.min, s.avg, s.max), (3.5, 3.5, 3.5));
        assert_eq!(s.histogram.counts.iter().sum::<usize>(), 10);
    }

    #[test]
    fn histogram_has_equal_width_bins() {
        let values: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let h = histogram(&values, 0.0, 99.0);
        assert_eq!(h.edges.len(), HISTOGRAM_BINS + 1);
        assert_eq!(h.counts.len(), HISTOGRAM_BINS);
        assert_eq!(h.counts.iter().sum::<usize>(), 100);
        let w: Vec<f64> = h.edges.windows(2).map(|e| e[1] - e[0]).collect();
        assert!(w.iter().all(|x| (x - w[0]).abs() < 1e-12));
        assert_eq!(h.counts[HISTOGRAM_BINS - 1], 5);
    }
}
