//! Process models that map decision vectors to KPI vectors.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chromapcc::{self, ChromaError, ColumnParams, CycleSettings, DecisionVector};
use crate::surrogate::Interpolator;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("expected {expected} decisions, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Chroma(#[from] ChromaError),
    #[error("decision vector {0:?} is not in the table")]
    NotInTable(Vec<f64>),
    #[error("table {path}: {message}")]
    Table { path: String, message: String },
    #[error("invalid model definition: {0}")]
    Invalid(String),
}

/// A deterministic map from decisions to KPIs, safe to call from many
/// threads at once.
pub trait ProcessModel: Sync {
    fn n_inputs(&self) -> usize;
    fn kpi_names(&self) -> Vec<String>;
    fn evaluate(&self, theta: &[f64]) -> Result<Vec<f64>, ModelError>;
}

/// Ball-shaped feasible set in the unit cube with two smooth KPIs.
///
/// `sphere_score = 100 - 10 |theta - center|` is at least `100 - 10 r`
/// exactly on the ball; `ramp = 2 + 4 t1 + 2 t2 (+ t3^2)` is a smooth
/// monotone KPI with no binding constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereBenchmark {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Default for SphereBenchmark {
    fn default() -> Self {
        SphereBenchmark {
            center: vec![0.5; 3],
            radius: 0.35,
        }
    }
}

impl SphereBenchmark {
    pub const SCORE: &'static str = "sphere_score";
    pub const RAMP: &'static str = "ramp";

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Threshold on `sphere_score` that carves out the ball.
    pub fn score_threshold(&self) -> f64 {
        100.0 - 10.0 * self.radius
    }

    fn distance(&self, theta: &[f64]) -> f64 {
        theta
            .iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            .sqrt()
    }

    pub fn kpis(&self, theta: &[f64]) -> [f64; 2] {
        let score = 100.0 - 10.0 * self.distance(theta);
        let mut ramp = 2.0 + 4.0 * theta[0] + 2.0 * theta[1];
        if theta.len() > 2 {
            ramp += theta[2] * theta[2];
        }
        [score, ramp]
    }

    pub fn is_feasible(&self, theta: &[f64]) -> bool {
        self.distance(theta) <= self.radius
    }

    /// Exact measure of the feasible ball (assumed inside the unit cube).
    pub fn feasible_measure(&self) -> f64 {
        let r = self.radius;
        match self.dim() {
            2 => std::f64::consts::PI * r * r,
            _ => 4.0 / 3.0 * std::f64::consts::PI * r * r * r,
        }
    }

    /// Half-width of the largest axis-aligned cube centred at `nop` whose
    /// corners all lie in the ball and in the unit cube.
    pub fn inscribed_half_width(&self, nop: &[f64]) -> f64 {
        let d = self.dim() as f64;
        let a: Vec<f64> = nop
            .iter()
            .zip(&self.center)
            .map(|(p, c)| (p - c).abs())
            .collect();
        let s1: f64 = a.iter().sum();
        let s2: f64 = a.iter().map(|x| x * x).sum();
        // farthest corner: sum (a_k + h)^2 = r^2
        let disc = s1 * s1 - d * (s2 - self.radius * self.radius);
        let h_ball = if disc < 0.0 {
            0.0
        } else {
            ((-s1 + disc.sqrt()) / d).max(0.0)
        };
        nop.iter().fold(h_ball, |h, &p| h.min(p).min(1.0 - p))
    }
}

impl ProcessModel for SphereBenchmark {
    fn n_inputs(&self) -> usize {
        self.dim()
    }

    fn kpi_names(&self) -> Vec<String> {
        vec![Self::SCORE.into(), Self::RAMP.into()]
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Vec<f64>, ModelError> {
        if theta.len() != self.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        Ok(self.kpis(theta).to_vec())
    }
}

impl Interpolator for SphereBenchmark {
    fn n_inputs(&self) -> usize {
        self.dim()
    }

    fn n_outputs(&self) -> usize {
        2
    }

    fn predict(&self, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        inputs.iter().map(|x| self.kpis(x).to_vec()).collect()
    }
}

/// Two-column capture process; decisions are `(c_feed, Q_feed, T_switch)`.
#[derive(Debug, Clone)]
pub struct ChromaModel {
    pub params: ColumnParams,
    pub settings: CycleSettings,
}

impl ChromaModel {
    pub const YIELD: &'static str = "yield";
    pub const PRODUCTIVITY: &'static str = "productivity";
}

impl ProcessModel for ChromaModel {
    fn n_inputs(&self) -> usize {
        3
    }

    fn kpi_names(&self) -> Vec<String> {
        vec![Self::YIELD.into(), Self::PRODUCTIVITY.into()]
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Vec<f64>, ModelError> {
        if theta.len() != 3 {
            return Err(ModelError::DimensionMismatch {
                expected: 3,
                got: theta.len(),
            });
        }
        let r = chromapcc::simulate(
            DecisionVector::from_slice(theta),
            &self.params,
            &self.settings,
        )?;
        if !r.converged {
            log::warn!(
                "{theta:?}: no cyclic steady state after {} cycles",
                r.cycles
            );
        }
        Ok(vec![r.yield_pct, r.productivity])
    }
}

/// KPIs looked up from previously computed rows, keyed by the exact bit
/// pattern of the decision vector.
#[derive(Debug, Clone)]
pub struct TableModel {
    n_inputs: usize,
    kpi_names: Vec<String>,
    rows: HashMap<Vec<u64>, Vec<f64>>,
}

fn key(theta: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 must agree
    theta.iter().map(|v| (v + 0.0).to_bits()).collect()
}

impl TableModel {
    pub fn new(n_inputs: usize, kpi_names: Vec<String>, rows: Vec<(Vec<f64>, Vec<f64>)>) -> Self {
        TableModel {
            n_inputs,
            kpi_names,
            rows: rows.into_iter().map(|(x, y)| (key(&x), y)).collect(),
        }
    }

    /// Reads a CSV whose first `decisions.len()` named columns are the
    /// decisions and whose `kpis` columns hold the values.
    pub fn from_csv(
        path: &Path,
        decisions: &[String],
        kpis: &[String],
    ) -> Result<Self, ModelError> {
        let err = |message: String| ModelError::Table {
            path: path.display().to_string(),
            message,
        };
        let mut rdr = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
        let headers = rdr.headers().map_err(|e| err(e.to_string()))?.clone();
        let col = |name: &String| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| err(format!("missing column {name:?}")))
        };
        let xi: Vec<usize> = decisions.iter().map(col).collect::<Result<_, _>>()?;
        let yi: Vec<usize> = kpis.iter().map(col).collect::<Result<_, _>>()?;
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| err(e.to_string()))?;
            let parse = |i: usize| -> Result<f64, ModelError> {
                rec[i]
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("row {}: bad number {:?}", line + 1, &rec[i])))
            };
            let x = xi
                .iter()
                .map(|&i| parse(i))
                .collect::<Result<Vec<_>, _>>()?;
            let y = yi
                .iter()
                .map(|&i| parse(i))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push((x, y));
        }
        Ok(Self::new(decisions.len(), kpis.to_vec(), rows))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl ProcessModel for TableModel {
    fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    fn kpi_names(&self) -> Vec<String> {
        self.kpi_names.clone()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.rows
            .get(&key(theta))
            .cloned()
            .ok_or_else(|| ModelError::NotInTable(theta.to_vec()))
    }
}

/// Model selection as written in a problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelBinding {
    Benchmark {
        #[serde(default = "default_center")]
        center: Vec<f64>,
        #[serde(default = "default_radius")]
        radius: f64,
    },
    Chromapcc {
        /// Parameter file; the bundled uncalibrated set when absent.
        #[serde(default)]
        params: Option<PathBuf>,
        #[serde(default)]
        nodes: Option<usize>,
        #[serde(default)]
        settings: CycleSettings,
    },
    Table {
        path: PathBuf,
        kpis: Vec<String>,
    },
}

fn default_center() -> Vec<f64> {
    vec![0.5; 3]
}

fn default_radius() -> f64 {
    0.35
}

impl ModelBinding {
    /// Instantiates the model; relative paths resolve against `base_dir`.
    pub fn build(
        &self,
        decisions: &[String],
        base_dir: &Path,
    ) -> Result<Box<dyn ProcessModel>, ModelError> {
        match self {
            ModelBinding::Benchmark { center, radius } => {
                if !(*radius > 0.0) || !(2..=3).contains(&center.len()) {
                    return Err(ModelError::Invalid(
                        "benchmark needs a positive radius and a 2 or 3 entry center".into(),
                    ));
                }
                Ok(Box::new(SphereBenchmark {
                    center: center.clone(),
                    radius: *radius,
                }))
            }
            ModelBinding::Chromapcc {
                params,
                nodes,
                settings,
            } => {
                let mut p = match params {
                    Some(path) => ColumnParams::from_file(&base_dir.join(path))?,
                    None => ColumnParams::uncalibrated_default(),
                };
                if let Some(n) = nodes {
                    p = p.with_nodes(*n);
                }
                p.validate()?;
                Ok(Box::new(ChromaModel {
                    params: p,
                    settings: settings.clone(),
                }))
            }
            ModelBinding::Table { path, kpis } => Ok(Box::new(TableModel::from_csv(
                &base_dir.join(path),
                decisions,
                kpis,
            )?)),
        }
    }

    /// KPI names produced by the bound model, without building it.
    pub fn kpi_names(&self) -> Vec<String> {
        match self {
            ModelBinding::Benchmark { .. } => {
                vec![SphereBenchmark::SCORE.into(), SphereBenchmark::RAMP.into()]
            }
            ModelBinding::Chromapcc { .. } => {
                vec![ChromaModel::YIELD.into(), ChromaModel::PRODUCTIVITY.into()]
            }
            ModelBinding::Table { kpis, .. } => kpis.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn benchmark_kpis_at_known_points() {
        let b = SphereBenchmark::default();
        let k = b.kpis(&[0.5, 0.5, 0.5]);
        assert_eq!(k, [100.0, 5.25]);
        let edge = [0.85, 0.5, 0.5];
        assert!((b.kpis(&edge)[0] - b.score_threshold()).abs() < 1e-12);
        assert!(b.is_feasible(&edge));
        assert!(!b.is_feasible(&[0.86, 0.5, 0.5]));
    }

    #[test]
    fn inscribed_half_width_oracle() {
        let b = SphereBenchmark::default();
        let h = b.inscribed_half_width(&[0.5, 0.5, 0.5]);
        assert!((h - 0.35 / 3f64.sqrt()).abs() < 1e-12);
        // every corner of the cube at h touches the sphere
        let corner = [0.5 + h; 3];
        assert!((b.kpis(&corner)[0] - b.score_threshold()).abs() < 1e-9);
        let off = [0.6, 0.45, 0.5];
        let h = b.inscribed_half_width(&off);
        let far = [0.6 + h, 0.45 - h, 0.5 + h];
        assert!((b.kpis(&far)[0] - b.score_threshold()).abs() < 1e-9);
        assert_eq!(b.inscribed_half_width(&[0.9, 0.5, 0.5]), 0.0);
    }

    #[test]
    fn table_model_reads_csv_and_rejects_unknown_rows() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "a,b,y,z").unwrap();
        writeln!(f, "0.1,0.2,3.0,4.0").unwrap();
        writeln!(f, "0.3,0.4,5.0,6.0").unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        let t = TableModel::from_csv(f.path(), &names, &["z".into(), "y".into()]).unwrap();
        assert_eq!(t.evaluate(&[0.3, 0.4]).unwrap(), vec![6.0, 5.0]);
        assert!(matches!(
            t.evaluate(&[0.3, 0.5]),
            Err(ModelError::NotInTable(_))
        ));
    }

    #[test]
    fn binding_round_trips_through_json() {
        let b: ModelBinding = serde_json::from_str(r#"{"kind":"benchmark"}"#).unwrap();
        assert_eq!(
            b,
            ModelBinding::Benchmark {
                center: vec![0.5; 3],
                radius: 0.35
            }
        );
        let c: ModelBinding = serde_json::from_str(r#"{"kind":"chromapcc","nodes":30}"#).unwrap();
        let m = c.build(&[], Path::new(".")).unwrap();
        assert_eq!(m.kpi_names(), vec!["yield", "productivity"]);
    }
}
