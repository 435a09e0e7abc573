//! Problem definitions and labeled point clouds.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DsidError;
use crate::model::ModelBinding;
use crate::sampling::Bounds;
use crate::surrogate::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub name: String,
    #[serde(default)]
    pub unit: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// `kpi <= threshold` or `kpi >= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub kpi: String,
    pub direction: Direction,
    pub threshold: f64,
}

impl Constraint {
    pub fn holds(&self, value: f64) -> bool {
        match self.direction {
            Direction::AtMost => value <= self.threshold,
            Direction::AtLeast => value >= self.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingPlan {
    /// The knowledge space holds `2^power` Sobol points.
    pub power: u32,
    /// Leading sequence points to drop.
    pub skip: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan { power: 12, skip: 0 }
    }
}

/// Numerical settings of the identification methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdentifySettings {
    /// Bisection bracket for the alpha multiplier.
    pub alpha_bracket: [f64; 2],
    pub delta_tol: f64,
    pub iter_max: usize,
    /// Violation-tolerance grid step of the tolerance method (percent).
    pub tolerance_step: f64,
    /// Largest tolerance tried before giving up (percent).
    pub tolerance_cap: f64,
    pub start_power: u32,
    pub power_cap: u32,
    /// Violation tolerance of the combinatorial method (percent).
    pub comb_v_max: f64,
    /// First Sobol index used for extra points; defaults to the index after
    /// the knowledge-space samples.
    pub extras_offset: Option<u64>,
    /// Fraction of extra points re-simulated when auditing the surrogate.
    pub audit_fraction: f64,
    pub surrogate: TrainConfig,
}

impl Default for IdentifySettings {
    fn default() -> Self {
        IdentifySettings {
            alpha_bracket: [1e-3, 1e3],
            delta_tol: 1e-3,
            iter_max: 50,
            tolerance_step: 0.25,
            tolerance_cap: 5.0,
            start_power: 10,
            power_cap: 16,
            comb_v_max: 0.25,
            extras_offset: None,
            audit_fraction: 0.05,
            surrogate: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Everything needed to sample, evaluate and classify a knowledge space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignProblem {
    pub decisions: Vec<Decision>,
    pub bounds: BoundsSpec,
    pub constraints: Vec<Constraint>,
    pub model: ModelBinding,
    #[serde(default)]
    pub sampling: SamplingPlan,
    #[serde(default)]
    pub identify: IdentifySettings,
}

impl DesignProblem {
    pub fn from_json(text: &str) -> Result<Self, DsidError> {
        let p: DesignProblem =
            serde_json::from_str(text).map_err(|e| DsidError::InvalidProblem(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_file(path: &Path) -> Result<Self, DsidError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn validate(&self) -> Result<(), DsidError> {
        let b = self.bounds()?;
        if b.dim() != self.decisions.len() {
            return Err(DsidError::InvalidProblem(format!(
                "{} decisions but {}-dimensional bounds",
                self.decisions.len(),
                b.dim()
            )));
        }
        if !(2..=3).contains(&b.dim()) {
            return Err(DsidError::InvalidProblem(
                "design spaces are identified in 2 or 3 dimensions".into(),
            ));
        }
        let kpis = self.model.kpi_names();
        for c in &self.constraints {
            if !kpis.contains(&c.kpi) {
                return Err(DsidError::MissingKpi(c.kpi.clone()));
            }
            if !c.threshold.is_finite() {
                return Err(DsidError::InvalidProblem(format!(
                    "threshold of {:?} is not finite",
                    c.kpi
                )));
            }
        }
        let s = &self.identify;
        if !(s.alpha_bracket[0] > 0.0 && s.alpha_bracket[0] < s.alpha_bracket[1]) {
            return Err(DsidError::InvalidProblem(
                "alpha bracket must satisfy 0 < lower < upper".into(),
            ));
        }
        if !(s.delta_tol > 0.0) || s.iter_max == 0 {
            return Err(DsidError::InvalidProblem(
                "bisection tolerance and iterations must be positive".into(),
            ));
        }
        if !(s.tolerance_step > 0.0) || s.start_power == 0 || s.power_cap < s.start_power {
            return Err(DsidError::InvalidProblem(
                "invalid method grid settings".into(),
            ));
        }
        Ok(())
    }

    pub fn bounds(&self) -> Result<Bounds, DsidError> {
        Ok(Bounds::new(
            self.bounds.lower.clone(),
            self.bounds.upper.clone(),
        )?)
    }

    pub fn decision_names(&self) -> Vec<String> {
        self.decisions.iter().map(|d| d.name.clone()).collect()
    }

    pub fn dim(&self) -> usize {
        self.decisions.len()
    }

    /// Index of the first sequence point not used by the knowledge space.
    pub fn extras_offset(&self) -> u64 {
        self.identify
            .extras_offset
            .unwrap_or(self.sampling.skip + (1u64 << self.sampling.power))
    }

    /// Indices of the constraints violated by a KPI row (columns named by
    /// `kpi_names`).
    pub fn violated(&self, kpi_names: &[String], kpis: &[f64]) -> Result<Vec<usize>, DsidError> {
        let mut out = Vec::new();
        for (ci, c) in self.constraints.iter().enumerate() {
            let k = kpi_names
                .iter()
                .position(|n| *n == c.kpi)
                .ok_or_else(|| DsidError::MissingKpi(c.kpi.clone()))?;
            let v = *kpis
                .get(k)
                .ok_or_else(|| DsidError::MissingKpi(c.kpi.clone()))?;
            if !c.holds(v) {
                out.push(ci);
            }
        }
        Ok(out)
    }
}

/// Evaluated knowledge space split into satisfied and violated rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCloud {
    pub decision_names: Vec<String>,
    pub kpi_names: Vec<String>,
    pub bounds: Bounds,
    /// Physical units.
    pub decisions: Vec<Vec<f64>>,
    /// Bounds-normalized copy of `decisions`.
    pub normalized: Vec<Vec<f64>>,
    pub kpis: Vec<Vec<f64>>,
    pub satisfied: Vec<bool>,
    /// Indices into the problem's constraint list, per row.
    pub violated: Vec<Vec<usize>>,
}

impl LabeledCloud {
    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn n_sat(&self) -> usize {
        self.satisfied.iter().filter(|&&s| s).count()
    }

    pub fn n_vio(&self) -> usize {
        self.len() - self.n_sat()
    }

    /// Normalized satisfied and violated points.
    pub fn split_normalized(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut sat = Vec::new();
        let mut vio = Vec::new();
        for (x, &s) in self.normalized.iter().zip(&self.satisfied) {
            if s {
                sat.push(x.clone());
            } else {
                vio.push(x.clone());
            }
        }
        (sat, vio)
    }

    /// Writes decisions, KPIs and a 0/1 `satisfied` column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DsidError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.decision_names.iter().map(String::as_str).collect();
        header.extend(self.kpi_names.iter().map(String::as_str));
        header.push("satisfied");
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.decisions[i].iter().map(|v| format!("{v:?}")).collect();
            rec.extend(self.kpis[i].iter().map(|v| format!("{v:?}")));
            rec.push(if self.satisfied[i] { "1" } else { "0" }.into());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a cloud written by [`LabeledCloud::write_csv`] and re-labels it
    /// against `problem`.
    pub fn read_csv<R: Read>(input: R, problem: &DesignProblem) -> Result<Self, DsidError> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        let names = problem.decision_names();
        let d = names.len();
        if headers.len() < d + 1 || headers.iter().take(d).ne(names.iter().map(String::as_str)) {
            return Err(DsidError::InvalidProblem(
                "cloud columns do not start with the problem's decisions".into(),
            ));
        }
        let kpi_end = if headers.get(headers.len() - 1) == Some("satisfied") {
            headers.len() - 1
        } else {
            headers.len()
        };
        let kpi_names: Vec<String> = headers
            .iter()
            .take(kpi_end)
            .skip(d)
            .map(String::from)
            .collect();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let mut vals = Vec::with_capacity(kpi_end);
            for f in rec.iter().take(kpi_end) {
                vals.push(f.trim().parse::<f64>().map_err(|_| {
                    DsidError::InvalidProblem(format!("cloud row {}: bad number {f:?}", line + 1))
                })?);
            }
            y.push(vals.split_off(d));
            x.push(vals);
        }
        classify(problem, &kpi_names, x, y)
    }
}

/// Labels every row: satisfied exactly when all constraints hold.
pub fn classify(
    problem: &DesignProblem,
    kpi_names: &[String],
    decisions: Vec<Vec<f64>>,
    kpis: Vec<Vec<f64>>,
) -> Result<LabeledCloud, DsidError> {
    if decisions.len() != kpis.len() {
        return Err(DsidError::InvalidProblem(format!(
            "{} decision rows but {} KPI rows",
            decisions.len(),
            kpis.len()
        )));
    }
    let bounds = problem.bounds()?;
    let norm = bounds.normalization();
    let mut satisfied = Vec::with_capacity(kpis.len());
    let mut violated = Vec::with_capacity(kpis.len());
    for (i, row) in kpis.iter().enumerate() {
        if row.len() != kpi_names.len() {
            return Err(DsidError::InvalidProblem(format!(
                "KPI row {i} is incomplete"
            )));
        }
        let v = problem.violated(kpi_names, row)?;
        satisfied.push(v.is_empty());
        violated.push(v);
    }
    let normalized = decisions.iter().map(|x| norm.normalize(x)).collect();
    Ok(LabeledCloud {
        decision_names: problem.decision_names(),
        kpi_names: kpi_names.to_vec(),
        bounds,
        decisions,
        normalized,
        kpis,
        satisfied,
        violated,
    })
}

/// Narrows the decision bounds, keeping the labeled rows that fall inside.
pub fn refine_bounds(
    problem: &DesignProblem,
    cloud: &LabeledCloud,
    lower: Vec<f64>,
    upper: Vec<f64>,
) -> Result<(DesignProblem, LabeledCloud), DsidError> {
    let old = problem.bounds()?;
    let new = Bounds::new(lower.clone(), upper.clone())?;
    if new.dim() != old.dim()
        || (0..old.dim())
            .any(|k| new.lower()[k] < old.lower()[k] || new.upper()[k] > old.upper()[k])
    {
        return Err(DsidError::InvalidBounds(
            "refined bounds must lie within the current bounds".into(),
        ));
    }
    let mut refined = problem.clone();
    refined.bounds = BoundsSpec { lower, upper };
    let keep: Vec<usize> = (0..cloud.len())
        .filter(|&i| new.contains(&cloud.decisions[i]))
        .collect();
    let x = keep.iter().map(|&i| cloud.decisions[i].clone()).collect();
    let y = keep.iter().map(|&i| cloud.kpis[i].clone()).collect();
    let cloud = classify(&refined, &cloud.kpi_names, x, y)?;
    Ok((refined, cloud))
}
