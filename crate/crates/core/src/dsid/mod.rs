//! Design-space identification: problem definition, classification of the
//! evaluated knowledge space and alpha-shape identification methods.

mod alpha_radius;
mod methods;
mod problem;

use serde::{Deserialize, Serialize};

use crate::geometry::{AlphaShape, GeometryError, ShapeDocument};
use crate::sampling::{Bounds, SamplingError};

pub use alpha_radius::{find_alpha_radius, AlphaOutcome, AlphaSearch, BRACKET_REPAIRS};
pub use methods::{
    identify_combinatorial, identify_resolution_support, identify_tolerance, Support,
};
pub use problem::{
    classify, refine_bounds, BoundsSpec, Constraint, Decision, DesignProblem, Direction,
    IdentifySettings, LabeledCloud, SamplingPlan,
};

#[derive(Debug, thiserror::Error)]
pub enum DsidError {
    #[error("no unified shape: {0}")]
    NoUnifiedShape(String),
    #[error("alpha multiplier bracket [{lower}, {upper}] does not meet the violation tolerance at its lower end")]
    BracketInvalid { lower: f64, upper: f64 },
    #[error("no satisfied points to build a shape from")]
    EmptySatisfied,
    #[error("constraint refers to unknown KPI {0:?}")]
    MissingKpi(String),
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("interpolator maps {got} inputs to KPIs, problem has {expected}")]
    InterpolatorMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const RESULT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tolerance,
    ResolutionSupport,
    Combinatorial,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Tolerance => "tolerance",
            Method::ResolutionSupport => "rs",
            Method::Combinatorial => "comb",
        }
    }
}

/// A violated point that ended up inside the identified shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InShapeViolation {
    pub decisions: Vec<f64>,
    pub kpis: Vec<f64>,
    /// Names of the KPIs whose constraints fail.
    pub violated: Vec<String>,
    /// Whether the KPIs come from the interpolator rather than the model.
    pub predicted: bool,
}

/// One pass of a method (one tolerance on the grid or one extra-point power).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub v_max_pct: f64,
    pub power: Option<u32>,
    pub n_sat: usize,
    pub n_vio: usize,
    pub alpha_radius: f64,
    pub n_regions: usize,
    pub v_num: usize,
    pub max_iterations_hit: bool,
}

/// Outcome of a surrogate audit on re-simulated extra points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub checked: usize,
    /// Points whose satisfied label changed under the process model.
    pub disagreements: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpaceResult {
    pub schema_version: u32,
    pub method: Method,
    pub decision_names: Vec<String>,
    pub kpi_names: Vec<String>,
    pub bounds: Bounds,
    pub v_max_pct: f64,
    pub alpha_radius: f64,
    pub alpha_multiplier: f64,
    pub n_regions: usize,
    pub n_sat: usize,
    pub n_vio: usize,
    pub violation_pct: f64,
    pub violated_inside: Vec<InShapeViolation>,
    /// Power of the extra-point batch that produced the shape.
    pub extra_power: Option<u32>,
    pub extra_points: usize,
    /// Measure in bounds-normalized coordinates.
    pub size_normalized: f64,
    /// Measure in physical units (product of decision units).
    pub size_physical: f64,
    pub max_iterations_hit: bool,
    pub audit: Option<AuditReport>,
    pub history: Vec<IterationRecord>,
    /// The alpha shape in normalized coordinates.
    pub shape: ShapeDocument,
}

impl DesignSpaceResult {
    pub fn shape(&self) -> Result<AlphaShape, DsidError> {
        Ok(AlphaShape::from_document(&self.shape)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, DsidError> {
        let r: DesignSpaceResult =
            serde_json::from_str(text).map_err(|e| DsidError::InvalidProblem(e.to_string()))?;
        if r.schema_version != RESULT_SCHEMA_VERSION {
            return Err(DsidError::InvalidProblem(format!(
                "unsupported result schema version {}",
                r.schema_version
            )));
        }
        Ok(r)
    }

    /// Writes the summary table row of this result.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("method            {}\n", self.method.tag()));
        s.push_str(&format!("regions           {}\n", self.n_regions));
        s.push_str(&format!("alpha radius      {:.6}\n", self.alpha_radius));
        s.push_str(&format!("violation limit   {:.2} %\n", self.v_max_pct));
        s.push_str(&format!(
            "violations inside {} ({:.3} %)\n",
            self.violated_inside.len(),
            self.violation_pct
        ));
        s.push_str(&format!("satisfied points  {}\n", self.n_sat));
        match self.extra_power {
            Some(k) => s.push_str(&format!(
                "extra points      {} (2^{k})\n",
                self.extra_points
            )),
            None => s.push_str("extra points      0\n"),
        }
        s.push_str(&format!("size (normalized) {:.6}\n", self.size_normalized));
        s.push_str(&format!("size (physical)   {:.6}\n", self.size_physical));
        if self.max_iterations_hit {
            s.push_str("warning: alpha search hit its iteration limit\n");
        }
        s
    }
}
