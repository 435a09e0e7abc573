//! Column and isotherm parameters.

use serde::{Deserialize, Serialize};

use super::ChromaError;

const DEFAULT_JSON: &str = include_str!("../../../../params/chromapcc_default.json");

/// Physical parameters of one packed column (both columns are identical).
///
/// Units follow the parameter file: lengths in cm, diffusivities in cm²/s,
/// concentrations in mg/ml, rate constants in ml/(mg·min).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnParams {
    pub length: f64,
    pub diameter: f64,
    pub eps_b: f64,
    pub eps_p: f64,
    pub r_p: f64,
    pub d_m: f64,
    pub d_p: f64,
    pub d_ax: f64,
    pub q_max: f64,
    pub k_a: f64,
    pub k_a1: f64,
    pub k_a2: f64,
    pub n_nodes: usize,
}

impl ColumnParams {
    /// The bundled placeholder parameters (not calibrated against any
    /// published column).
    pub fn uncalibrated_default() -> Self {
        Self::from_json(DEFAULT_JSON).expect("bundled parameter file is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ChromaError> {
        let p: ColumnParams =
            serde_json::from_str(text).map_err(|e| ChromaError::InvalidParams(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ChromaError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ChromaError::InvalidParams(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ChromaError> {
        let bad = |m: &str| Err(ChromaError::InvalidParams(m.to_string()));
        for (name, v) in [("eps_b", self.eps_b), ("eps_p", self.eps_p)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(&format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        for (name, v) in [
            ("length", self.length),
            ("diameter", self.diameter),
            ("r_p", self.r_p),
            ("d_m", self.d_m),
            ("d_p", self.d_p),
            ("q_max", self.q_max),
            ("k_a", self.k_a),
            ("k_a1", self.k_a1),
            ("k_a2", self.k_a2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.d_ax >= 0.0 && self.d_ax.is_finite()) {
            return bad(&format!("d_ax must be non-negative, got {}", self.d_ax));
        }
        if self.n_nodes < 10 {
            return bad(&format!(
                "n_nodes must be at least 10, got {}",
                self.n_nodes
            ));
        }
        Ok(())
    }

    /// Cross-sectional area (cm²).
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.diameter * self.diameter / 4.0
    }

    /// Packed bed volume of one column (ml).
    pub fn column_volume(&self) -> f64 {
        self.area() * self.length
    }

    /// Interstitial velocity (cm/min) at volumetric flow `q` (ml/min).
    pub fn interstitial_velocity(&self, q: f64) -> f64 {
        q / (self.area() * self.eps_b)
    }

    pub fn with_nodes(mut self, n: usize) -> Self {
        self.n_nodes = n;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_defaults_parse_and_validate() {
        let p = ColumnParams::uncalibrated_default();
        assert_eq!(p.n_nodes, 50);
        assert!(p.column_volume() > 0.0);
        assert!(DEFAULT_JSON.contains("UNCALIBRATED"));
    }

    #[test]
    fn rejects_out_of_range_porosity() {
        let mut p = ColumnParams::uncalibrated_default();
        p.eps_b = 1.2;
        assert!(matches!(p.validate(), Err(ChromaError::InvalidParams(_))));
        let mut p = ColumnParams::uncalibrated_default();
        p.n_nodes = 5;
        assert!(p.validate().is_err());
    }
}
