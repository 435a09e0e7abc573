//! Stiff ODE integration for method-of-lines models.

pub mod band;
mod rosenbrock;

pub use rosenbrock::{banded_jacobian, BandedSystem, Rosenbrock, Stats, Tolerances};

#[derive(Debug, Clone, thiserror::Error)]
pub enum OdeError {
    #[error("step size collapsed to {h:e} at t = {t}")]
    StepSizeCollapse { t: f64, h: f64 },
    #[error("iteration matrix is singular at t = {t}")]
    SingularMatrix { t: f64 },
    #[error("step limit reached at t = {t}")]
    TooManySteps { t: f64 },
}
