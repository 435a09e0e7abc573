//! The tolerance, resolution-support and combinatorial identification
//! methods.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::alpha_radius::{find_alpha_radius, AlphaOutcome, AlphaSearch};
use super::problem::{DesignProblem, LabeledCloud};
use super::{
    AuditReport, DesignSpaceResult, DsidError, InShapeViolation, IterationRecord, Method,
    RESULT_SCHEMA_VERSION,
};
use crate::geometry::delaunay;
use crate::model::ProcessModel;
use crate::sampling::{sobol_range, Bounds};
use crate::surrogate::Interpolator;

/// Surrogate used to densify the knowledge space, with an optional process
/// model to audit a sample of its predictions.
#[derive(Clone, Copy)]
pub struct Support<'a> {
    pub interpolator: &'a dyn Interpolator,
    pub audit: Option<&'a dyn ProcessModel>,
    pub audit_seed: u64,
}

/// A point of the working clouds with where it came from.
#[derive(Debug, Clone)]
struct Labeled {
    unit: Vec<f64>,
    physical: Vec<f64>,
    kpis: Vec<f64>,
    violated: Vec<usize>,
    predicted: bool,
}

fn split(cloud: &LabeledCloud) -> (Vec<Labeled>, Vec<Labeled>) {
    let mut sat = Vec::new();
    let mut vio = Vec::new();
    for i in 0..cloud.len() {
        let p = Labeled {
            unit: cloud.normalized[i].clone(),
            physical: cloud.decisions[i].clone(),
            kpis: cloud.kpis[i].clone(),
            violated: cloud.violated[i].clone(),
            predicted: false,
        };
        if cloud.satisfied[i] {
            sat.push(p);
        } else {
            vio.push(p);
        }
    }
    (sat, vio)
}

struct Pass {
    outcome: AlphaOutcome,
    record: IterationRecord,
}

fn run_pass(
    problem: &DesignProblem,
    sat: &[Labeled],
    vio: &[Labeled],
    v_max_pct: f64,
    power: Option<u32>,
) -> Result<Pass, DsidError> {
    if sat.is_empty() {
        return Err(DsidError::EmptySatisfied);
    }
    let s = &problem.identify;
    let search = AlphaSearch::normalized(
        problem.dim(),
        v_max_pct,
        s.alpha_bracket,
        s.delta_tol,
        s.iter_max,
    );
    let pts: Vec<&[f64]> = sat.iter().map(|p| p.unit.as_slice()).collect();
    let tri = delaunay(&pts)?;
    let vio_pts: Vec<Vec<f64>> = vio.iter().map(|p| p.unit.clone()).collect();
    let outcome = find_alpha_radius(&tri, &vio_pts, &search)?;
    let record = IterationRecord {
        v_max_pct,
        power,
        n_sat: sat.len(),
        n_vio: vio.len(),
        alpha_radius: outcome.alpha_radius,
        n_regions: outcome.shape.n_regions(),
        v_num: outcome.v_num(),
        max_iterations_hit: outcome.max_iterations_hit,
    };
    log::info!(
        "v_max {v_max_pct:.2}%, power {power:?}: {} regions at alpha {:.5} ({} violated inside)",
        record.n_regions,
        record.alpha_radius,
        record.v_num
    );
    Ok(Pass { outcome, record })
}

#[allow(clippy::too_many_arguments)]
fn build_result(
    problem: &DesignProblem,
    cloud: &LabeledCloud,
    method: Method,
    v_max_pct: f64,
    pass: Pass,
    sat: &[Labeled],
    vio: &[Labeled],
    extra_power: Option<u32>,
    extra_points: usize,
    audit: Option<AuditReport>,
    history: Vec<IterationRecord>,
) -> DesignSpaceResult {
    let bounds = &cloud.bounds;
    let shape = pass
        .outcome
        .shape
        .with_normalization(bounds.normalization());
    let size_normalized = shape.measure();
    let size_physical = size_normalized * bounds.normalization().volume_scale();
    let violated_inside: Vec<InShapeViolation> = pass
        .outcome
        .violated_inside
        .iter()
        .map(|&i| {
            let p = &vio[i];
            InShapeViolation {
                decisions: p.physical.clone(),
                kpis: p.kpis.clone(),
                violated: p
                    .violated
                    .iter()
                    .map(|&c| problem.constraints[c].kpi.clone())
                    .collect(),
                predicted: p.predicted,
            }
        })
        .collect();
    let v_num = violated_inside.len();
    DesignSpaceResult {
        schema_version: RESULT_SCHEMA_VERSION,
        method,
        decision_names: cloud.decision_names.clone(),
        kpi_names: cloud.kpi_names.clone(),
        bounds: bounds.clone(),
        v_max_pct,
        alpha_radius: pass.outcome.alpha_radius,
        alpha_multiplier: pass.outcome.multiplier,
        n_regions: shape.n_regions(),
        n_sat: sat.len(),
        n_vio: vio.len(),
        violation_pct: 100.0 * v_num as f64 / (sat.len() + v_num) as f64,
        violated_inside,
        extra_power,
        extra_points,
        size_normalized,
        size_physical,
        max_iterations_hit: pass.outcome.max_iterations_hit,
        audit,
        history,
        shape: shape.to_document(),
    }
}

/// Raises the violation tolerance along a fixed grid, starting at zero,
/// until the alpha shape of the satisfied points is a single region.
pub fn identify_tolerance(
    problem: &DesignProblem,
    cloud: &LabeledCloud,
) -> Result<DesignSpaceResult, DsidError> {
    let (sat, vio) = split(cloud);
    let s = &problem.identify;
    let mut history = Vec::new();
    let mut step = 0usize;
    loop {
        let v = step as f64 * s.tolerance_step;
        if v > s.tolerance_cap + 1e-9 {
            let last = history.last().map_or(0, |r: &IterationRecord| r.n_regions);
            return Err(DsidError::NoUnifiedShape(format!(
                "{last} regions at the tolerance cap of {:.2}%",
                s.tolerance_cap
            )));
        }
        let pass = run_pass(problem, &sat, &vio, v, None)?;
        history.push(pass.record.clone());
        if pass.record.n_regions == 1 {
            return Ok(build_result(
                problem,
                cloud,
                Method::Tolerance,
                v,
                pass,
                &sat,
                &vio,
                None,
                0,
                None,
                history,
            ));
        }
        step += 1;
    }
}

/// Densifies with `2^k` surrogate-labeled Sobol points for growing `k`
/// until the zero-tolerance shape is a single region.
pub fn identify_resolution_support(
    problem: &DesignProblem,
    cloud: &LabeledCloud,
    support: Support<'_>,
) -> Result<DesignSpaceResult, DsidError> {
    identify_supported(problem, cloud, support, 0.0, Method::ResolutionSupport)
}

/// Like [`identify_resolution_support`] with a nonzero violation tolerance
/// (`v_max_pct`, percent).
pub fn identify_combinatorial(
    problem: &DesignProblem,
    cloud: &LabeledCloud,
    support: Support<'_>,
    v_max_pct: f64,
) -> Result<DesignSpaceResult, DsidError> {
    identify_supported(problem, cloud, support, v_max_pct, Method::Combinatorial)
}

fn identify_supported(
    problem: &DesignProblem,
    cloud: &LabeledCloud,
    support: Support<'_>,
    v_max_pct: f64,
    method: Method,
) -> Result<DesignSpaceResult, DsidError> {
    let dim = problem.dim();
    let interp = support.interpolator;
    if interp.n_inputs() != dim || interp.n_outputs() != cloud.kpi_names.len() {
        return Err(DsidError::InterpolatorMismatch {
            expected: dim,
            got: interp.n_inputs(),
        });
    }
    let s = &problem.identify;
    let (base_sat, base_vio) = split(cloud);
    let offset = problem.extras_offset();
    let unit = Bounds::unit(dim);
    let mut history = Vec::new();
    for k in s.start_power..=s.power_cap {
        let count = 1usize << k;
        let extras_unit = sobol_range(dim, &unit, offset, count)?;
        let extras: Vec<Vec<f64>> = extras_unit.iter().map(|u| cloud.bounds.scale(u)).collect();
        let predicted = interp.predict(&extras);
        let (mut sat, mut vio) = (base_sat.clone(), base_vio.clone());
        for ((u, x), y) in extras_unit.into_iter().zip(extras).zip(predicted) {
            let violated = problem.violated(&cloud.kpi_names, &y)?;
            let p = Labeled {
                unit: u,
                physical: x,
                kpis: y,
                predicted: true,
                violated,
            };
            if p.violated.is_empty() {
                sat.push(p);
            } else {
                vio.push(p);
            }
        }
        let pass = run_pass(problem, &sat, &vio, v_max_pct, Some(k))?;
        history.push(pass.record.clone());
        if pass.record.n_regions == 1 {
            let extra: Vec<&Labeled> = sat.iter().chain(&vio).filter(|p| p.predicted).collect();
            let audit = support.audit.map(|m| {
                audit(
                    problem,
                    cloud,
                    m,
                    &extra,
                    s.audit_fraction,
                    support.audit_seed,
                )
            });
            return Ok(build_result(
                problem,
                cloud,
                method,
                v_max_pct,
                pass,
                &sat,
                &vio,
                Some(k),
                count,
                audit,
                history,
            ));
        }
    }
    let last = history.last().map_or(0, |r| r.n_regions);
    Err(DsidError::NoUnifiedShape(format!(
        "{last} regions with 2^{} extra points",
        s.power_cap
    )))
}

/// Re-evaluates a seeded random share of the predicted points with the
/// process model and counts label disagreements.
fn audit(
    problem: &DesignProblem,
    cloud: &LabeledCloud,
    model: &dyn ProcessModel,
    extra: &[&Labeled],
    fraction: f64,
    seed: u64,
) -> AuditReport {
    let n = ((extra.len() as f64 * fraction).ceil() as usize).min(extra.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, extra.len(), n).into_vec();
    idx.sort_unstable();
    let outcomes: Vec<Option<bool>> = idx
        .par_iter()
        .map(|&i| {
            let p = extra[i];
            let y = model.evaluate(&p.physical).ok()?;
            let truth = problem.violated(&cloud.kpi_names, &y).ok()?.is_empty();
            Some(truth != p.violated.is_empty())
        })
        .collect();
    let report = AuditReport {
        checked: n,
        disagreements: outcomes.iter().filter(|o| **o == Some(true)).count(),
        failures: outcomes.iter().filter(|o| o.is_none()).count(),
    };
    if report.disagreements > 0 {
        log::warn!(
            "surrogate audit: {} of {} re-simulated extra points change label",
            report.disagreements,
            report.checked
        );
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsid::classify;
    use crate::model::SphereBenchmark;
    use crate::sampling::sobol;

    fn benchmark_problem(power: u32) -> DesignProblem {
        DesignProblem::from_json(&format!(
            r#"{{
              "decisions": [{{"name": "x"}}, {{"name": "y"}}, {{"name": "z"}}],
              "bounds": {{"lower": [0, 0, 0], "upper": [1, 1, 1]}},
              "constraints": [{{"kpi": "sphere_score", "direction": ">=", "threshold": 96.5}}],
              "model": {{"kind": "benchmark"}},
              "sampling": {{"power": {power}}}
            }}"#
        ))
        .unwrap()
    }

    fn labeled(problem: &DesignProblem, model: &SphereBenchmark) -> LabeledCloud {
        let x = sobol(3, &problem.bounds().unwrap(), problem.sampling.power)
            .unwrap()
            .inputs;
        let y = x.iter().map(|r| model.evaluate(r).unwrap()).collect();
        classify(problem, &model.kpi_names(), x, y).unwrap()
    }

    #[test]
    fn convex_cloud_unifies_at_zero_tolerance() {
        let p = benchmark_problem(9);
        let m = SphereBenchmark::default();
        let cloud = labeled(&p, &m);
        let r = identify_tolerance(&p, &cloud).unwrap();
        assert_eq!(r.n_regions, 1);
        assert_eq!(r.v_max_pct, 0.0);
        assert!(r.violated_inside.is_empty());
        assert_eq!(r.history.len(), 1);
    }

    #[test]
    fn two_separated_clusters_never_unify() {
        let mut p = benchmark_problem(9);
        p.identify.tolerance_cap = 1.0;
        let x = sobol(3, &p.bounds().unwrap(), 9).unwrap().inputs;
        // satisfied slabs at both ends of x, violated band in between
        let y: Vec<Vec<f64>> = x
            .iter()
            .map(|r| vec![if r[0] < 0.3 || r[0] > 0.7 { 100.0 } else { 0.0 }, 0.0])
            .collect();
        let cloud = classify(&p, &["sphere_score".into(), "ramp".into()], x, y).unwrap();
        assert!(matches!(
            identify_tolerance(&p, &cloud),
            Err(DsidError::NoUnifiedShape(_))
        ));
    }

    #[test]
    fn exact_surrogate_extras_are_nested_and_unify() {
        let p = benchmark_problem(9);
        let m = SphereBenchmark::default();
        let cloud = labeled(&p, &m);
        let support = Support {
            interpolator: &m,
            audit: Some(&m),
            audit_seed: 1,
        };
        let r = identify_resolution_support(&p, &cloud, support).unwrap();
        assert_eq!(r.n_regions, 1);
        assert_eq!(r.extra_power, Some(10));
        assert!(r.violated_inside.is_empty());
        let audit = r.audit.unwrap();
        assert_eq!(audit.disagreements, 0);
        assert!(audit.checked > 0);
        // nesting: extras for power k are a prefix of those for k + 1
        let a = sobol_range(3, &Bounds::unit(3), p.extras_offset(), 1 << 10).unwrap();
        let b = sobol_range(3, &Bounds::unit(3), p.extras_offset(), 1 << 11).unwrap();
        assert_eq!(a[..], b[..1 << 10]);
    }

    #[test]
    fn zero_tolerance_combinatorial_equals_resolution_support() {
        let p = benchmark_problem(9);
        let m = SphereBenchmark::default();
        let cloud = labeled(&p, &m);
        let support = Support {
            interpolator: &m,
            audit: None,
            audit_seed: 0,
        };
        let rs = identify_resolution_support(&p, &cloud, support).unwrap();
        let comb = identify_combinatorial(&p, &cloud, support, 0.0).unwrap();
        assert_eq!(rs.shape, comb.shape);
        assert_eq!(rs.extra_power, comb.extra_power);
        assert_eq!(rs.history, comb.history);
    }
}
