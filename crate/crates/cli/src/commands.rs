//! Command implementations.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use dspace::analysis::{analyze_nop, compare_nops, AorReport, AorSettings, REPORT_SCHEMA_VERSION};
use dspace::dsid::{
    classify, identify_combinatorial, identify_resolution_support, identify_tolerance,
    DesignProblem, DesignSpaceResult, LabeledCloud, Support,
};
use dspace::model::ProcessModel;
use dspace::sampling::sobol_with_skip;
use dspace::surrogate::{train, Interpolator, LinearInterpolator, Mlp, TrainConfig, TrainReport};

use crate::artifacts::{self, record_timing, write_json};
use crate::cache::{self, RunCache};
use crate::{Cli, CliError, Command, InterpolatorArg, MethodArg};

struct Ctx<'a> {
    cli: &'a Cli,
    problem: DesignProblem,
    problem_dir: PathBuf,
    out: PathBuf,
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn or_default(&self, given: &Option<PathBuf>, name: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.path(name))
    }

    fn model(&self) -> Result<Box<dyn ProcessModel>> {
        Ok(self
            .problem
            .model
            .build(&self.problem.decision_names(), &self.problem_dir)?)
    }

    fn load_cloud(&self, given: &Option<PathBuf>) -> Result<LabeledCloud> {
        let path = self.or_default(given, artifacts::CLOUD);
        let f = fs::File::open(&path)
            .with_context(|| format!("reading {} (run `dspace run` first)", path.display()))?;
        Ok(LabeledCloud::read_csv(f, &self.problem)?)
    }

    fn load_dsp(&self, given: &Option<PathBuf>) -> Result<DesignSpaceResult> {
        let path = match given {
            Some(p) => p.clone(),
            None => ["tolerance", "rs", "comb"]
                .iter()
                .map(|t| self.path(&artifacts::dsp_file(t)))
                .find(|p| p.is_file())
                .ok_or_else(|| anyhow::anyhow!("no dsp_<method>.json in {}", self.out.display()))?,
        };
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(DesignSpaceResult::from_json(&text)?)
    }
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    let problem_path = cli
        .problem
        .clone()
        .ok_or_else(|| CliError::Config("--problem is required".into()))?;
    let text = fs::read_to_string(&problem_path)
        .map_err(|e| CliError::Config(format!("{}: {e}", problem_path.display())))?;
    let problem = DesignProblem::from_json(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", problem_path.display())))?;
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()).into());
        }
        // a second initialization only happens in tests running commands
        // in-process; the first pool stays in effect
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global();
    }
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let ctx = Ctx {
        cli,
        problem_dir: problem_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
        problem,
        out: cli.out.clone(),
    };
    write_json(&ctx.path(artifacts::PROBLEM), &ctx.problem)?;
    let start = Instant::now();
    let key = match &cli.command {
        Command::Sample { power } => {
            sample(&ctx, *power)?;
            "sample".to_string()
        }
        Command::Run {
            samples,
            max_failure_pct,
        } => {
            run(&ctx, samples, *max_failure_pct)?;
            "run".to_string()
        }
        Command::TrainSurrogate {
            cloud,
            epochs,
            hidden,
            learning_rate,
            batch_size,
        } => {
            let mut cfg = ctx.problem.identify.surrogate.clone();
            if let Some(e) = epochs {
                cfg.epochs = *e;
            }
            if let Some(h) = hidden {
                cfg.hidden = h.clone();
            }
            if let Some(l) = learning_rate {
                cfg.learning_rate = *l;
            }
            if let Some(b) = batch_size {
                cfg.batch_size = *b;
            }
            cfg.seed = cli.seed;
            cfg.validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
            let cloud = ctx.load_cloud(cloud)?;
            train_surrogate(&ctx, &cloud, &cfg)?;
            "train-surrogate".to_string()
        }
        Command::Identify {
            method,
            cloud,
            interpolator,
            surrogate,
            v_max,
        } => {
            identify(&ctx, *method, cloud, *interpolator, surrogate, *v_max)?;
            format!("identify-{}", method_tag(*method))
        }
        Command::Aor { nop, dsp, cloud } => {
            aor(&ctx, nop, dsp, cloud)?;
            "aor".to_string()
        }
        Command::Compare {
            nop_a,
            nop_b,
            dsp,
            cloud,
        } => {
            compare(&ctx, nop_a, nop_b, dsp, cloud)?;
            "compare".to_string()
        }
        Command::Report => {
            record_timing(&ctx.out, "report", 0.0)?;
            let path = artifacts::bundle(&ctx.out, &ctx.problem, cli.seed)?;
            println!("manifest written to {}", path.display());
            return Ok(());
        }
    };
    let secs = start.elapsed().as_secs_f64();
    log::info!("{key} finished in {secs:.2} s");
    record_timing(&ctx.out, &key, secs)
}

fn method_tag(m: MethodArg) -> &'static str {
    match m {
        MethodArg::Tolerance => "tolerance",
        MethodArg::Rs => "rs",
        MethodArg::Comb => "comb",
    }
}

fn sample(ctx: &Ctx, power: Option<u32>) -> Result<()> {
    let p = &ctx.problem;
    let power = power.unwrap_or(p.sampling.power);
    let batch = sobol_with_skip(p.dim(), &p.bounds()?, power, p.sampling.skip)?;
    let path = ctx.path(artifacts::SAMPLES);
    let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    batch.write_csv(&p.decision_names(), f)?;
    println!("{} samples written to {}", batch.len(), path.display());
    Ok(())
}

fn read_samples(path: &Path, names: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = r.headers()?.clone();
    if headers.iter().ne(names.iter().map(String::as_str)) {
        return Err(CliError::Config(format!(
            "{}: columns {:?} do not match the decisions {names:?}",
            path.display(),
            headers.iter().collect::<Vec<_>>()
        ))
        .into());
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{}: bad number", path.display()))?;
        rows.push(row);
    }
    Ok(rows)
}

fn run(ctx: &Ctx, samples: &Option<PathBuf>, max_failure_pct: f64) -> Result<()> {
    let names = ctx.problem.decision_names();
    let samples_path = ctx.or_default(samples, artifacts::SAMPLES);
    if samples.is_none() && !samples_path.is_file() {
        sample(ctx, None)?;
    }
    let rows = read_samples(&samples_path, &names)?;
    let model = ctx.model()?;
    let model_key = serde_json::to_string(&ctx.problem.model)?;
    let cache = RunCache::open(&ctx.path(artifacts::CACHE))?;
    let resumed = rows
        .iter()
        .filter(|x| cache.get(&cache::key(&model_key, x)).is_some())
        .count();
    if resumed > 0 {
        println!(
            "resuming: {resumed} of {} rows already evaluated",
            rows.len()
        );
    }
    let results: Vec<Result<Vec<f64>, String>> = rows
        .par_iter()
        .map(|x| {
            let k = cache::key(&model_key, x);
            if let Some(y) = cache.get(&k) {
                return Ok(y.clone());
            }
            let y = model.evaluate(x).map_err(|e| e.to_string())?;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(format!("non-finite KPI values {y:?}"));
            }
            cache.store(k, &y).map_err(|e| e.to_string())?;
            Ok(y)
        })
        .collect();

    let mut ok_x = Vec::new();
    let mut ok_y = Vec::new();
    let failures_path = ctx.path(artifacts::FAILURES);
    let mut fw = csv::Writer::from_path(&failures_path)?;
    let mut header = names.clone();
    header.push("error".into());
    fw.write_record(&header)?;
    let mut failed = 0;
    for (x, r) in rows.iter().zip(results) {
        match r {
            Ok(y) => {
                ok_x.push(x.clone());
                ok_y.push(y);
            }
            Err(msg) => {
                failed += 1;
                let mut rec: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
                rec.push(msg);
                fw.write_record(&rec)?;
            }
        }
    }
    fw.flush()?;
    let cloud = classify(&ctx.problem, &model.kpi_names(), ok_x, ok_y)?;
    let cloud_path = ctx.path(artifacts::CLOUD);
    cloud.write_csv(fs::File::create(&cloud_path)?)?;
    println!(
        "{} evaluated: {} satisfied, {} violated, {failed} failed; cloud written to {}",
        rows.len(),
        cloud.n_sat(),
        cloud.n_vio(),
        cloud_path.display()
    );
    let pct = if rows.is_empty() {
        0.0
    } else {
        100.0 * failed as f64 / rows.len() as f64
    };
    if pct > max_failure_pct {
        return Err(CliError::ModelFailures {
            failed,
            total: rows.len(),
            limit: max_failure_pct,
        }
        .into());
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct SurrogateReportDocument {
    schema_version: u32,
    kpi_names: Vec<String>,
    config: TrainConfig,
    report: TrainReport,
}

fn train_surrogate(ctx: &Ctx, cloud: &LabeledCloud, cfg: &TrainConfig) -> Result<Mlp> {
    let (net, report) = train(&cloud.decisions, &cloud.kpis, cfg)?;
    fs::write(ctx.path(artifacts::SURROGATE), net.to_json() + "\n")?;
    write_json(
        &ctx.path(artifacts::SURROGATE_REPORT),
        &SurrogateReportDocument {
            schema_version: REPORT_SCHEMA_VERSION,
            kpi_names: cloud.kpi_names.clone(),
            config: cfg.clone(),
            report: report.clone(),
        },
    )?;
    println!(
        "surrogate trained on {} rows, tested on {}",
        report.n_train, report.n_test
    );
    for (name, e) in cloud.kpi_names.iter().zip(&report.test_mpe) {
        println!("  test MPE {name}: {e:.4} %");
    }
    Ok(net)
}

/// Evaluates a process model as an interpolator; failed evaluations give
/// NaN, which no constraint accepts.
struct ModelAsInterpolator<'a> {
    model: &'a dyn ProcessModel,
    n_outputs: usize,
}

impl Interpolator for ModelAsInterpolator<'_> {
    fn n_inputs(&self) -> usize {
        self.model.n_inputs()
    }

    fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    fn predict(&self, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        inputs
            .par_iter()
            .map(|x| {
                self.model
                    .evaluate(x)
                    .unwrap_or_else(|_| vec![f64::NAN; self.n_outputs])
            })
            .collect()
    }
}

fn identify(
    ctx: &Ctx,
    method: MethodArg,
    cloud: &Option<PathBuf>,
    which: InterpolatorArg,
    surrogate: &Option<PathBuf>,
    v_max: Option<f64>,
) -> Result<()> {
    let cloud = ctx.load_cloud(cloud)?;
    let result = match method {
        MethodArg::Tolerance => identify_tolerance(&ctx.problem, &cloud)?,
        MethodArg::Rs | MethodArg::Comb => {
            let model = ctx.model()?;
            let boxed: Box<dyn Interpolator> = match which {
                InterpolatorArg::Mlp => {
                    let path = ctx.or_default(surrogate, artifacts::SURROGATE);
                    if path.is_file() {
                        Box::new(Mlp::from_json(&fs::read_to_string(&path)?)?)
                    } else if surrogate.is_some() {
                        bail!("surrogate file {} not found", path.display());
                    } else {
                        let mut cfg = ctx.problem.identify.surrogate.clone();
                        cfg.seed = ctx.cli.seed;
                        Box::new(train_surrogate(ctx, &cloud, &cfg)?)
                    }
                }
                InterpolatorArg::Linear => {
                    Box::new(LinearInterpolator::new(&cloud.decisions, &cloud.kpis)?)
                }
                InterpolatorArg::Model => Box::new(ModelAsInterpolator {
                    model: model.as_ref(),
                    n_outputs: cloud.kpi_names.len(),
                }),
            };
            let support = Support {
                interpolator: boxed.as_ref(),
                audit: ctx.cli.verify_extras.then_some(model.as_ref()),
                audit_seed: ctx.cli.seed,
            };
            if method == MethodArg::Rs {
                identify_resolution_support(&ctx.problem, &cloud, support)?
            } else {
                let v = v_max.unwrap_or(ctx.problem.identify.comb_v_max);
                identify_combinatorial(&ctx.problem, &cloud, support, v)?
            }
        }
    };
    let path = ctx.path(&artifacts::dsp_file(method_tag(method)));
    fs::write(&path, result.to_json() + "\n")?;
    print!("{}", result.summary());
    println!("design space written to {}", path.display());
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct AorDocument {
    schema_version: u32,
    decision_names: Vec<String>,
    report: AorReport,
}

fn optional_cloud(ctx: &Ctx, given: &Option<PathBuf>) -> Result<Option<LabeledCloud>> {
    let path = ctx.or_default(given, artifacts::CLOUD);
    if given.is_none() && !path.is_file() {
        return Ok(None);
    }
    ctx.load_cloud(&Some(path)).map(Some)
}

fn aor(ctx: &Ctx, nop: &[f64], dsp: &Option<PathBuf>, cloud: &Option<PathBuf>) -> Result<()> {
    let dsp = ctx.load_dsp(dsp)?;
    let shape = dsp.shape()?;
    let cloud = optional_cloud(ctx, cloud)?;
    let report = analyze_nop(&shape, nop, cloud.as_ref(), None, &AorSettings::default())?;
    print!("{}", report.summary(&dsp.decision_names));
    write_json(
        &ctx.path(artifacts::AOR),
        &AorDocument {
            schema_version: REPORT_SCHEMA_VERSION,
            decision_names: dsp.decision_names.clone(),
            report,
        },
    )
}

fn compare(
    ctx: &Ctx,
    nop_a: &[f64],
    nop_b: &[f64],
    dsp: &Option<PathBuf>,
    cloud: &Option<PathBuf>,
) -> Result<()> {
    let dsp = ctx.load_dsp(dsp)?;
    let shape = dsp.shape()?;
    let cloud = optional_cloud(ctx, cloud)?;
    let mut c = compare_nops(
        &shape,
        nop_a,
        nop_b,
        cloud.as_ref(),
        None,
        &AorSettings::default(),
    )?;
    c.decision_names = dsp.decision_names.clone();
    print!("{}", c.summary());
    write_json(&ctx.path(artifacts::COMPARE), &c)
}
