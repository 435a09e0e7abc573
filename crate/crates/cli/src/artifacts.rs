//! Artifact names, JSON helpers, timings and the report manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dspace::dsid::DesignProblem;

pub const PROBLEM: &str = "problem.json";
pub const SAMPLES: &str = "samples.csv";
pub const CLOUD: &str = "cloud.csv";
pub const FAILURES: &str = "failures.csv";
pub const CACHE: &str = "run_cache.jsonl";
pub const SURROGATE: &str = "surrogate.json";
pub const SURROGATE_REPORT: &str = "surrogate_report.json";
pub const AOR: &str = "aor.json";
pub const COMPARE: &str = "compare.json";
pub const TIMINGS: &str = "timings.json";
pub const MANIFEST: &str = "manifest.json";
pub const REPORT_DIR: &str = "report";

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

pub fn dsp_file(tag: &str) -> String {
    format!("dsp_{tag}.json")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Hash of the problem definition and seed, identifying a configuration.
pub fn config_hash(problem: &DesignProblem, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(problem.to_json().as_bytes());
    h.update(seed.to_le_bytes());
    hex::encode(h.finalize())
}

/// Stores the wall time of a command in the timings file, kept apart from
/// the results so those stay reproducible byte for byte.
pub fn record_timing(out: &Path, key: &str, seconds: f64) -> Result<()> {
    let path = out.join(TIMINGS);
    let mut map: BTreeMap<String, f64> = fs::read_to_string(&path)
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();
    map.insert(key.to_string(), seconds);
    write_json(&path, &map)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub kind: String,
    pub path: String,
    pub schema_version: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub decisions: Vec<String>,
    pub units: Vec<String>,
    pub artifacts: Vec<ManifestEntry>,
}

/// Known artifacts: kind, file name and schema version of JSON documents.
pub fn known_artifacts() -> Vec<(String, String, Option<u32>)> {
    use dspace::analysis::REPORT_SCHEMA_VERSION;
    use dspace::dsid::RESULT_SCHEMA_VERSION;
    use dspace::surrogate::MLP_SCHEMA_VERSION;
    let mut v = vec![
        ("problem".to_string(), PROBLEM.to_string(), None),
        ("samples".into(), SAMPLES.into(), None),
        ("cloud".into(), CLOUD.into(), None),
        ("failures".into(), FAILURES.into(), None),
        (
            "surrogate".into(),
            SURROGATE.into(),
            Some(MLP_SCHEMA_VERSION),
        ),
        (
            "surrogate_report".into(),
            SURROGATE_REPORT.into(),
            Some(REPORT_SCHEMA_VERSION),
        ),
    ];
    for tag in ["tolerance", "rs", "comb"] {
        v.push((
            format!("dsp_{tag}"),
            dsp_file(tag),
            Some(RESULT_SCHEMA_VERSION),
        ));
    }
    v.push(("aor".into(), AOR.into(), Some(REPORT_SCHEMA_VERSION)));
    v.push((
        "compare".into(),
        COMPARE.into(),
        Some(REPORT_SCHEMA_VERSION),
    ));
    v.push(("timings".into(), TIMINGS.into(), None));
    v
}

/// Copies every existing artifact of `out` into `out/report` and writes the
/// manifest there. Returns the manifest path.
pub fn bundle(out: &Path, problem: &DesignProblem, seed: u64) -> Result<PathBuf> {
    let dir = out.join(REPORT_DIR);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut artifacts = Vec::new();
    for (kind, file, schema_version) in known_artifacts() {
        let src = out.join(&file);
        if src.is_file() {
            fs::copy(&src, dir.join(&file))
                .with_context(|| format!("copying {}", src.display()))?;
            artifacts.push(ManifestEntry {
                kind,
                path: file,
                schema_version,
            });
        }
    }
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        config_hash: config_hash(problem, seed),
        seed,
        decisions: problem.decision_names(),
        units: problem.decisions.iter().map(|d| d.unit.clone()).collect(),
        artifacts,
    };
    let path = dir.join(MANIFEST);
    write_json(&path, &manifest)?;
    Ok(path)
}
