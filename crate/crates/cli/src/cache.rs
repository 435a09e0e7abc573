//! Append-only record of finished model evaluations, so an interrupted
//! `run` can pick up where it stopped.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize, Deserialize)]
struct Line {
    key: String,
    kpis: Vec<f64>,
}

pub struct RunCache {
    done: HashMap<String, Vec<f64>>,
    file: Mutex<File>,
}

/// Content key of one evaluation: the model definition and the exact bits
/// of the decision vector.
pub fn key(model: &str, x: &[f64]) -> String {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    for v in x {
        h.update(v.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

impl RunCache {
    /// Loads existing entries; a torn last line from an interrupted run is
    /// ignored.
    pub fn open(path: &Path) -> Result<Self> {
        let mut done = HashMap::new();
        if let Ok(f) = File::open(path) {
            for line in BufReader::new(f).lines() {
                let line = line?;
                if let Ok(l) = serde_json::from_str::<Line>(&line) {
                    done.insert(l.key, l.kpis);
                }
            }
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        // start on a fresh line after a torn write
        if file.metadata()?.len() > 0 {
            writeln!(file)?;
        }
        Ok(RunCache {
            done,
            file: Mutex::new(file),
        })
    }

    pub fn get(&self, key: &str) -> Option<&Vec<f64>> {
        self.done.get(key)
    }

    pub fn store(&self, key: String, kpis: &[f64]) -> Result<()> {
        let text = serde_json::to_string(&Line {
            key,
            kpis: kpis.to_vec(),
        })?;
        let mut f = self.file.lock().expect("cache lock poisoned");
        writeln!(f, "{text}")?;
        f.flush()?;
        Ok(())
    }
}
