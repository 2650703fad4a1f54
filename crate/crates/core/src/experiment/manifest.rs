use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA: &str = "qdiff-run/1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FAILURE_LOG: &str = "failures.log";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
    /// Tolerances requested or achieved in this stage, by name.
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub point: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master_seed: u64,
    /// Stream seeds of each swept point, keyed by point label.
    pub points: BTreeMap<String, u64>,
    /// HHAA phases or PBRM disorder seeds of the realizations.
    pub realizations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub command: String,
    pub version: String,
    pub workers: usize,
    pub config: ExperimentConfig,
    pub seeds: SeedRecord,
    pub stages: Vec<StageRecord>,
    pub outputs: Vec<OutputRecord>,
    pub failures: Vec<FailureRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        write!(out, "{b:02x}").unwrap();
    }
    out
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Checks the schema tag, re-validates the embedded config and verifies
    /// every recorded output against its hash.
    pub fn validate(&self, dir: &Path) -> Result<()> {
        if self.schema != MANIFEST_SCHEMA {
            return Err(Error::Config {
                path: "manifest.schema".into(),
                reason: format!("expected {MANIFEST_SCHEMA}, found {}", self.schema),
            });
        }
        self.config.validate()?;
        for out in &self.outputs {
            let bytes = fs::read(dir.join(&out.file))?;
            let hash = sha256_hex(&bytes);
            if hash != out.sha256 {
                return Err(Error::Config {
                    path: format!("manifest.outputs.{}", out.file),
                    reason: format!("hash mismatch: recorded {}, found {hash}", out.sha256),
                });
            }
        }
        Ok(())
    }
}

/// Single writer for a run's output directory. Every file goes through
/// [`OutputDir::write`], which records its hash for the manifest.
pub struct OutputDir {
    root: PathBuf,
    gnuplot: bool,
    outputs: Vec<OutputRecord>,
    stages: Vec<StageRecord>,
    failures: Vec<FailureRecord>,
}

impl OutputDir {
    pub fn create(root: &Path, gnuplot: bool) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            gnuplot,
            outputs: Vec::new(),
            stages: Vec::new(),
            failures: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.root.join(name), bytes)?;
        self.outputs.retain(|o| o.file != name);
        self.outputs.push(OutputRecord {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.write(name, &text)
    }

    /// Writes a gnuplot script next to `csv` when scripts were requested.
    /// `plots` are `plot` clauses in terms of column names.
    pub fn gnuplot(&mut self, csv: &str, xlabel: &str, ylabel: &str, logscale: &str, plots: &[String]) -> Result<()> {
        if !self.gnuplot {
            return Ok(());
        }
        let stem = csv.trim_end_matches(".csv");
        let mut s = String::new();
        writeln!(s, "set datafile separator ','").unwrap();
        writeln!(s, "set key autotitle columnhead").unwrap();
        writeln!(s, "set xlabel '{xlabel}'").unwrap();
        writeln!(s, "set ylabel '{ylabel}'").unwrap();
        if !logscale.is_empty() {
            writeln!(s, "set logscale {logscale}").unwrap();
        }
        writeln!(s, "set terminal pngcairo size 900,600").unwrap();
        writeln!(s, "set output '{stem}.png'").unwrap();
        writeln!(s, "plot {}", plots.join(", \\\n     ")).unwrap();
        self.write(&format!("{stem}.gp"), s.as_bytes())
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.stages.push(StageRecord {
            name: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
            tolerances: BTreeMap::new(),
        });
        out
    }

    /// Attaches a tolerance to the most recent stage.
    pub fn tolerance(&mut self, key: &str, value: f64) {
        if let Some(stage) = self.stages.last_mut() {
            let entry = stage.tolerances.entry(key.to_string()).or_insert(value);
            if value > *entry {
                *entry = value;
            }
        }
    }

    pub fn fail(&mut self, point: impl Into<String>, error: &Error) {
        self.failures.push(FailureRecord {
            point: point.into(),
            error: error.to_string(),
        });
    }

    pub fn failures(&self) -> &[FailureRecord] {
        &self.failures
    }

    /// Writes the failure log (if any) and the manifest.
    pub fn finish(mut self, command: &str, workers: usize, config: &ExperimentConfig, seeds: SeedRecord) -> Result<RunManifest> {
        if !self.failures.is_empty() {
            let mut log = String::new();
            for f in &self.failures {
                writeln!(log, "{}\t{}", f.point, f.error).unwrap();
            }
            self.write(FAILURE_LOG, log.as_bytes())?;
        }
        self.outputs.sort_by(|a, b| a.file.cmp(&b.file));
        let manifest = RunManifest {
            schema: MANIFEST_SCHEMA.into(),
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            workers,
            config: config.clone(),
            seeds,
            stages: self.stages,
            outputs: self.outputs,
            failures: self.failures,
        };
        let mut text = serde_json::to_vec_pretty(&manifest)?;
        text.push(b'\n');
        fs::write(self.root.join(MANIFEST_FILE), text)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_input() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
