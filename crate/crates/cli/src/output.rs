//! Output files: CSV tables, JSON reports, and the run manifest.
//!
//! CSV dialect: comma separator, `.` decimal point, scientific notation
//! with 17 significant digits, one header row, LF line endings. For a
//! fixed config and seed the CSV bodies are byte-identical across runs
//! and thread counts; wall-clock data is confined to the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;
use thinplate::femcore::SparseSym;
use thinplate::spectra::DecompositionRow;

use crate::Failure;

/// An output directory plus the ledger of files written into it.
pub struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(dir: PathBuf) -> Result<Self, Failure> {
        fs::create_dir_all(&dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir,
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    /// Files written so far, in write order.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn write_text(&mut self, name: &str, body: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, body.as_bytes())
            .with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.write_text(name, &body)
    }
}

/// Reproducibility record written beside every command's outputs: the
/// config digest, component versions, effective parallelism, flags,
/// wall-clock timings, and the list of data files produced.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub versions: BTreeMap<String, String>,
    /// Size of the thread pool the run used.
    pub jobs: usize,
    pub flags: BTreeMap<String, bool>,
    /// Start of the run (Unix epoch, milliseconds).
    pub started_unix_ms: u128,
    pub timings_ms: BTreeMap<String, u128>,
    /// Data files written, in write order (this manifest excluded).
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config_sha256: String) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("thinplate".to_string(), thinplate::VERSION.to_string());
        versions.insert(
            "thinplate-cli".to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        );
        let started_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        Self {
            command: command.to_string(),
            config_sha256,
            versions,
            jobs: rayon::current_num_threads(),
            flags: BTreeMap::new(),
            started_unix_ms,
            timings_ms: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn flag(&mut self, name: &str, value: bool) {
        self.flags.insert(name.to_string(), value);
    }

    /// Write the manifest itself, recording the files written so far.
    pub fn finish(mut self, out: &mut OutDir, timer: Timer) -> Result<(), Failure> {
        self.timings_ms = timer.into_marks();
        self.outputs = out.written().to_vec();
        out.write_json("manifest.json", &self)
    }
}

/// Phase timer: `mark` records the time since the previous mark under the
/// given label, in milliseconds.
pub struct Timer {
    last: Instant,
    marks: BTreeMap<String, u128>,
}

impl Timer {
    pub fn start() -> Self {
        Self {
            last: Instant::now(),
            marks: BTreeMap::new(),
        }
    }

    pub fn mark(&mut self, label: &str) {
        let now = Instant::now();
        let ms = now.duration_since(self.last).as_millis();
        self.marks.insert(label.to_string(), ms);
        self.last = now;
    }

    fn into_marks(self) -> BTreeMap<String, u128> {
        self.marks
    }
}

/// Format a float in the CSV dialect: scientific, 17 significant digits.
pub fn csv_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `spectrum.csv` body: one row per eigenvalue with its solver residual
/// and the L² mass fractions on the plate and channel regions.
pub fn spectrum_csv(values: &[f64], residuals: &[f64], masses: &[(f64, f64)]) -> String {
    let mut out = String::from("index,eigenvalue,residual,mass_omega,mass_channel\n");
    for (i, ((&v, &r), &(mo, mc))) in values.iter().zip(residuals).zip(masses).enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i + 1,
            csv_f64(v),
            csv_f64(r),
            csv_f64(mo),
            csv_f64(mc)
        ));
    }
    out
}

/// `decomposition.csv` body: the per-index comparison rows. Mass and
/// deficiency columns are empty in list-only runs.
pub fn decomposition_csv(rows: &[DecompositionRow]) -> String {
    let opt = |v: Option<f64>| v.map(csv_f64).unwrap_or_default();
    let mut out =
        String::from("index,lambda,reference,tag,deviation,mass_omega,mass_channel,deficiency\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.index,
            csv_f64(row.lambda),
            csv_f64(row.reference),
            row.tag,
            csv_f64(row.deviation),
            opt(row.mass_omega),
            opt(row.mass_channel),
            opt(row.deficiency)
        ));
    }
    out
}

/// Sparse matrix dump: stored upper-triangle entries as `row,col,value`
/// (0-based indices over the free DOFs).
pub fn matrix_csv(matrix: &SparseSym) -> String {
    let mut out = String::from("row,col,value\n");
    for (r, c, v) in matrix.entries() {
        out.push_str(&format!("{r},{c},{}\n", csv_f64(v)));
    }
    out
}
