//! The results table: one CSV row per training run.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::vmc::{RunRecord, RunStatus};

pub const RESULTS_FILE: &str = "results.csv";
pub const STAGING_DIR: &str = "staging";

pub const COLUMNS: [&str; 21] = [
    "config_hash",
    "ansatz",
    "molecule",
    "n_qubits",
    "n_electrons",
    "N_raw",
    "N_k",
    "T",
    "max_unique",
    "B_mean",
    "SF",
    "D_prime",
    "energy",
    "variance",
    "vscore",
    "abs_error",
    "flops_table1",
    "flops_simplified",
    "status",
    "seed",
    "timestamp",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub config_hash: String,
    pub ansatz: String,
    pub molecule: String,
    pub n_qubits: usize,
    pub n_electrons: Option<usize>,
    #[serde(rename = "N_raw")]
    pub n_raw: Option<usize>,
    #[serde(rename = "N_k")]
    pub n_k: Option<f64>,
    #[serde(rename = "T")]
    pub steps: usize,
    pub max_unique: usize,
    #[serde(rename = "B_mean")]
    pub b_mean: Option<f64>,
    #[serde(rename = "SF")]
    pub search_fraction: Option<f64>,
    #[serde(rename = "D_prime")]
    pub d_prime: Option<f64>,
    pub energy: Option<f64>,
    pub variance: Option<f64>,
    pub vscore: Option<f64>,
    pub abs_error: Option<f64>,
    pub flops_table1: Option<f64>,
    pub flops_simplified: Option<f64>,
    pub status: String,
    pub seed: u64,
    pub timestamp: u64,
}

pub fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl ResultRow {
    pub fn from_record(config_hash: &str, molecule: &str, r: &RunRecord) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            ansatz: r.architecture.name().to_string(),
            molecule: molecule.to_string(),
            n_qubits: r.n_qubits,
            n_electrons: r.n_electrons,
            n_raw: Some(r.n_raw),
            n_k: Some(r.n_k),
            steps: r.steps,
            max_unique: r.max_unique,
            b_mean: finite(r.b_mean),
            search_fraction: finite(r.search_fraction),
            d_prime: finite(r.d_prime),
            energy: finite(r.energy),
            variance: finite(r.variance),
            vscore: r.vscore,
            abs_error: r.abs_error,
            flops_table1: finite(r.flops_table1),
            flops_simplified: finite(r.flops_simplified),
            status: r.status.as_str().to_string(),
            seed: r.seed,
            timestamp: now(),
        }
    }

    /// Row for a run that produced no record.
    #[allow(clippy::too_many_arguments)]
    pub fn failed(
        config_hash: &str,
        ansatz: &str,
        molecule: &str,
        n_qubits: usize,
        n_electrons: Option<usize>,
        steps: usize,
        max_unique: usize,
        seed: u64,
    ) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            ansatz: ansatz.to_string(),
            molecule: molecule.to_string(),
            n_qubits,
            n_electrons,
            n_raw: None,
            n_k: None,
            steps,
            max_unique,
            b_mean: None,
            search_fraction: None,
            d_prime: None,
            energy: None,
            variance: None,
            vscore: None,
            abs_error: None,
            flops_table1: None,
            flops_simplified: None,
            status: RunStatus::Failed.as_str().to_string(),
            seed,
            timestamp: now(),
        }
    }

    pub fn status(&self) -> Option<RunStatus> {
        RunStatus::parse(&self.status)
    }

    /// Completed rows are skipped on resume; failed ones are retried.
    pub fn is_complete(&self) -> bool {
        matches!(self.status(), Some(RunStatus::Ok | RunStatus::Diverged))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ResultsError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: header does not match the results schema")]
    Schema { path: PathBuf },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ResultsError + '_ {
    move |source| ResultsError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ResultsError + '_ {
    move |source| ResultsError::Csv { path: path.to_path_buf(), source }
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>, ResultsError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader.headers().map_err(csv_err(path))?.clone();
    if !header.iter().eq(COLUMNS.iter().copied()) {
        return Err(ResultsError::Schema { path: path.to_path_buf() });
    }
    reader
        .deserialize()
        .collect::<Result<Vec<ResultRow>, _>>()
        .map_err(csv_err(path))
}

fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<(), ResultsError> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for row in rows {
        writer.serialize(row).map_err(csv_err(path))?;
    }
    writer.flush().map_err(io_err(path))
}

/// Appends rows by rewriting the table to a temporary file and renaming it
/// over the original, so readers never observe a partial row.
pub fn append_rows(path: &Path, rows: &[ResultRow]) -> Result<(), ResultsError> {
    let mut all = if path.exists() { read_rows(path)? } else { Vec::new() };
    all.extend_from_slice(rows);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let tmp = path.with_extension("csv.tmp");
    write_rows(&tmp, &all)?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn staging_path(out_dir: &Path, config_hash: &str) -> PathBuf {
    out_dir.join(STAGING_DIR).join(format!("{config_hash}.csv"))
}

/// Writes a single row to its own staging file.
pub fn stage_row(out_dir: &Path, row: &ResultRow) -> Result<PathBuf, ResultsError> {
    let dir = out_dir.join(STAGING_DIR);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let path = staging_path(out_dir, &row.config_hash);
    let tmp = path.with_extension("csv.tmp");
    write_rows(&tmp, std::slice::from_ref(row))?;
    fs::rename(&tmp, &path).map_err(io_err(&path))?;
    Ok(path)
}

/// Moves every staged row into the results table, ordered by `order`
/// (config hashes; unlisted hashes go last, by name), then removes the
/// staging files.
pub fn merge_staged(out_dir: &Path, order: &[String]) -> Result<usize, ResultsError> {
    let dir = out_dir.join(STAGING_DIR);
    if !dir.exists() {
        return Ok(0);
    }
    let mut staged: Vec<(PathBuf, ResultRow)> = Vec::new();
    for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
        let path = entry.map_err(io_err(&dir))?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            for row in read_rows(&path)? {
                staged.push((path.clone(), row));
            }
        }
    }
    let rank = |h: &str| order.iter().position(|o| o == h).unwrap_or(usize::MAX);
    staged.sort_by(|a, b| {
        rank(&a.1.config_hash)
            .cmp(&rank(&b.1.config_hash))
            .then_with(|| a.1.config_hash.cmp(&b.1.config_hash))
    });
    let rows: Vec<ResultRow> = staged.iter().map(|(_, r)| r.clone()).collect();
    if !rows.is_empty() {
        append_rows(&out_dir.join(RESULTS_FILE), &rows)?;
    }
    for (path, _) in &staged {
        fs::remove_file(path).map_err(io_err(path))?;
    }
    Ok(rows.len())
}
