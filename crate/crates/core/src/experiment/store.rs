//! Run directories: `config.json`, an append-only `records.jsonl` journal and
//! derived CSV tables.
//!
//! Pipelines emit records in a fixed order. When a run directory already
//! holds a journal, replayed records are checked against it line by line and
//! finished shot cells are served from it instead of being recomputed.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::grad::{ChainRuleRecord, VarianceBridge};
use crate::heads::HeadKind;
use crate::shots::{FrontierResult, ProbeKind, ShotEstimate, Snr};

pub const CONFIG_FILE: &str = "config.json";
pub const RECORDS_FILE: &str = "records.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherRecord {
    pub checksum: String,
    pub b: usize,
    pub n: usize,
    pub seed: u64,
    pub shots: u64,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitRecord {
    pub checksum: String,
    pub probe: ProbeKind,
    pub b: usize,
    pub n: usize,
    pub head: HeadKind,
    pub circuit: usize,
    /// Hex-encoded stream seed for θ and the probed coordinates.
    pub seed: String,
    pub coordinates: Vec<usize>,
    pub exact_gradient: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainRuleRecord>,
}

/// Every repetition of every circuit at one `(n, head, M)` grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub checksum: String,
    pub probe: ProbeKind,
    pub b: usize,
    pub n: usize,
    pub head: HeadKind,
    pub shots: u64,
    pub med_snr: Snr,
    pub med_rel_bias: f64,
    pub estimates: Vec<ShotEstimate>,
}

/// Median and interquartile range over an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRecord {
    pub checksum: String,
    pub b: usize,
    pub width: usize,
    pub frontier: FrontierResult,
    /// Median over circuits of the exact gradient magnitude.
    pub resolved_exact: Quartiles,
    /// Median over circuits of the repetition-averaged estimate's magnitude
    /// at `M*`.
    pub resolved_finite: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeRecord {
    pub checksum: String,
    pub b: usize,
    pub n: usize,
    pub head: HeadKind,
    pub bridge: VarianceBridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Record {
    Teacher(TeacherRecord),
    Circuit(CircuitRecord),
    Cell(CellRecord),
    Frontier(FrontierRecord),
    Bridge(BridgeRecord),
}

impl Record {
    pub fn checksum(&self) -> &str {
        match self {
            Record::Teacher(r) => &r.checksum,
            Record::Circuit(r) => &r.checksum,
            Record::Cell(r) => &r.checksum,
            Record::Frontier(r) => &r.checksum,
            Record::Bridge(r) => &r.checksum,
        }
    }
}

pub struct RunStore {
    dir: PathBuf,
    checksum: String,
    existing: Vec<(String, Record)>,
    cursor: usize,
    journal: File,
    resumed_cells: usize,
}

impl RunStore {
    /// Opens (or creates) the run directory for `pipeline`. An existing
    /// directory must belong to the same configuration.
    pub fn open(config: &ExperimentConfig, pipeline: &str) -> Result<Self> {
        let dir = config.run_dir(pipeline)?;
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let checksum = config.checksum()?;

        let config_path = dir.join(CONFIG_FILE);
        if config_path.exists() {
            let text = fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
            let stored: ExperimentConfig = serde_json::from_str(&text)?;
            let found = stored.checksum()?;
            if found != checksum {
                return Err(Error::ChecksumMismatch {
                    path: config_path,
                    expected: checksum,
                    found,
                });
            }
        } else {
            let mut text = serde_json::to_string_pretty(config)?;
            text.push('\n');
            write_atomic(&config_path, text.as_bytes())?;
        }

        let records_path = dir.join(RECORDS_FILE);
        let existing = load_journal(&records_path, &checksum)?;
        let journal = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&records_path)
            .map_err(|e| Error::io(&records_path, e))?;
        Ok(Self {
            dir,
            checksum,
            existing,
            cursor: 0,
            journal,
            resumed_cells: 0,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    /// Cells served from an earlier, interrupted run.
    pub fn resumed_cells(&self) -> usize {
        self.resumed_cells
    }

    /// The next record, if the journal already holds it and it is the
    /// expected shot cell.
    pub fn cached_cell(&mut self, probe: ProbeKind, b: usize, n: usize, head: HeadKind, shots: u64) -> Option<CellRecord> {
        match self.existing.get(self.cursor) {
            Some((_, Record::Cell(c)))
                if c.probe == probe && c.b == b && c.n == n && c.head == head && c.shots == shots =>
            {
                self.resumed_cells += 1;
                Some(c.clone())
            }
            _ => None,
        }
    }

    /// Appends a record, or checks it against the journal when replaying.
    pub fn emit(&mut self, record: &Record) -> Result<()> {
        let line = serde_json::to_string(record)?;
        if let Some((stored, _)) = self.existing.get(self.cursor) {
            if *stored != line {
                return Err(Error::Numerical(format!(
                    "record {} of {} differs from the resumed journal",
                    self.cursor + 1,
                    self.dir.join(RECORDS_FILE).display()
                )));
            }
        } else {
            let path = self.dir.join(RECORDS_FILE);
            writeln!(self.journal, "{line}")
                .and_then(|_| self.journal.flush())
                .map_err(|e| Error::io(&path, e))?;
        }
        self.cursor += 1;
        Ok(())
    }

    pub fn write_file(&self, name: &str, contents: &str) -> Result<()> {
        write_atomic(&self.dir.join(name), contents.as_bytes())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Complete journal lines; a trailing partial line from a crash is cut off.
fn load_journal(path: &Path, checksum: &str) -> Result<Vec<(String, Record)>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let complete = text.rfind('\n').map_or(0, |i| i + 1);
    if complete < text.len() {
        let file = OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path, e))?;
        file.set_len(complete as u64).map_err(|e| Error::io(path, e))?;
    }
    let mut out = Vec::new();
    for line in text[..complete].lines() {
        let record: Record = serde_json::from_str(line)?;
        if record.checksum() != checksum {
            return Err(Error::ChecksumMismatch {
                path: path.to_path_buf(),
                expected: checksum.to_string(),
                found: record.checksum().to_string(),
            });
        }
        out.push((line.to_string(), record));
    }
    Ok(out)
}

/// Reads every record of a finished or partial run.
pub fn read_records(run_dir: &Path) -> Result<(ExperimentConfig, Vec<Record>)> {
    let config_path = run_dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
    let mut config: ExperimentConfig = serde_json::from_str(&text)?;
    config.out_dir = run_dir
        .parent()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let checksum = config.checksum()?;
    let records_path = run_dir.join(RECORDS_FILE);
    let text = fs::read_to_string(&records_path).map_err(|e| Error::io(&records_path, e))?;
    let mut records = Vec::new();
    for line in text.lines() {
        let record: Record = serde_json::from_str(line)?;
        if record.checksum() != checksum {
            return Err(Error::ChecksumMismatch {
                path: records_path,
                expected: checksum,
                found: record.checksum().to_string(),
            });
        }
        records.push(record);
    }
    Ok((config, records))
}

/// Formats an optional float as a CSV cell.
pub(crate) fn cell<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
