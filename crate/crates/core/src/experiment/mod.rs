//! Experiment orchestration: configuration, deterministic seeding, the probe
//! pipelines and their on-disk run directories.

mod config;
mod pipelines;
mod seeds;
mod store;

use std::path::Path;

use serde::Serialize;

pub use config::{default_null_menu, ExperimentConfig, MenuEntry};
pub use pipelines::{
    quantile, quartiles, require_run_dir, run_b_sweep, run_multi_probe, run_nullmodel_suite, run_scaling,
    run_single_probe, scaling_table, teacher_target, transmitted_trends, ChainSummary, NullReport, NullRow,
    ProbeSummary, RunOutcome, Teacher, CHAIN_FILE, FRONTIER_FILE, NULLMODEL_FILE, RIDGELINE_FILE, SCALING_FILE,
    TIMING_FILE,
};
pub use seeds::{null_menu_rng, teacher_circuit_seed, teacher_sample_rng, CircuitKey};
pub use store::{
    read_records, BridgeRecord, CellRecord, CircuitRecord, FrontierRecord, Quartiles, Record, RunStore,
    TeacherRecord, CONFIG_FILE, RECORDS_FILE,
};

use crate::error::{invalid, Result};
use crate::grad::VarianceBridge;
use crate::heads::HeadKind;

/// Environment variable overriding the worker-thread count.
pub const WORKERS_ENV: &str = "QGRAD_WORKERS";

/// Runs `f` on a dedicated pool when `QGRAD_WORKERS` is set, else on the
/// global pool. Results do not depend on the worker count.
pub fn with_workers<T, F>(f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> Result<T> + Send,
{
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return f();
    };
    let workers: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&w| w >= 1)
        .ok_or_else(|| invalid!("{WORKERS_ENV} must be a positive integer, got {raw:?}"))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid!("cannot start {workers} workers: {e}"))?;
    pool.install(f)
}

#[derive(Debug, Clone, Serialize)]
pub struct FrontierLine {
    pub b: usize,
    pub n: usize,
    pub head: HeadKind,
    pub width: usize,
    pub m_star: Option<u64>,
    pub resolved_exact_median: f64,
    pub resolved_finite_median: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BridgeLine {
    pub b: usize,
    pub n: usize,
    pub head: HeadKind,
    #[serde(flatten)]
    pub bridge: VarianceBridge,
}

/// Summary of a run directory, rebuilt from its journal.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub checksum: String,
    pub probe: String,
    pub records: usize,
    pub circuits: usize,
    pub cells: usize,
    pub frontiers: Vec<FrontierLine>,
    pub bridges: Vec<BridgeLine>,
    pub files: Vec<String>,
}

pub fn report(run_dir: &Path) -> Result<RunReport> {
    require_run_dir(run_dir)?;
    let (config, records) = read_records(run_dir)?;
    let mut report = RunReport {
        checksum: config.checksum()?,
        probe: config.probe.to_string(),
        records: records.len(),
        circuits: 0,
        cells: 0,
        frontiers: Vec::new(),
        bridges: Vec::new(),
        files: Vec::new(),
    };
    for r in &records {
        match r {
            Record::Circuit(_) => report.circuits += 1,
            Record::Cell(_) => report.cells += 1,
            Record::Frontier(f) => report.frontiers.push(FrontierLine {
                b: f.b,
                n: f.frontier.n,
                head: f.frontier.head,
                width: f.width,
                m_star: f.frontier.m_star,
                resolved_exact_median: f.resolved_exact.median,
                resolved_finite_median: f.resolved_finite,
            }),
            Record::Bridge(v) => report.bridges.push(BridgeLine {
                b: v.b,
                n: v.n,
                head: v.head,
                bridge: v.bridge.clone(),
            }),
            Record::Teacher(_) => {}
        }
    }
    let mut files: Vec<String> = std::fs::read_dir(run_dir)
        .map_err(|e| crate::Error::io(run_dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    report.files = files;
    Ok(report)
}
