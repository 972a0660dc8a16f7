use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::seeds::{null_menu_rng, teacher_circuit_seed, teacher_sample_rng, CircuitKey};
use super::store::{
    cell, read_records, BridgeRecord, CellRecord, CircuitRecord, FrontierRecord, Quartiles, Record, RunStore,
    TeacherRecord,
};
use crate::error::{ensure, Result};
use crate::grad::{chain_rule_decompose, transpose_apply, variance_bridge_check, ChainRuleReport, SubspaceSketch, VarianceBridge};
use crate::heads::{hex_digest, l2, Head, HeadKind, LossHead};
use crate::interface::{exact_features, resample, FeatureMap, Interface};
use crate::nullmodel::{effective_dimension, exact_overlap, rms_overlap, spectral_menu_row, McEstimate, MenuRow, SpectralShape};
use crate::qsim::{build_student, build_teacher, domain_wall_state, uniform_parameters, ParamCircuit, QuantumState};
use crate::scaling::{delta_aicc_table, ScalingModel, ScalingTable};
use crate::shots::{
    accepts, export_ridgeline, frontier_search, med_rel_bias, med_snr_multi, med_snr_single, median, FrontierPoint,
    FrontierResult, ProbeKind, RidgelineRow, ShiftPoints, ShotEstimate, REL_BIAS_EPS,
};

pub const FRONTIER_FILE: &str = "frontier.csv";
pub const CHAIN_FILE: &str = "chain.csv";
pub const RIDGELINE_FILE: &str = "ridgeline.csv";
pub const SCALING_FILE: &str = "scaling.csv";
pub const NULLMODEL_FILE: &str = "nullmodel.csv";
pub const TIMING_FILE: &str = "timing.json";

/// Teacher target `q` at size `n` on a `b`-block interface.
#[derive(Debug, Clone, PartialEq)]
pub struct Teacher {
    pub n: usize,
    pub b: usize,
    pub seed: u64,
    pub target: Vec<f64>,
}

/// One teacher circuit per `n`, evolved from the domain wall and estimated
/// from `teacher_shots` samples.
pub fn teacher_target(config: &ExperimentConfig, n: usize, b: usize) -> Result<Teacher> {
    let seed = teacher_circuit_seed(config.master_seed, n);
    let circuit = build_teacher(n, seed)?;
    let state = circuit.run(&domain_wall_state(n)?, &[])?;
    let exact = exact_features(&state, &Interface::block_weights(n, b)?)?;
    let mut rng = teacher_sample_rng(config.master_seed, n, b);
    let target = resample(&exact, config.teacher_shots, &mut rng)?.values;
    Ok(Teacher { n, b, seed, target })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub sigma_max: Quartiles,
    pub g_norm: Quartiles,
    pub transmittance: Quartiles,
    pub transmitted_norm: Quartiles,
    pub near_degenerate: usize,
}

/// Ensemble summary for one `(b, n, head)` group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub probe: ProbeKind,
    pub b: usize,
    pub n: usize,
    pub head: HeadKind,
    pub width: usize,
    pub frontier: Option<FrontierResult>,
    pub resolved_exact: Quartiles,
    pub resolved_finite: Option<f64>,
    pub chain: Option<ChainSummary>,
    pub bridge: Option<VarianceBridge>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub checksum: String,
    pub summaries: Vec<ProbeSummary>,
    pub cells_computed: usize,
    pub cells_resumed: usize,
}

impl RunOutcome {
    pub fn summary(&self, b: usize, n: usize, head: HeadKind) -> Option<&ProbeSummary> {
        self.summaries
            .iter()
            .find(|s| s.b == b && s.n == n && s.head == head)
    }
}

/// Linear-interpolation quantile of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    })
}

pub fn quartiles(values: &[f64]) -> Result<Quartiles> {
    ensure!(!values.is_empty(), "no values to summarize");
    Ok(Quartiles {
        q25: quantile(values, 0.25).unwrap_or(f64::NAN),
        median: median(values).unwrap_or(f64::NAN),
        q75: quantile(values, 0.75).unwrap_or(f64::NAN),
    })
}

struct Prepared {
    key: CircuitKey,
    seed: [u8; 32],
    coordinates: Vec<usize>,
    points: ShiftPoints,
    exact: Vec<f64>,
    chain: Option<ChainRuleReport>,
}

struct GroupContext<'a> {
    config: &'a ExperimentConfig,
    probe: ProbeKind,
    b: usize,
    n: usize,
    student: &'a ParamCircuit,
    input: &'a QuantumState,
    interface: &'a Interface,
    teacher: &'a Teacher,
}

struct GroupOutput {
    summary: ProbeSummary,
    ridgeline: Vec<RidgelineRow>,
    cells_computed: usize,
}

fn prepare_circuits(ctx: &GroupContext, head: &Head) -> Result<Vec<Prepared>> {
    let p = ctx.student.num_params();
    (0..ctx.config.circuits)
        .into_par_iter()
        .map(|circuit| {
            let key = CircuitKey {
                probe: ctx.probe,
                b: ctx.b,
                n: ctx.n,
                head: head.kind(),
                circuit,
            };
            let mut rng = key.rng(ctx.config.master_seed);
            let theta = uniform_parameters(p, &mut rng);
            let coordinates = match ctx.probe {
                ProbeKind::Single => vec![rng.random_range(0..p)],
                ProbeKind::Multi => SubspaceSketch::draw(p, ctx.config.subspace, rng.next_u64())?
                    .indices()
                    .to_vec(),
            };
            let points = ShiftPoints::compute(ctx.student, ctx.input, &theta, ctx.interface, &coordinates)?;
            let jacobian = points.jacobian();
            let g = head.feature_gradient(&points.base.values)?;
            let exact = transpose_apply(&jacobian, &g)?;
            let chain = match ctx.probe {
                ProbeKind::Single => None,
                ProbeKind::Multi => Some(chain_rule_decompose(&jacobian, &g)?),
            };
            Ok(Prepared {
                key,
                seed: key.seed(ctx.config.master_seed),
                coordinates,
                points,
                exact,
                chain,
            })
        })
        .collect()
}

fn run_cell(ctx: &GroupContext, head: &Head, prepared: &[Prepared], shots: u64, checksum: &str) -> Result<CellRecord> {
    let reps = ctx.config.reps;
    let jobs: Vec<(usize, usize)> = (0..prepared.len())
        .flat_map(|c| (0..reps).map(move |r| (c, r)))
        .collect();
    let estimates: Vec<ShotEstimate> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let mut rng = prepared[c].key.shot_rng(ctx.config.master_seed, r, shots);
            let (value, feature_gradient_norm) = prepared[c].points.estimate(head, shots, &mut rng)?;
            Ok(ShotEstimate {
                circuit_id: c,
                repetition: r,
                shots,
                value,
                feature_gradient_norm,
            })
        })
        .collect::<Result<_>>()?;
    let exact: BTreeMap<usize, Vec<f64>> = prepared
        .iter()
        .enumerate()
        .map(|(c, p)| (c, p.exact.clone()))
        .collect();
    let med_snr = match ctx.probe {
        ProbeKind::Single => med_snr_single(&estimates)?,
        ProbeKind::Multi => med_snr_multi(&estimates)?,
    };
    Ok(CellRecord {
        checksum: checksum.to_string(),
        probe: ctx.probe,
        b: ctx.b,
        n: ctx.n,
        head: head.kind(),
        shots,
        med_snr,
        med_rel_bias: med_rel_bias(&estimates, &exact, REL_BIAS_EPS)?,
        estimates,
    })
}

/// Median over circuits of the repetition-averaged estimate's norm.
fn resolved_from_cell(cell: &CellRecord) -> Option<f64> {
    let mut sums: BTreeMap<usize, (Vec<f64>, usize)> = BTreeMap::new();
    for e in &cell.estimates {
        let entry = sums
            .entry(e.circuit_id)
            .or_insert_with(|| (vec![0.0; e.value.len()], 0));
        for (a, v) in entry.0.iter_mut().zip(&e.value) {
            *a += v;
        }
        entry.1 += 1;
    }
    let norms: Vec<f64> = sums
        .values()
        .map(|(sum, count)| l2(sum) / *count as f64)
        .collect();
    median(&norms)
}

fn run_group(ctx: &GroupContext, head_kind: HeadKind, store: &mut RunStore) -> Result<GroupOutput> {
    let config = ctx.config;
    let checksum = store.checksum().to_string();
    let head = Head::new(head_kind, ctx.teacher.target.clone(), config.eps)?;
    let prepared = prepare_circuits(ctx, &head)?;
    for p in &prepared {
        store.emit(&Record::Circuit(CircuitRecord {
            checksum: checksum.clone(),
            probe: ctx.probe,
            b: ctx.b,
            n: ctx.n,
            head: head_kind,
            circuit: p.key.circuit,
            seed: hex_digest(&p.seed),
            coordinates: p.coordinates.clone(),
            exact_gradient: p.exact.clone(),
            chain: p.chain.as_ref().map(|c| c.to_record(false)),
        }))?;
    }

    let magnitudes: Vec<f64> = prepared.iter().map(|p| l2(&p.exact)).collect();
    let resolved_exact = quartiles(&magnitudes)?;
    let chain = match ctx.probe {
        ProbeKind::Single => None,
        ProbeKind::Multi => {
            let reports: Vec<&ChainRuleReport> = prepared.iter().filter_map(|p| p.chain.as_ref()).collect();
            let pick = |f: fn(&ChainRuleReport) -> f64| quartiles(&reports.iter().map(|r| f(r)).collect::<Vec<_>>());
            Some(ChainSummary {
                sigma_max: pick(|r| r.sigma_max)?,
                g_norm: pick(|r| r.g_norm)?,
                transmittance: pick(|r| r.transmittance)?,
                transmitted_norm: pick(|r| r.transmitted_norm)?,
                near_degenerate: reports.iter().filter(|r| r.near_degenerate).count(),
            })
        }
    };

    let mut cells_computed = 0;
    let mut frontier = None;
    let mut resolved_finite = None;
    let mut ridgeline = Vec::new();
    let skip_shots = ctx.probe == ProbeKind::Multi && config.exact_only;
    if !skip_shots {
        let mut grid = Vec::new();
        let mut accepted: Option<CellRecord> = None;
        let mut last: Option<CellRecord> = None;
        for &shots in &config.shots_grid {
            let record = match store.cached_cell(ctx.probe, ctx.b, ctx.n, head_kind, shots) {
                Some(c) => c,
                None => {
                    cells_computed += 1;
                    run_cell(ctx, &head, &prepared, shots, &checksum)?
                }
            };
            let record = Record::Cell(record);
            store.emit(&record)?;
            let Record::Cell(record) = record else { unreachable!() };
            let point = FrontierPoint {
                shots,
                med_snr: record.med_snr,
                med_rel_bias: Some(record.med_rel_bias),
            };
            let ok = accepts(ctx.probe, &point, config.kappa, config.tau);
            grid.push(point);
            if ok && accepted.is_none() {
                accepted = Some(record.clone());
            }
            last = Some(record);
            // Multi-probe cells are expensive; the frontier is the first
            // accepted budget, so later cells are not needed.
            if ok && ctx.probe == ProbeKind::Multi {
                break;
            }
        }
        let result = frontier_search(ctx.probe, ctx.n, head_kind, grid, config.kappa, config.tau)?;
        resolved_finite = accepted.as_ref().and_then(resolved_from_cell);
        if ctx.probe == ProbeKind::Multi {
            if let Some(c) = accepted.as_ref().or(last.as_ref()) {
                ridgeline = export_ridgeline(&c.estimates)?;
            }
        }
        store.emit(&Record::Frontier(FrontierRecord {
            checksum: checksum.clone(),
            b: ctx.b,
            width: ctx.interface.width(),
            frontier: result.clone(),
            resolved_exact,
            resolved_finite,
        }))?;
        frontier = Some(result);
    }

    let mut bridge = None;
    if ctx.probe == ProbeKind::Multi && prepared.len() >= 2 {
        let gradients: Vec<Vec<f64>> = prepared.iter().map(|p| p.exact.clone()).collect();
        let factors: Vec<(f64, f64)> = prepared
            .iter()
            .filter_map(|p| p.chain.as_ref().map(|c| (c.sigma_max, c.g_norm)))
            .collect();
        let check = variance_bridge_check(&gradients, &factors)?;
        store.emit(&Record::Bridge(BridgeRecord {
            checksum: checksum.clone(),
            b: ctx.b,
            n: ctx.n,
            head: head_kind,
            bridge: check.clone(),
        }))?;
        bridge = Some(check);
    }

    Ok(GroupOutput {
        summary: ProbeSummary {
            probe: ctx.probe,
            b: ctx.b,
            n: ctx.n,
            head: head_kind,
            width: ctx.interface.width(),
            frontier,
            resolved_exact,
            resolved_finite,
            chain,
            bridge,
        },
        ridgeline,
        cells_computed,
    })
}

fn run_probe(config: &ExperimentConfig, pipeline: &str, b_values: &[usize]) -> Result<RunOutcome> {
    let started = Instant::now();
    let mut store = RunStore::open(config, pipeline)?;
    let checksum = store.checksum().to_string();
    let mut summaries = Vec::new();
    let mut ridge_rows: Vec<(usize, usize, HeadKind, RidgelineRow)> = Vec::new();
    let mut cells_computed = 0;
    for &b in b_values {
        for &n in &config.n_list {
            let teacher = teacher_target(config, n, b)?;
            store.emit(&Record::Teacher(TeacherRecord {
                checksum: checksum.clone(),
                b,
                n,
                seed: teacher.seed,
                shots: config.teacher_shots,
                target: teacher.target.clone(),
            }))?;
            let student = build_student(n, config.depth_for(n))?;
            let input = QuantumState::zero(n)?;
            let interface = Interface::block_weights(n, b)?;
            let ctx = GroupContext {
                config,
                probe: config.probe,
                b,
                n,
                student: &student,
                input: &input,
                interface: &interface,
                teacher: &teacher,
            };
            for &head in &config.heads {
                let out = run_group(&ctx, head, &mut store)?;
                cells_computed += out.cells_computed;
                ridge_rows.extend(out.ridgeline.into_iter().map(|r| (b, n, head, r)));
                summaries.push(out.summary);
            }
        }
    }

    store.write_file(FRONTIER_FILE, &frontier_csv(&summaries))?;
    if config.probe == ProbeKind::Multi {
        store.write_file(CHAIN_FILE, &chain_csv(&summaries))?;
        store.write_file(RIDGELINE_FILE, &ridgeline_csv(&ridge_rows))?;
    }
    let timing = serde_json::json!({
        "pipeline": pipeline,
        "elapsed_seconds": started.elapsed().as_secs_f64(),
        "cells_computed": cells_computed,
        "cells_resumed": store.resumed_cells(),
    });
    store.write_file(TIMING_FILE, &format!("{timing}\n"))?;
    Ok(RunOutcome {
        run_dir: store.dir().to_path_buf(),
        checksum,
        summaries,
        cells_computed,
        cells_resumed: store.resumed_cells(),
    })
}

/// Single-parameter probe: one uniformly chosen coordinate per circuit,
/// MedSNR over the whole shot grid, frontier `M*` and resolved gradients.
pub fn run_single_probe(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    ensure!(config.probe == ProbeKind::Single, "run_single_probe needs probe = single");
    run_probe(config, "single", &[config.b])
}

/// Subspace probe: chain-rule decompositions on `s` random coordinates,
/// variance bridge, joint reliability/fidelity frontier and ridgelines.
pub fn run_multi_probe(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    ensure!(config.probe == ProbeKind::Multi, "run_multi_probe needs probe = multi");
    run_probe(config, "multi", &[config.b])
}

/// Repeats the configured probe at every `b` in `b_list`.
pub fn run_b_sweep(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    let distinct: BTreeSet<_> = config.b_list.iter().collect();
    ensure!(
        distinct.len() >= 2 && distinct.len() == config.b_list.len(),
        "b-sweep needs at least two distinct b values, got {:?}",
        config.b_list
    );
    let min_n = config.n_list[0];
    for &b in &config.b_list {
        ensure!(b >= 1 && b <= min_n, "b = {b} in b_list must lie in 1..={min_n}");
    }
    let pipeline = format!("bsweep-{}", config.probe);
    run_probe(config, &pipeline, &config.b_list)
}

/// Median exact transmitted norm per `(b, head)` and `n`.
pub fn transmitted_trends(records: &[Record]) -> BTreeMap<(usize, HeadKind), Vec<(f64, f64)>> {
    let mut grouped: BTreeMap<(usize, HeadKind), BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for r in records {
        if let Record::Circuit(c) = r {
            if let Some(chain) = &c.chain {
                grouped
                    .entry((c.b, c.head))
                    .or_default()
                    .entry(c.n)
                    .or_default()
                    .push(chain.transmitted_norm);
            }
        }
    }
    grouped
        .into_iter()
        .map(|(key, by_n)| {
            let points = by_n
                .into_iter()
                .filter_map(|(n, v)| median(&v).map(|m| (n as f64, m)))
                .collect();
            (key, points)
        })
        .collect()
}

/// ΔAICc table over the median transmitted-norm trend of each head.
pub fn scaling_table(records: &[Record]) -> Result<ScalingTable> {
    let trends = transmitted_trends(records);
    ensure!(!trends.is_empty(), "source run has no chain-rule reports");
    let multiple_b = trends.keys().map(|(b, _)| b).collect::<BTreeSet<_>>().len() > 1;
    let mut labelled = Vec::new();
    for ((b, head), points) in trends {
        ensure!(
            points.len() >= 4,
            "{head} at b = {b}: scaling needs at least 4 system sizes, got {}",
            points.len()
        );
        let label = if multiple_b { format!("{head}@b{b}") } else { head.to_string() };
        labelled.push((label, points));
    }
    delta_aicc_table(&labelled, &ScalingModel::ALL)
}

/// Classifies the transmitted-gradient trends of a multi-probe run and
/// writes `scaling.csv` next to its records.
pub fn run_scaling(source_run: &Path) -> Result<ScalingTable> {
    let (_, records) = read_records(source_run)?;
    let table = scaling_table(&records)?;
    let path = source_run.join(SCALING_FILE);
    std::fs::write(&path, table.to_csv()).map_err(|e| crate::Error::io(&path, e))?;
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullRow {
    pub menu: MenuRow,
    /// Monte-Carlo estimate of `E[(u·v)²]` for two directions of this shape.
    pub mc: McEstimate,
    /// `1/d_eff`.
    pub closed_form: f64,
    /// Quadrature value of `E[(u·v)²]`.
    pub exact: f64,
    pub z_closed_form: f64,
    pub z_exact: f64,
}

#[derive(Debug, Clone)]
pub struct NullReport {
    pub run_dir: PathBuf,
    pub rows: Vec<NullRow>,
}

/// Evaluates every null-model menu entry and writes `nullmodel.csv`.
pub fn run_nullmodel_suite(config: &ExperimentConfig) -> Result<NullReport> {
    config.validate()?;
    let store = RunStore::open(config, "nullmodel")?;
    let rows: Vec<NullRow> = config
        .null_menu
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            let shape = SpectralShape::build(entry.m, entry.params.clone())?;
            let menu = spectral_menu_row(entry.m, entry.params.clone())?;
            let mut rng = null_menu_rng(config.master_seed, i);
            let report = rms_overlap(&shape, &shape, config.null_samples, &mut rng)?;
            let closed_form = 1.0 / effective_dimension(&shape)?;
            let exact = exact_overlap(&shape, &shape)?;
            Ok(NullRow {
                menu,
                z_closed_form: report.mc.z_score(closed_form),
                z_exact: report.mc.z_score(exact),
                mc: report.mc,
                closed_form,
                exact,
            })
        })
        .collect::<Result<_>>()?;
    store.write_file(NULLMODEL_FILE, &nullmodel_csv(&rows))?;
    Ok(NullReport {
        run_dir: store.dir().to_path_buf(),
        rows,
    })
}

fn frontier_csv(summaries: &[ProbeSummary]) -> String {
    let mut out = String::from(
        "probe,b,n,head,width,m_star,med_snr_at_m_star,med_rel_bias_at_m_star,\
         resolved_exact_q25,resolved_exact_median,resolved_exact_q75,resolved_finite_median\n",
    );
    for s in summaries {
        let at_star = s
            .frontier
            .as_ref()
            .and_then(|f| f.m_star.and_then(|m| f.grid.iter().find(|p| p.shots == m)));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            s.probe,
            s.b,
            s.n,
            s.head,
            s.width,
            cell(s.frontier.as_ref().and_then(|f| f.m_star)),
            cell(at_star.map(|p| p.med_snr)),
            cell(at_star.and_then(|p| p.med_rel_bias)),
            s.resolved_exact.q25,
            s.resolved_exact.median,
            s.resolved_exact.q75,
            cell(s.resolved_finite),
        );
    }
    out
}

fn chain_csv(summaries: &[ProbeSummary]) -> String {
    let mut out = String::from("b,n,head");
    for name in ["sigma_max", "g_norm", "transmittance", "transmitted_norm"] {
        for q in ["q25", "median", "q75"] {
            let _ = write!(out, ",{name}_{q}");
        }
    }
    out.push_str(",near_degenerate,bridge_trace_cov,bridge_bound,bridge_holds\n");
    for s in summaries {
        let Some(c) = &s.chain else { continue };
        let _ = write!(out, "{},{},{}", s.b, s.n, s.head);
        for q in [&c.sigma_max, &c.g_norm, &c.transmittance, &c.transmitted_norm] {
            let _ = write!(out, ",{},{},{}", q.q25, q.median, q.q75);
        }
        let _ = writeln!(
            out,
            ",{},{},{},{}",
            c.near_degenerate,
            cell(s.bridge.as_ref().map(|v| v.trace_cov)),
            cell(s.bridge.as_ref().map(|v| v.bound)),
            cell(s.bridge.as_ref().map(|v| v.holds)),
        );
    }
    out
}

fn ridgeline_csv(rows: &[(usize, usize, HeadKind, RidgelineRow)]) -> String {
    let mut out = String::from(
        "b,n,head,shots,circuit,repetition,log10_feature_gradient_norm,log10_transmitted_norm\n",
    );
    for (b, n, head, r) in rows {
        let _ = writeln!(
            out,
            "{b},{n},{head},{},{},{},{},{}",
            r.shots, r.circuit_id, r.repetition, r.log10_feature_gradient_norm, r.log10_transmitted_norm
        );
    }
    out
}

fn nullmodel_csv(rows: &[NullRow]) -> String {
    let mut out = String::from(
        "kind,m,d_eff,overlap_scale,closed_form,exact,mc_mean,mc_std_error,z_closed_form,z_exact,bound_holds,block_sum\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.menu.kind,
            r.menu.m,
            r.menu.d_eff,
            r.menu.overlap_scale,
            r.closed_form,
            r.exact,
            r.mc.mean,
            r.mc.std_error,
            r.z_closed_form,
            r.z_exact,
            cell(r.menu.bound_holds),
            cell(r.menu.block_sum),
        );
    }
    out
}

/// Resolves a run directory or fails with a descriptive error.
pub fn require_run_dir(path: &Path) -> Result<()> {
    ensure!(
        path.join(super::store::CONFIG_FILE).is_file(),
        "{} is not a run directory (no config.json)",
        path.display()
    );
    Ok(())
}
