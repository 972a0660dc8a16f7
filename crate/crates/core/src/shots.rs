//! Finite-shot gradient estimators and the reliability (MedSNR) and fidelity
//! (MedRelBias) statistics that define accepted shot frontiers.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{ensure, invalid, Result};
use crate::heads::{l2, HeadKind, LossHead};
use crate::interface::{exact_features, resample, FeatureVector, Interface};
use crate::qsim::{ParamCircuit, QuantumState};

/// Stabilizer in the relative-bias denominator.
pub const REL_BIAS_EPS: f64 = 1e-12;
pub const DEFAULT_KAPPA: f64 = 2.0;
pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    Single,
    Multi,
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbeKind::Single => "single",
            ProbeKind::Multi => "multi",
        })
    }
}

/// One repetition's gradient estimate over the probed coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotEstimate {
    pub circuit_id: usize,
    pub repetition: usize,
    pub shots: u64,
    pub value: Vec<f64>,
    /// `‖ĝ_F‖` at the base-point estimate, kept for distribution exports.
    pub feature_gradient_norm: f64,
}

/// Exact feature distributions at every point the shift-rule estimator
/// samples: the base point and `θ ± π/2` on each occurrence of each probed
/// parameter.
#[derive(Debug, Clone)]
pub struct ShiftPoints {
    pub base: FeatureVector,
    /// Per probed parameter, one `(plus, minus)` pair per carrying gate.
    pub shifted: Vec<Vec<(FeatureVector, FeatureVector)>>,
}

impl ShiftPoints {
    pub fn compute(
        circuit: &ParamCircuit,
        input: &QuantumState,
        theta: &[f64],
        interface: &Interface,
        subspace: &[usize],
    ) -> Result<Self> {
        ensure!(!subspace.is_empty(), "subspace is empty");
        let base = exact_features(&circuit.run(input, theta)?, interface)?;
        let mut shifted = Vec::with_capacity(subspace.len());
        for &k in subspace {
            ensure!(k < circuit.num_params(), "parameter {k} out of range");
            let mut pairs = Vec::new();
            for gate in circuit.occurrences(k) {
                let plus = circuit.run_with_offset(input, theta, Some((gate, FRAC_PI_2)))?;
                let minus = circuit.run_with_offset(input, theta, Some((gate, -FRAC_PI_2)))?;
                pairs.push((exact_features(&plus, interface)?, exact_features(&minus, interface)?));
            }
            shifted.push(pairs);
        }
        Ok(Self { base, shifted })
    }

    /// Exact `J_{F,S}` (m × |S|) from the stored evaluation points.
    pub fn jacobian(&self) -> DMatrix<f64> {
        let m = self.base.len();
        let columns: Vec<Vec<f64>> = self
            .shifted
            .iter()
            .map(|pairs| {
                let mut col = vec![0.0; m];
                for (plus, minus) in pairs {
                    for ((c, a), b) in col.iter_mut().zip(&plus.values).zip(&minus.values) {
                        *c += 0.5 * (a - b);
                    }
                }
                col
            })
            .collect();
        DMatrix::from_fn(m, columns.len(), |i, j| columns[j][i])
    }

    /// One repetition: fresh `shots`-shot samples at every evaluation point,
    /// `ĝ = Ĵ^⊤ ĝ_F` with `ĝ_F` from the base-point estimate.
    pub fn estimate<H, R>(&self, head: &H, shots: u64, rng: &mut R) -> Result<(Vec<f64>, f64)>
    where
        H: LossHead + ?Sized,
        R: Rng + ?Sized,
    {
        let base = resample(&self.base, shots, rng)?;
        let g_f = head.feature_gradient(&base.values)?;
        let mut value = Vec::with_capacity(self.shifted.len());
        for pairs in &self.shifted {
            let mut acc = 0.0;
            for (plus, minus) in pairs {
                let p = resample(plus, shots, rng)?;
                let m = resample(minus, shots, rng)?;
                acc += p
                    .values
                    .iter()
                    .zip(&m.values)
                    .zip(&g_f)
                    .map(|((a, b), g)| 0.5 * (a - b) * g)
                    .sum::<f64>();
            }
            value.push(acc);
        }
        Ok((value, l2(&g_f)))
    }
}

/// Shift-rule gradient estimate from `shots` samples per evaluation point.
#[allow(clippy::too_many_arguments)]
pub fn finite_shot_gradient<H, R>(
    circuit: &ParamCircuit,
    input: &QuantumState,
    theta: &[f64],
    interface: &Interface,
    head: &H,
    subspace: &[usize],
    shots: u64,
    rng: &mut R,
) -> Result<ShotEstimate>
where
    H: LossHead + ?Sized,
    R: Rng + ?Sized,
{
    ensure!(shots >= 1, "shot budget must be at least 1");
    let points = ShiftPoints::compute(circuit, input, theta, interface, subspace)?;
    let (value, feature_gradient_norm) = points.estimate(head, shots, rng)?;
    Ok(ShotEstimate {
        circuit_id: 0,
        repetition: 0,
        shots,
        value,
        feature_gradient_norm,
    })
}

/// Signal-to-noise ratio; infinite when the sample variance vanishes under
/// a nonzero mean. Serialized as a number, or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snr(pub f64);

impl Snr {
    pub const INFINITE: Snr = Snr(f64::INFINITY);

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Snr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Snr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Snr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Snr(v)),
            Raw::Text(t) if t == "inf" => Ok(Snr::INFINITE),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("invalid SNR {t:?}"))),
        }
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance (`1/(R−1)`).
fn sample_variance(values: &[f64]) -> f64 {
    let mu = mean(values);
    values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (values.len() - 1) as f64
}

fn ratio(signal: f64, variance: f64) -> Snr {
    if variance == 0.0 {
        if signal == 0.0 {
            Snr(0.0)
        } else {
            Snr::INFINITE
        }
    } else {
        Snr(signal / variance.sqrt())
    }
}

/// `|mean| / std` over one circuit's scalar repetitions.
pub fn snr_single(reps: &[f64]) -> Result<Snr> {
    ensure!(reps.len() >= 2, "SNR needs at least 2 repetitions, got {}", reps.len());
    Ok(ratio(mean(reps).abs(), sample_variance(reps)))
}

/// `‖mean‖₂ / √(Σ_j Var_j)` over one circuit's vector repetitions.
pub fn snr_multi(reps: &[Vec<f64>]) -> Result<Snr> {
    ensure!(reps.len() >= 2, "SNR needs at least 2 repetitions, got {}", reps.len());
    let dim = reps[0].len();
    ensure!(reps.iter().all(|r| r.len() == dim), "repetitions have inconsistent lengths");
    let mut signal = 0.0;
    let mut noise = 0.0;
    for j in 0..dim {
        let column: Vec<f64> = reps.iter().map(|r| r[j]).collect();
        let mu = mean(&column);
        signal += mu * mu;
        noise += sample_variance(&column);
    }
    Ok(ratio(signal.sqrt(), noise))
}

/// Median after a total-order sort; infinite values sort above all finite.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 || sorted[mid - 1] == sorted[mid] {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    })
}

/// Repetitions grouped by circuit, in circuit-id order.
pub fn group_by_circuit(estimates: &[ShotEstimate]) -> BTreeMap<usize, Vec<&ShotEstimate>> {
    let mut groups: BTreeMap<usize, Vec<&ShotEstimate>> = BTreeMap::new();
    for e in estimates {
        groups.entry(e.circuit_id).or_default().push(e);
    }
    for reps in groups.values_mut() {
        reps.sort_by_key(|e| e.repetition);
    }
    groups
}

fn median_snr(snrs: Vec<Snr>) -> Result<Snr> {
    let values: Vec<f64> = snrs.into_iter().map(Snr::value).collect();
    median(&values).map(Snr).ok_or_else(|| invalid!("no circuits to summarize"))
}

pub fn med_snr_single(estimates: &[ShotEstimate]) -> Result<Snr> {
    let mut snrs = Vec::new();
    for (c, reps) in group_by_circuit(estimates) {
        ensure!(
            reps.iter().all(|e| e.value.len() == 1),
            "circuit {c}: single-probe estimates must be scalars"
        );
        let values: Vec<f64> = reps.iter().map(|e| e.value[0]).collect();
        snrs.push(snr_single(&values)?);
    }
    median_snr(snrs)
}

pub fn med_snr_multi(estimates: &[ShotEstimate]) -> Result<Snr> {
    let mut snrs = Vec::new();
    for (_, reps) in group_by_circuit(estimates) {
        let values: Vec<Vec<f64>> = reps.iter().map(|e| e.value.clone()).collect();
        snrs.push(snr_multi(&values)?);
    }
    median_snr(snrs)
}

/// Median over circuits of `‖ḡ_c − g_c‖₂ / (‖g_c‖₂ + eps)`.
pub fn med_rel_bias(estimates: &[ShotEstimate], exact: &BTreeMap<usize, Vec<f64>>, eps: f64) -> Result<f64> {
    let mut biases = Vec::new();
    for (c, reps) in group_by_circuit(estimates) {
        let truth = exact
            .get(&c)
            .ok_or_else(|| invalid!("no exact gradient for circuit {c}"))?;
        let dim = truth.len();
        ensure!(
            reps.iter().all(|e| e.value.len() == dim),
            "circuit {c}: estimate length differs from exact gradient length {dim}"
        );
        let count = reps.len() as f64;
        let mut avg = vec![0.0; dim];
        for e in &reps {
            for (a, v) in avg.iter_mut().zip(&e.value) {
                *a += v / count;
            }
        }
        let diff: Vec<f64> = avg.iter().zip(truth).map(|(a, t)| a - t).collect();
        biases.push(l2(&diff) / (l2(truth) + eps));
    }
    median(&biases).ok_or_else(|| invalid!("no circuits to summarize"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub shots: u64,
    pub med_snr: Snr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub med_rel_bias: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierResult {
    pub n: usize,
    pub head: HeadKind,
    pub probe: ProbeKind,
    /// Smallest accepted budget; `None` when no grid point passes.
    pub m_star: Option<u64>,
    pub grid: Vec<FrontierPoint>,
    pub kappa: f64,
    pub tau: f64,
}

impl FrontierResult {
    pub fn attained(&self) -> bool {
        self.m_star.is_some()
    }
}

/// Whether a grid point meets the probe's acceptance thresholds.
pub fn accepts(probe: ProbeKind, point: &FrontierPoint, kappa: f64, tau: f64) -> bool {
    let resolved = point.med_snr.value().total_cmp(&kappa) != Ordering::Less;
    match probe {
        ProbeKind::Single => resolved,
        ProbeKind::Multi => resolved && point.med_rel_bias.is_some_and(|b| b <= tau),
    }
}

/// Smallest grid budget meeting `MedSNR ≥ κ` (single) or additionally
/// `MedRelBias ≤ τ` (multi).
pub fn frontier_search(
    probe: ProbeKind,
    n: usize,
    head: HeadKind,
    grid: Vec<FrontierPoint>,
    kappa: f64,
    tau: f64,
) -> Result<FrontierResult> {
    ensure!(!grid.is_empty(), "shot grid is empty");
    ensure!(
        grid.windows(2).all(|w| w[0].shots < w[1].shots),
        "shot grid must be strictly increasing"
    );
    if probe == ProbeKind::Multi {
        ensure!(
            grid.iter().all(|p| p.med_rel_bias.is_some()),
            "multi-probe frontier needs MedRelBias at every grid point"
        );
    }
    let m_star = grid
        .iter()
        .find(|p| accepts(probe, p, kappa, tau))
        .map(|p| p.shots);
    Ok(FrontierResult {
        n,
        head,
        probe,
        m_star,
        grid,
        kappa,
        tau,
    })
}

/// Powers of two from `2^lo` to `2^hi` inclusive.
pub fn power_of_two_grid(lo: u32, hi: u32) -> Vec<u64> {
    (lo..=hi).map(|e| 1u64 << e).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgelineRow {
    pub circuit_id: usize,
    pub repetition: usize,
    pub shots: u64,
    pub log10_feature_gradient_norm: f64,
    pub log10_transmitted_norm: f64,
}

/// Per-repetition `log10 ‖ĝ_F‖` and `log10 ‖Ĵ^⊤ ĝ_F‖`, grouped by circuit.
pub fn export_ridgeline(estimates: &[ShotEstimate]) -> Result<Vec<RidgelineRow>> {
    ensure!(!estimates.is_empty(), "no estimates to export");
    Ok(group_by_circuit(estimates)
        .into_values()
        .flatten()
        .map(|e| RidgelineRow {
            circuit_id: e.circuit_id,
            repetition: e.repetition,
            shots: e.shots,
            log10_feature_gradient_norm: e.feature_gradient_norm.log10(),
            log10_transmitted_norm: l2(&e.value).log10(),
        })
        .collect())
}
