//! Parameter-shift feature Jacobians and the three-factor chain-rule
//! decomposition `‖∇L‖ = ‖J_F^⊤ g_F‖`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::heads::{l2, Head, HeadKind, LossHead};
use crate::interface::{exact_features, FeatureMap, Interface};
use crate::qsim::{ParamCircuit, QuantumState};

/// Relative slack allowed on the chain-rule sandwich.
pub const SANDWICH_RTOL: f64 = 1e-9;

/// Sorted set of distinct parameter indices a probe differentiates along.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceSketch {
    indices: Vec<usize>,
    seed: Option<u64>,
}

impl SubspaceSketch {
    /// `size` indices drawn uniformly without replacement from `0..num_params`.
    pub fn draw(num_params: usize, size: usize, seed: u64) -> Result<Self> {
        ensure!(size >= 1, "subspace size must be at least 1");
        ensure!(
            size <= num_params,
            "subspace size {size} exceeds parameter count {num_params}"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut indices = sample_indices(&mut rng, num_params, size).into_vec();
        indices.sort_unstable();
        Ok(Self {
            indices,
            seed: Some(seed),
        })
    }

    pub fn from_indices(mut indices: Vec<usize>, num_params: usize) -> Result<Self> {
        ensure!(!indices.is_empty(), "subspace must contain at least one index");
        indices.sort_unstable();
        ensure!(
            indices.windows(2).all(|w| w[0] != w[1]),
            "subspace indices must be distinct"
        );
        ensure!(
            *indices.last().expect("nonempty") < num_params,
            "subspace index out of range for {num_params} parameters"
        );
        Ok(Self {
            indices,
            seed: None,
        })
    }

    pub fn full(num_params: usize) -> Result<Self> {
        Self::from_indices((0..num_params).collect(), num_params)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn check_subspace(circuit: &ParamCircuit, subspace: &[usize]) -> Result<()> {
    ensure!(!subspace.is_empty(), "subspace is empty");
    for &k in subspace {
        ensure!(
            k < circuit.num_params(),
            "parameter {k} is not a rotation parameter of this circuit ({} parameters)",
            circuit.num_params()
        );
    }
    Ok(())
}

/// Shift-rule derivative `∂E/∂θ_k` of any state functional `E`, summed over
/// every gate that carries θ_k.
fn shift_derivative<F>(
    circuit: &ParamCircuit,
    input: &QuantumState,
    theta: &[f64],
    k: usize,
    eval: &F,
) -> Result<Vec<f64>>
where
    F: Fn(&QuantumState) -> Result<Vec<f64>>,
{
    let mut acc: Option<Vec<f64>> = None;
    for gate in circuit.occurrences(k) {
        let plus = eval(&circuit.run_with_offset(input, theta, Some((gate, FRAC_PI_2)))?)?;
        let minus = eval(&circuit.run_with_offset(input, theta, Some((gate, -FRAC_PI_2)))?)?;
        let col = acc.get_or_insert_with(|| vec![0.0; plus.len()]);
        for ((c, p), m) in col.iter_mut().zip(plus).zip(minus) {
            *c += 0.5 * (p - m);
        }
    }
    Ok(acc.unwrap_or_default())
}

/// Feature Jacobian `J_{F,S}` (m × |S|) by the parameter-shift rule on exact
/// features.
pub fn shift_feature_jacobian(
    circuit: &ParamCircuit,
    input: &QuantumState,
    theta: &[f64],
    interface: &Interface,
    subspace: &[usize],
) -> Result<DMatrix<f64>> {
    check_subspace(circuit, subspace)?;
    ensure!(
        theta.len() == circuit.num_params(),
        "parameter vector has length {}, circuit expects {}",
        theta.len(),
        circuit.num_params()
    );
    let eval = |s: &QuantumState| exact_features(s, interface).map(|f| f.values);
    let columns: Vec<Vec<f64>> = subspace
        .par_iter()
        .map(|&k| shift_derivative(circuit, input, theta, k, &eval))
        .collect::<Result<_>>()?;
    let m = interface.width();
    Ok(DMatrix::from_fn(m, columns.len(), |i, j| columns[j][i]))
}

/// Exact features, Jacobian, head gradient and parameter gradient at θ.
#[derive(Debug, Clone)]
pub struct ExactChain {
    pub features: Vec<f64>,
    pub jacobian: DMatrix<f64>,
    pub feature_gradient: Vec<f64>,
    pub gradient: Vec<f64>,
}

pub fn exact_chain<H: LossHead + ?Sized>(
    circuit: &ParamCircuit,
    input: &QuantumState,
    theta: &[f64],
    interface: &Interface,
    head: &H,
    subspace: &[usize],
) -> Result<ExactChain> {
    let jacobian = shift_feature_jacobian(circuit, input, theta, interface, subspace)?;
    let features = exact_features(&circuit.run(input, theta)?, interface)?.values;
    let feature_gradient = head.feature_gradient(&features)?;
    let gradient = transpose_apply(&jacobian, &feature_gradient)?;
    Ok(ExactChain {
        features,
        jacobian,
        feature_gradient,
        gradient,
    })
}

/// `∇_S L = J_{F,S}^⊤ g_F` at exact features.
pub fn loss_gradient_exact<H: LossHead + ?Sized>(
    circuit: &ParamCircuit,
    input: &QuantumState,
    theta: &[f64],
    interface: &Interface,
    head: &H,
    subspace: &[usize],
) -> Result<Vec<f64>> {
    Ok(exact_chain(circuit, input, theta, interface, head, subspace)?.gradient)
}

pub fn transpose_apply(jacobian: &DMatrix<f64>, g: &[f64]) -> Result<Vec<f64>> {
    ensure!(
        jacobian.nrows() == g.len(),
        "Jacobian has {} rows, feature gradient has {} entries",
        jacobian.nrows(),
        g.len()
    );
    Ok((jacobian.transpose() * DVector::from_column_slice(g)).iter().copied().collect())
}

/// Shift-rule gradient of a scalar state functional, e.g. `⟨ψ|H|ψ⟩`.
pub fn scalar_shift_gradient<F>(
    circuit: &ParamCircuit,
    input: &QuantumState,
    theta: &[f64],
    subspace: &[usize],
    functional: F,
) -> Result<Vec<f64>>
where
    F: Fn(&QuantumState) -> f64 + Sync,
{
    check_subspace(circuit, subspace)?;
    let eval = |s: &QuantumState| Ok(vec![functional(s)]);
    subspace
        .iter()
        .map(|&k| shift_derivative(circuit, input, theta, k, &eval).map(|v| v[0]))
        .collect()
}

/// Diagonal of `H = Σ_j a_j Π_j` in the computational basis, where `Π_j`
/// projects onto the basis states mapped to feature `j`.
pub fn feature_observable_diagonal(interface: &Interface, coefficients: &[f64]) -> Result<Vec<f64>> {
    ensure!(
        coefficients.len() == interface.width(),
        "{} coefficients for an interface of width {}",
        coefficients.len(),
        interface.width()
    );
    let dim = 1usize << interface.num_qubits();
    Ok((0..dim).map(|z| coefficients[interface.feature_index(z)]).collect())
}

pub fn diagonal_expectation(state: &QuantumState, diagonal: &[f64]) -> f64 {
    state
        .amplitudes()
        .iter()
        .zip(diagonal)
        .map(|(a, h)| a.norm_sqr() * h)
        .sum()
}

/// Responsivity, loss-side signal and transmittance of one Jacobian/gradient
/// pair. Construction fails if the chain-rule sandwich is violated.
#[derive(Debug, Clone)]
pub struct ChainRuleReport {
    pub sigma_max: f64,
    pub u_max: Vec<f64>,
    pub g_norm: f64,
    pub transmittance: f64,
    pub transmitted_norm: f64,
    /// Top two singular values closer than `1e-10·σ_max`; `u_max` is then
    /// one arbitrary member of the top singular subspace.
    pub near_degenerate: bool,
    pub jacobian: DMatrix<f64>,
    pub g: Vec<f64>,
}

pub fn chain_rule_decompose(jacobian: &DMatrix<f64>, g: &[f64]) -> Result<ChainRuleReport> {
    let (m, s) = jacobian.shape();
    ensure!(m >= 1 && s >= 1, "Jacobian must be nonempty, got {m}x{s}");
    ensure!(g.len() == m, "feature gradient has {} entries, Jacobian has {m} rows", g.len());
    ensure!(
        g.iter().all(|v| v.is_finite()) && jacobian.iter().all(|v| v.is_finite()),
        "non-finite entries in Jacobian or feature gradient"
    );

    let svd = jacobian.clone().svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let values = &svd.singular_values;
    let top = values.imax();
    let sigma_max = values[top];
    let second = values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let near_degenerate = second.is_finite() && sigma_max - second < 1e-10 * sigma_max;

    let mut u_max: Vec<f64> = u.column(top).iter().copied().collect();
    if let Some(first) = u_max.iter().copied().find(|v| *v != 0.0) {
        if first < 0.0 {
            u_max.iter_mut().for_each(|v| *v = -*v);
        }
    }

    let g_norm = l2(g);
    let transmittance = if g_norm == 0.0 {
        0.0
    } else {
        let dot: f64 = g.iter().zip(&u_max).map(|(a, b)| a * b).sum();
        (dot.abs() / g_norm).min(1.0)
    };
    let transmitted_norm = l2(&transpose_apply(jacobian, g)?);

    let upper = sigma_max * g_norm;
    let lower = sigma_max * transmittance * g_norm;
    let slack = SANDWICH_RTOL * upper;
    if lower > transmitted_norm + slack || transmitted_norm > upper + slack {
        return Err(Error::Numerical(format!(
            "chain-rule sandwich violated: {lower} <= {transmitted_norm} <= {upper}"
        )));
    }

    Ok(ChainRuleReport {
        sigma_max,
        u_max,
        g_norm,
        transmittance,
        transmitted_norm,
        near_degenerate,
        jacobian: jacobian.clone(),
        g: g.to_vec(),
    })
}

impl ChainRuleReport {
    pub fn lower_bound(&self) -> f64 {
        self.sigma_max * self.transmittance * self.g_norm
    }

    pub fn upper_bound(&self) -> f64 {
        self.sigma_max * self.g_norm
    }

    /// Serializable form; raw matrices only when `with_matrices`.
    pub fn to_record(&self, with_matrices: bool) -> ChainRuleRecord {
        ChainRuleRecord {
            sigma_max: self.sigma_max,
            g_norm: self.g_norm,
            transmittance: self.transmittance,
            transmitted_norm: self.transmitted_norm,
            near_degenerate: self.near_degenerate,
            u_max: with_matrices.then(|| self.u_max.clone()),
            jacobian: with_matrices.then(|| {
                self.jacobian
                    .row_iter()
                    .map(|r| r.iter().copied().collect())
                    .collect()
            }),
            g: with_matrices.then(|| self.g.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRuleRecord {
    pub sigma_max: f64,
    pub g_norm: f64,
    pub transmittance: f64,
    pub transmitted_norm: f64,
    pub near_degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_max: Option<Vec<f64>>,
    /// Row-major `m × s`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jacobian: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceBridge {
    pub trace_cov: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Compares `Tr Cov(∇L)` with `mean[(σ_max‖g_F‖)²]` over an ensemble. The
/// covariance is that of the empirical ensemble (normalized by `1/C`), for
/// which the bound holds exactly; `1e-6` relative slack absorbs roundoff.
pub fn variance_bridge_check(gradients: &[Vec<f64>], factors: &[(f64, f64)]) -> Result<VarianceBridge> {
    ensure!(gradients.len() >= 2, "variance bridge needs at least two ensemble members");
    ensure!(
        gradients.len() == factors.len(),
        "{} gradients but {} (σ_max, ‖g‖) pairs",
        gradients.len(),
        factors.len()
    );
    let dim = gradients[0].len();
    ensure!(
        gradients.iter().all(|g| g.len() == dim),
        "gradients have inconsistent dimensions"
    );
    let count = gradients.len() as f64;
    let mut mean = vec![0.0; dim];
    for g in gradients {
        for (m, v) in mean.iter_mut().zip(g) {
            *m += v / count;
        }
    }
    let trace_cov = gradients
        .iter()
        .map(|g| g.iter().zip(&mean).map(|(v, m)| (v - m) * (v - m)).sum::<f64>())
        .sum::<f64>()
        / count;
    let bound = factors.iter().map(|(s, g)| (s * g) * (s * g)).sum::<f64>() / count;
    Ok(VarianceBridge {
        trace_cov,
        bound,
        holds: trace_cov <= bound * (1.0 + 1e-6),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NllProbe {
    pub width: usize,
    pub support: usize,
    pub predicted: f64,
    pub measured: f64,
    /// Same construction under the linear head, `‖q‖₂ = 1/√s`.
    pub linear_norm: f64,
}

/// `p` uniform over `width` outcomes, `q` uniform over the first `support`
/// of them; measures the unsmoothed NLL feature-gradient norm against
/// `width/√support`.
pub fn nll_amplification_probe(width: usize, support: usize) -> Result<NllProbe> {
    ensure!(width >= 1, "interface width must be positive");
    ensure!(support >= 1, "support size must be positive");
    ensure!(support <= width, "support size {support} exceeds interface width {width}");
    let p = vec![1.0 / width as f64; width];
    let mut q = vec![0.0; width];
    q[..support].iter_mut().for_each(|v| *v = 1.0 / support as f64);
    let nll = Head::new(HeadKind::Nll, q.clone(), 0.0)?;
    let linear = Head::new(HeadKind::Linear, q, 0.0)?;
    Ok(NllProbe {
        width,
        support,
        predicted: width as f64 / (support as f64).sqrt(),
        measured: l2(&nll.feature_gradient(&p)?),
        linear_norm: l2(&linear.feature_gradient(&p)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorThresholds {
    pub sigma_max: f64,
    pub g_norm: f64,
    pub transmittance: f64,
}

/// Fraction of reports whose three chain-rule factors all clear their
/// thresholds.
pub fn pbj_factor_check(reports: &[ChainRuleReport], thresholds: FactorThresholds) -> Result<f64> {
    ensure!(!reports.is_empty(), "factor check needs at least one report");
    let FactorThresholds {
        sigma_max,
        g_norm,
        transmittance,
    } = thresholds;
    ensure!(
        sigma_max >= 0.0 && g_norm >= 0.0 && transmittance >= 0.0,
        "factor thresholds must be nonnegative"
    );
    let hits = reports
        .iter()
        .filter(|r| r.sigma_max >= sigma_max && r.g_norm >= g_norm && r.transmittance >= transmittance)
        .count();
    Ok(hits as f64 / reports.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{build_student, uniform_parameters, Angle, Axis, Gate, Role};
    use rand::Rng;

    fn single_ry() -> ParamCircuit {
        ParamCircuit::new(
            1,
            vec![Gate::Rotation {
                axis: Axis::Y,
                qubit: 0,
                angle: Angle::Param(0),
            }],
            1,
            Role::Student,
        )
        .unwrap()
    }

    #[test]
    fn single_rotation_derivatives() {
        let c = single_ry();
        let iface = Interface::full_distribution(1).unwrap();
        let zero = QuantumState::zero(1).unwrap();
        let j0 = shift_feature_jacobian(&c, &zero, &[0.0], &iface, &[0]).unwrap();
        assert!(j0[(1, 0)].abs() < 1e-15);
        let j1 = shift_feature_jacobian(&c, &zero, &[FRAC_PI_2], &iface, &[0]).unwrap();
        assert!((j1[(1, 0)] - 0.5).abs() < 1e-15);
        assert!((j1[(0, 0)] + 0.5).abs() < 1e-15);
        assert!(shift_feature_jacobian(&c, &zero, &[0.0], &iface, &[1]).is_err());
    }

    #[test]
    fn shared_parameters_sum_over_occurrences() {
        let c = ParamCircuit::new(
            1,
            vec![
                Gate::Rotation { axis: Axis::Y, qubit: 0, angle: Angle::Param(0) },
                Gate::Rotation { axis: Axis::Y, qubit: 0, angle: Angle::Param(0) },
            ],
            1,
            Role::Student,
        )
        .unwrap();
        // p(1) = sin²(θ), derivative sin(2θ).
        let iface = Interface::full_distribution(1).unwrap();
        let t = 0.3;
        let j = shift_feature_jacobian(&c, &QuantumState::zero(1).unwrap(), &[t], &iface, &[0]).unwrap();
        assert!((j[(1, 0)] - (2.0 * t).sin()).abs() < 1e-14);
    }

    #[test]
    fn linear_gradient_matches_fixed_observable() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 4;
        let c = build_student(n, 2).unwrap();
        let iface = Interface::block_weights(n, 2).unwrap();
        let theta = uniform_parameters(c.num_params(), &mut rng);
        let raw: Vec<f64> = (0..iface.width()).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let q: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let head = Head::new(HeadKind::Linear, q.clone(), crate::heads::DEFAULT_EPS).unwrap();
        let input = QuantumState::zero(n).unwrap();
        let all: Vec<usize> = (0..c.num_params()).collect();
        let chain = loss_gradient_exact(&c, &input, &theta, &iface, &head, &all).unwrap();
        let coeffs: Vec<f64> = q.iter().map(|v| -v).collect();
        let diag = feature_observable_diagonal(&iface, &coeffs).unwrap();
        let direct = scalar_shift_gradient(&c, &input, &theta, &all, |s| diagonal_expectation(s, &diag)).unwrap();
        for (a, b) in chain.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_feature_gradient_gives_zero() {
        let j = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(transpose_apply(&j, &[0.0; 3]).unwrap(), vec![0.0, 0.0]);
        let r = chain_rule_decompose(&j, &[0.0; 3]).unwrap();
        assert_eq!(r.transmittance, 0.0);
        assert_eq!(r.transmitted_norm, 0.0);
    }

    #[test]
    fn aligned_gradient_is_tight() {
        let j = DMatrix::from_row_slice(3, 2, &[2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let r = chain_rule_decompose(&j, &[-3.0, 0.0, 0.0]).unwrap();
        assert!((r.sigma_max - 2.0).abs() < 1e-15);
        assert!((r.transmittance - 1.0).abs() < 1e-15);
        assert!((r.transmitted_norm - 6.0).abs() < 1e-14);
        assert_eq!(r.u_max[0], 1.0);
    }

    #[test]
    fn orthogonal_gradient_is_not_transmitted() {
        let j = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let r = chain_rule_decompose(&j, &[0.0, 0.0, 5.0]).unwrap();
        assert_eq!(r.transmitted_norm, 0.0);
        assert_eq!(r.transmittance, 0.0);
        let mixed = chain_rule_decompose(&j, &[3.0, 0.0, 4.0]).unwrap();
        // u_max = e₂ (σ = 2), so the overlap is 0 even though J^T g ≠ 0.
        assert_eq!(mixed.transmittance, 0.0);
        assert!((mixed.transmitted_norm - 3.0).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix_and_degenerate_flag() {
        let r = chain_rule_decompose(&DMatrix::zeros(4, 2), &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(r.sigma_max, 0.0);
        assert_eq!(r.transmitted_norm, 0.0);
        let eye = DMatrix::<f64>::identity(3, 3);
        assert!(chain_rule_decompose(&eye, &[1.0, 1.0, 1.0]).unwrap().near_degenerate);
        assert!(chain_rule_decompose(&eye, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn random_sandwich_and_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let j = DMatrix::from_fn(5, 3, |_, _| rng.random::<f64>() - 0.5);
            let g: Vec<f64> = (0..5).map(|_| rng.random::<f64>() - 0.5).collect();
            let r = chain_rule_decompose(&j, &g).unwrap();
            assert!(r.lower_bound() <= r.transmitted_norm * (1.0 + 1e-9));
            assert!(r.transmitted_norm <= r.upper_bound() * (1.0 + 1e-9));
            assert!((0.0..=1.0).contains(&r.transmittance));
            let c = 1.0 + 9.0 * rng.random::<f64>();
            let scaled: Vec<f64> = g.iter().map(|v| v * c).collect();
            let rs = chain_rule_decompose(&j, &scaled).unwrap();
            assert!((rs.transmittance - r.transmittance).abs() < 1e-14);
        }
    }

    #[test]
    fn subspace_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 5;
        let c = build_student(n, 2).unwrap();
        let iface = Interface::block_weights(n, 3).unwrap();
        let input = QuantumState::zero(n).unwrap();
        for trial in 0..5 {
            let theta = uniform_parameters(c.num_params(), &mut rng);
            let big = SubspaceSketch::draw(c.num_params(), 12, trial).unwrap();
            let small: Vec<usize> = big.indices().iter().copied().step_by(2).collect();
            let jb = shift_feature_jacobian(&c, &input, &theta, &iface, big.indices()).unwrap();
            let js = shift_feature_jacobian(&c, &input, &theta, &iface, &small).unwrap();
            let sb = jb.singular_values().max();
            let ss = js.singular_values().max();
            assert!(ss <= sb * (1.0 + 1e-12));
        }
    }

    #[test]
    fn sketch_validation() {
        let s = SubspaceSketch::draw(40, 32, 5).unwrap();
        assert_eq!(s.len(), 32);
        assert!(s.indices().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s, SubspaceSketch::draw(40, 32, 5).unwrap());
        assert!(SubspaceSketch::draw(10, 11, 0).is_err());
        assert!(SubspaceSketch::from_indices(vec![1, 1], 4).is_err());
        assert!(SubspaceSketch::from_indices(vec![4], 4).is_err());
    }

    #[test]
    fn variance_bridge_examples() {
        let same = vec![vec![1.0, 2.0]; 4];
        let r = variance_bridge_check(&same, &[(1.0, 1.0); 4]).unwrap();
        assert_eq!(r.trace_cov, 0.0);
        assert!(r.holds);

        let c = 0.7;
        let pm = vec![vec![c, 0.0], vec![-c, 0.0]];
        let r = variance_bridge_check(&pm, &[(1.0, c), (1.0, c)]).unwrap();
        assert!((r.trace_cov - c * c).abs() < 1e-15);
        assert!((r.bound - c * c).abs() < 1e-15);
        assert!(r.holds);
        assert!(variance_bridge_check(&pm[..1], &[(1.0, c)]).is_err());
        assert!(variance_bridge_check(&[vec![1.0], vec![1.0, 2.0]], &[(1.0, 1.0); 2]).is_err());
    }

    #[test]
    fn nll_probe_values() {
        let full = nll_amplification_probe(81, 81).unwrap();
        assert!((full.measured - 9.0).abs() < 1e-12);
        let single = nll_amplification_probe(81, 1).unwrap();
        assert!((single.measured - 81.0).abs() < 1e-12);
        assert!((single.linear_norm - 1.0).abs() < 1e-15);
        assert!((full.linear_norm - 1.0 / 9.0).abs() < 1e-15);
        assert!(nll_amplification_probe(81, 82).is_err());
    }

    #[test]
    fn factor_threshold_fraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let reports: Vec<_> = (0..10)
            .map(|_| {
                let j = DMatrix::from_fn(4, 2, |_, _| rng.random::<f64>());
                let g: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
                chain_rule_decompose(&j, &g).unwrap()
            })
            .collect();
        let zero = FactorThresholds { sigma_max: 0.0, g_norm: 0.0, transmittance: 0.0 };
        assert_eq!(pbj_factor_check(&reports, zero).unwrap(), 1.0);
        let huge = FactorThresholds { sigma_max: 1e9, g_norm: 1e9, transmittance: 2.0 };
        assert_eq!(pbj_factor_check(&reports, huge).unwrap(), 0.0);
        assert!(pbj_factor_check(&[], zero).is_err());
    }
}
