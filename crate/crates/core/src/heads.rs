//! Classical heads `f` mapping feature vectors to scalar losses, with their
//! closed-form feature-space gradients `g_F = ∇_F f`.
//!
//! A compressed objective `C(T(F))` is expressed by wrapping a head in
//! [`Composed`] with a [`FeatureTransform`]; the effective feature gradient
//! is the transform's vector-Jacobian product of the head gradient.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ensure, invalid, Error, Result};
use crate::interface::smooth_values;

/// Smoothing constant applied to every probability the JSD and NLL heads see.
pub const DEFAULT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Linear,
    Jsd,
    Nll,
}

impl HeadKind {
    pub const ALL: [HeadKind; 3] = [HeadKind::Linear, HeadKind::Jsd, HeadKind::Nll];

    pub fn as_str(self) -> &'static str {
        match self {
            HeadKind::Linear => "linear",
            HeadKind::Jsd => "jsd",
            HeadKind::Nll => "nll",
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(HeadKind::Linear),
            "jsd" => Ok(HeadKind::Jsd),
            "nll" => Ok(HeadKind::Nll),
            other => Err(invalid!("unknown head kind {other:?}")),
        }
    }
}

/// Anything that maps a feature vector to a scalar loss with a gradient.
pub trait LossHead {
    fn loss(&self, p: &[f64]) -> Result<f64>;
    fn feature_gradient(&self, p: &[f64]) -> Result<Vec<f64>>;
}

/// One of the three shipped heads with its fixed target distribution `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    kind: HeadKind,
    target: Vec<f64>,
    smoothed_target: Vec<f64>,
    eps: f64,
}

impl Head {
    /// `eps = 0` disables smoothing; it exists for probing raw closed forms.
    pub fn new(kind: HeadKind, target: Vec<f64>, eps: f64) -> Result<Self> {
        ensure!(!target.is_empty(), "target distribution is empty");
        ensure!(eps >= 0.0 && eps.is_finite(), "smoothing constant must be >= 0, got {eps}");
        ensure!(
            target.iter().all(|&v| v >= 0.0 && v.is_finite()),
            "target has negative or non-finite entries"
        );
        let total: f64 = target.iter().sum();
        ensure!((total - 1.0).abs() < 1e-9, "target sums to {total}, not 1");
        let smoothed_target = if eps > 0.0 { smooth_values(&target, eps) } else { target.clone() };
        Ok(Self {
            kind,
            target,
            smoothed_target,
            eps,
        })
    }

    pub fn kind(&self) -> HeadKind {
        self.kind
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn width(&self) -> usize {
        self.target.len()
    }

    pub fn descriptor(&self) -> HeadDescriptor {
        HeadDescriptor {
            kind: self.kind,
            eps: self.eps,
            target_checksum: checksum_f64(&self.target),
        }
    }

    fn check_len(&self, p: &[f64]) -> Result<()> {
        ensure!(
            p.len() == self.target.len(),
            "feature vector has length {}, head target has {}",
            p.len(),
            self.target.len()
        );
        Ok(())
    }

    fn smoothed(&self, p: &[f64]) -> Vec<f64> {
        if self.eps > 0.0 {
            smooth_values(p, self.eps)
        } else {
            p.to_vec()
        }
    }
}

impl LossHead for Head {
    fn loss(&self, p: &[f64]) -> Result<f64> {
        self.check_len(p)?;
        let value = match self.kind {
            HeadKind::Linear => -self.target.iter().zip(p).map(|(q, p)| q * p).sum::<f64>(),
            HeadKind::Jsd => {
                let p = self.smoothed(p);
                let q = &self.smoothed_target;
                let mut acc = 0.0;
                for (&px, &qx) in p.iter().zip(q) {
                    let mid = 0.5 * (px + qx);
                    acc += xlogy_ratio(px, mid) + xlogy_ratio(qx, mid);
                }
                0.5 * acc
            }
            HeadKind::Nll => {
                let p = self.smoothed(p);
                -self
                    .smoothed_target
                    .iter()
                    .zip(&p)
                    .map(|(&q, &p)| if q == 0.0 { 0.0 } else { q * p.ln() })
                    .sum::<f64>()
            }
        };
        Ok(value)
    }

    fn feature_gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_len(p)?;
        let grad = match self.kind {
            HeadKind::Linear => self.target.iter().map(|q| -q).collect(),
            HeadKind::Jsd => {
                let p = self.smoothed(p);
                p.iter()
                    .zip(&self.smoothed_target)
                    .map(|(&px, &qx)| {
                        if px == 0.0 {
                            // ½ log(0) only reachable without smoothing
                            f64::NEG_INFINITY
                        } else {
                            0.5 * (px / (0.5 * (px + qx))).ln()
                        }
                    })
                    .collect()
            }
            HeadKind::Nll => {
                let p = self.smoothed(p);
                self.smoothed_target
                    .iter()
                    .zip(&p)
                    .map(|(&q, &p)| if q == 0.0 { 0.0 } else { -q / p })
                    .collect()
            }
        };
        Ok(grad)
    }
}

/// `x · ln(x / y)` with the `0 · ln 0 = 0` convention.
fn xlogy_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

/// Recorded with every result so runs can be matched to their target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadDescriptor {
    pub kind: HeadKind,
    pub eps: f64,
    pub target_checksum: String,
}

pub(crate) fn checksum_f64(values: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for v in values {
        hasher.update(v.to_le_bytes());
    }
    hex_digest(&hasher.finalize())
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    use std::fmt::Write;
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Fixed classical post-processing `T` applied to features before a head.
pub trait FeatureTransform {
    fn output_width(&self) -> usize;
    fn apply(&self, features: &[f64]) -> Result<Vec<f64>>;
    /// `(∂T/∂F)^⊤ · upstream`, evaluated at `features`.
    fn pullback(&self, features: &[f64], upstream: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl FeatureTransform for Identity {
    fn output_width(&self) -> usize {
        usize::MAX
    }

    fn apply(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(features.to_vec())
    }

    fn pullback(&self, _features: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        Ok(upstream.to_vec())
    }
}

/// Fixed linear coarse-graining `T(F) = A·F`, row-major `rows × cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl LinearMap {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        ensure!(data.len() == rows * cols, "matrix data has {} entries, expected {}", data.len(), rows * cols);
        Ok(Self { rows, cols, data })
    }
}

impl FeatureTransform for LinearMap {
    fn output_width(&self) -> usize {
        self.rows
    }

    fn apply(&self, features: &[f64]) -> Result<Vec<f64>> {
        ensure!(features.len() == self.cols, "expected {} features, got {}", self.cols, features.len());
        Ok(self
            .data
            .chunks(self.cols)
            .map(|row| row.iter().zip(features).map(|(a, f)| a * f).sum())
            .collect())
    }

    fn pullback(&self, features: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        ensure!(features.len() == self.cols, "expected {} features, got {}", self.cols, features.len());
        ensure!(upstream.len() == self.rows, "expected {} upstream entries, got {}", self.rows, upstream.len());
        let mut out = vec![0.0; self.cols];
        for (row, &u) in self.data.chunks(self.cols).zip(upstream) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * u;
            }
        }
        Ok(out)
    }
}

/// `L = C(T(F))`; its feature gradient is the effective `g_F`.
#[derive(Debug, Clone)]
pub struct Composed<T, H> {
    pub transform: T,
    pub head: H,
}

impl<T: FeatureTransform, H: LossHead> LossHead for Composed<T, H> {
    fn loss(&self, p: &[f64]) -> Result<f64> {
        self.head.loss(&self.transform.apply(p)?)
    }

    fn feature_gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        let t = self.transform.apply(p)?;
        let upstream = self.head.feature_gradient(&t)?;
        self.transform.pullback(p, &upstream)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineReport {
    pub is_affine_consistent: bool,
    pub max_deviation: f64,
}

/// Affine heads have a feature gradient that does not move with `p`; this
/// measures `max_i ‖g_F(p_i) − g_F(p_1)‖_∞` over the supplied samples.
pub fn affine_constancy_check<H: LossHead + ?Sized>(head: &H, samples: &[Vec<f64>]) -> Result<AffineReport> {
    ensure!(samples.len() >= 2, "affine check needs at least two feature vectors");
    let reference = head.feature_gradient(&samples[0])?;
    let mut worst: f64 = 0.0;
    for p in &samples[1..] {
        let g = head.feature_gradient(p)?;
        for (a, b) in g.iter().zip(&reference) {
            let d = (a - b).abs();
            worst = if d.is_nan() { f64::INFINITY } else { worst.max(d) };
        }
    }
    Ok(AffineReport {
        is_affine_consistent: worst < 1e-12,
        max_deviation: worst,
    })
}

/// Empirical `sup_i ‖g_F(p_i)‖₂`, a measured stand-in for the head's
/// Lipschitz constant on the sampled region.
pub fn lipschitz_bound_probe<H: LossHead + ?Sized>(head: &H, samples: &[Vec<f64>]) -> Result<f64> {
    ensure!(!samples.is_empty(), "Lipschitz probe needs at least one feature vector");
    let mut sup: f64 = 0.0;
    for p in samples {
        sup = sup.max(l2(&head.feature_gradient(p)?));
    }
    Ok(sup)
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1};

    fn uniform(m: usize) -> Vec<f64> {
        vec![1.0 / m as f64; m]
    }

    fn dirichlet(m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let raw: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v: f64| v / s).collect()
    }

    #[test]
    fn loss_examples() {
        let m = 16;
        let lin = Head::new(HeadKind::Linear, uniform(m), DEFAULT_EPS).unwrap();
        assert!((lin.loss(&uniform(m)).unwrap() + 1.0 / m as f64).abs() < 1e-15);
        let jsd = Head::new(HeadKind::Jsd, uniform(m), DEFAULT_EPS).unwrap();
        assert!(jsd.loss(&uniform(m)).unwrap().abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = dirichlet(m, &mut rng);
        let nll = Head::new(HeadKind::Nll, q, DEFAULT_EPS).unwrap();
        assert!((nll.loss(&uniform(m)).unwrap() - (m as f64).ln()).abs() < 1e-10);
        assert!(lin.loss(&uniform(m - 1)).is_err());
    }

    #[test]
    fn gradient_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let q = dirichlet(9, &mut rng);
        let lin = Head::new(HeadKind::Linear, q.clone(), DEFAULT_EPS).unwrap();
        let p = dirichlet(9, &mut rng);
        let g = lin.feature_gradient(&p).unwrap();
        assert_eq!(g, q.iter().map(|v| -v).collect::<Vec<_>>());

        let jsd = Head::new(HeadKind::Jsd, q.clone(), DEFAULT_EPS).unwrap();
        assert!(jsd.feature_gradient(&q).unwrap().iter().all(|v| v.abs() < 1e-15));

        // p uniform over N, q uniform over s of the outcomes: ‖g‖ = N/√s.
        let (n_out, s) = (36usize, 4usize);
        let mut qs = vec![0.0; n_out];
        qs[..s].iter_mut().for_each(|v| *v = 1.0 / s as f64);
        let nll = Head::new(HeadKind::Nll, qs, 0.0).unwrap();
        let norm = l2(&nll.feature_gradient(&uniform(n_out)).unwrap());
        assert!((norm - n_out as f64 / (s as f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn affine_check_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let q = dirichlet(8, &mut rng);
        let ps: Vec<Vec<f64>> = (0..5).map(|_| dirichlet(8, &mut rng)).collect();
        let lin = Head::new(HeadKind::Linear, q.clone(), DEFAULT_EPS).unwrap();
        let r = affine_constancy_check(&lin, &ps).unwrap();
        assert!(r.is_affine_consistent);
        assert_eq!(r.max_deviation, 0.0);

        let nll = Head::new(HeadKind::Nll, q.clone(), DEFAULT_EPS).unwrap();
        let r = affine_constancy_check(&nll, &ps[..2]).unwrap();
        let expected = q
            .iter()
            .zip(ps[0].iter().zip(&ps[1]))
            .map(|(q, (a, b))| (q / a - q / b).abs())
            .fold(0.0, f64::max);
        assert!(!r.is_affine_consistent);
        assert!((r.max_deviation - expected).abs() <= 1e-9 * expected);
        assert!(affine_constancy_check(&lin, &ps[..1]).is_err());
    }

    #[test]
    fn lipschitz_probe_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = 32;
        let q = dirichlet(m, &mut rng);
        let lin = Head::new(HeadKind::Linear, q.clone(), DEFAULT_EPS).unwrap();
        let ps: Vec<Vec<f64>> = (0..10).map(|_| dirichlet(m, &mut rng)).collect();
        assert!((lipschitz_bound_probe(&lin, &ps).unwrap() - l2(&q)).abs() < 1e-15);

        // Near-uniform pairs keep the JSD gradient at O(1).
        let near = |rng: &mut ChaCha8Rng| {
            let raw: Vec<f64> = (0..m).map(|_| 1.0 + 0.2 * rng.random::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect::<Vec<_>>()
        };
        let qn = near(&mut rng);
        let jsd = Head::new(HeadKind::Jsd, qn, DEFAULT_EPS).unwrap();
        let pn: Vec<Vec<f64>> = (0..10).map(|_| near(&mut rng)).collect();
        let sup = lipschitz_bound_probe(&jsd, &pn).unwrap();
        assert!(sup < 0.5 * (m as f64).sqrt() * 0.2);

        // NLL grows like 1/p_min as a spike drains one coordinate.
        let nll = Head::new(HeadKind::Nll, uniform(m), DEFAULT_EPS).unwrap();
        let spiked = |pmin: f64| {
            let mut p = vec![(1.0 - pmin) / (m - 1) as f64; m];
            p[0] = pmin;
            p
        };
        let a = lipschitz_bound_probe(&nll, &[spiked(1e-4)]).unwrap();
        let b = lipschitz_bound_probe(&nll, &[spiked(1e-6)]).unwrap();
        assert!((b / a - 100.0).abs() < 0.5);
        assert!(lipschitz_bound_probe(&nll, &[]).is_err());
    }

    #[test]
    fn composition_pulls_back_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // Marginalize 4 outcomes onto 2.
        let map = LinearMap::new(2, 4, vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]).unwrap();
        let head = Head::new(HeadKind::Nll, vec![0.3, 0.7], DEFAULT_EPS).unwrap();
        let composed = Composed { transform: map, head: head.clone() };
        let p = dirichlet(4, &mut rng);
        let g = composed.feature_gradient(&p).unwrap();
        let coarse = head.feature_gradient(&[p[0] + p[1], p[2] + p[3]]).unwrap();
        assert_eq!(g, vec![coarse[0], coarse[0], coarse[1], coarse[1]]);
        let id = Composed { transform: Identity, head: head.clone() };
        assert_eq!(id.loss(&[0.5, 0.5]).unwrap(), head.loss(&[0.5, 0.5]).unwrap());
    }

    #[test]
    fn head_kind_parsing() {
        for k in HeadKind::ALL {
            assert_eq!(k.as_str().parse::<HeadKind>().unwrap(), k);
        }
        assert!("mse".parse::<HeadKind>().is_err());
    }

    #[test]
    fn target_validation() {
        assert!(Head::new(HeadKind::Nll, vec![0.5, 0.6], DEFAULT_EPS).is_err());
        assert!(Head::new(HeadKind::Nll, vec![-0.5, 1.5], DEFAULT_EPS).is_err());
        assert!(Head::new(HeadKind::Nll, vec![], DEFAULT_EPS).is_err());
        assert!(Head::new(HeadKind::Nll, vec![1.0], -1.0).is_err());
    }

    fn central_difference(head: &Head, p: &[f64], k: usize, h: f64) -> f64 {
        let mut up = p.to_vec();
        let mut down = p.to_vec();
        up[k] += h;
        down[k] -= h;
        (head.loss(&up).unwrap() - head.loss(&down).unwrap()) / (2.0 * h)
    }

    #[test]
    fn feature_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..100 {
            let m = 3 + trial % 20;
            // Keep p away from 0: the central-difference truncation error of
            // -q/p scales like (h/p)^2.
            let p: Vec<f64> = dirichlet(m, &mut rng)
                .into_iter()
                .map(|v| 0.5 * v + 0.5 / m as f64)
                .collect();
            let q = dirichlet(m, &mut rng);
            for kind in HeadKind::ALL {
                let head = Head::new(kind, q.clone(), DEFAULT_EPS).unwrap();
                let g = head.feature_gradient(&p).unwrap();
                for k in 0..m {
                    let fd = central_difference(&head, &p, k, 1e-6);
                    // Roundoff in the differenced loss sits near 1e-10; the
                    // absolute floor keeps near-zero JSD components comparable.
                    assert!(
                        (fd - g[k]).abs() <= 1e-5 * g[k].abs() + 1e-9,
                        "{kind} trial {trial} k={k}: fd {fd} vs {}",
                        g[k]
                    );
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn jsd_symmetric_nonnegative(seed in any::<u64>(), m in 2usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = dirichlet(m, &mut rng);
            let q = dirichlet(m, &mut rng);
            let pq = Head::new(HeadKind::Jsd, q.clone(), DEFAULT_EPS).unwrap().loss(&p).unwrap();
            let qp = Head::new(HeadKind::Jsd, p.clone(), DEFAULT_EPS).unwrap().loss(&q).unwrap();
            prop_assert!((pq - qp).abs() < 1e-12);
            prop_assert!(pq >= 0.0);
            let pp = Head::new(HeadKind::Jsd, p.clone(), DEFAULT_EPS).unwrap().loss(&p).unwrap();
            prop_assert!(pp.abs() < 1e-10);
        }

        #[test]
        fn nll_dominates_entropy(seed in any::<u64>(), m in 2usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = dirichlet(m, &mut rng);
            let q = dirichlet(m, &mut rng);
            let head = Head::new(HeadKind::Nll, q.clone(), DEFAULT_EPS).unwrap();
            let qs = smooth_values(&q, DEFAULT_EPS);
            let entropy = -qs.iter().map(|v| v * v.ln()).sum::<f64>();
            prop_assert!(head.loss(&p).unwrap() >= entropy - 1e-10);
            prop_assert!((head.loss(&q).unwrap() - entropy).abs() < 1e-10);
        }

        #[test]
        fn linear_gradient_ignores_p(seed in any::<u64>(), m in 2usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = dirichlet(m, &mut rng);
            let head = Head::new(HeadKind::Linear, q, DEFAULT_EPS).unwrap();
            let a = head.feature_gradient(&dirichlet(m, &mut rng)).unwrap();
            let b = head.feature_gradient(&dirichlet(m, &mut rng)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
