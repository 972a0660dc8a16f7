//! Transmittance null models: isotropic and elliptical random directions,
//! effective dimension `d_eff = Tr(Σ)²/Tr(Σ²)`, and a menu of spectral
//! shapes with their closed-form overlap scales.
//!
//! Shapes are stored diagonalized. Every statistic here is invariant under
//! orthogonal changes of basis, so the eigenvalues carry all of it.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ShapeParams {
    Isotropic,
    /// Eigenvalues spread geometrically over `[1, kappa]`.
    WellConditioned { kappa: f64 },
    LowRank { rank: usize },
    /// `λ₁ = 1 + spike`, rest 1.
    Spiked { spike: f64 },
    PowerLaw { alpha: f64 },
    Exponential { rate: f64 },
    /// Block-diagonal assembly of sub-shapes.
    Block { blocks: Vec<SpectralShape> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralShape {
    pub params: ShapeParams,
    pub eigenvalues: Vec<f64>,
}

impl SpectralShape {
    pub fn from_eigenvalues(eigenvalues: Vec<f64>) -> Result<Self> {
        validate_spectrum(&eigenvalues)?;
        Ok(Self {
            params: ShapeParams::Isotropic,
            eigenvalues,
        })
    }

    pub fn isotropic(m: usize) -> Result<Self> {
        Self::build(m, ShapeParams::Isotropic)
    }

    /// Constructs the spectrum for `params` in dimension `m`. For blocks the
    /// dimension must equal the sum of block dimensions.
    pub fn build(m: usize, params: ShapeParams) -> Result<Self> {
        ensure!(m >= 1, "dimension must be positive");
        let eigenvalues: Vec<f64> = match &params {
            ShapeParams::Isotropic => vec![1.0; m],
            ShapeParams::WellConditioned { kappa } => {
                ensure!(kappa.is_finite() && *kappa >= 1.0, "condition number must be >= 1, got {kappa}");
                if m == 1 {
                    vec![1.0]
                } else {
                    (0..m)
                        .map(|i| kappa.powf(i as f64 / (m - 1) as f64))
                        .collect()
                }
            }
            ShapeParams::LowRank { rank } => {
                ensure!(*rank >= 1 && *rank <= m, "rank {rank} outside 1..={m}");
                (0..m).map(|i| if i < *rank { 1.0 } else { 0.0 }).collect()
            }
            ShapeParams::Spiked { spike } => {
                ensure!(spike.is_finite() && *spike >= 0.0, "spike must be >= 0, got {spike}");
                (0..m).map(|i| if i == 0 { 1.0 + spike } else { 1.0 }).collect()
            }
            ShapeParams::PowerLaw { alpha } => {
                ensure!(alpha.is_finite() && *alpha >= 0.0, "power-law exponent must be >= 0, got {alpha}");
                (1..=m).map(|i| (i as f64).powf(-alpha)).collect()
            }
            ShapeParams::Exponential { rate } => {
                ensure!(rate.is_finite() && *rate > 0.0, "decay rate must be > 0, got {rate}");
                // Scaled by e^{rate} so the leading eigenvalue is 1.
                (1..=m).map(|i| (-rate * (i - 1) as f64).exp()).collect()
            }
            ShapeParams::Block { blocks } => {
                ensure!(!blocks.is_empty(), "block shape needs at least one block");
                let total: usize = blocks.iter().map(|b| b.dim()).sum();
                ensure!(total == m, "blocks span dimension {total}, expected {m}");
                blocks.iter().flat_map(|b| b.eigenvalues.iter().copied()).collect()
            }
        };
        validate_spectrum(&eigenvalues)?;
        Ok(Self { params, eigenvalues })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l > 0.0).count()
    }

    pub fn kind(&self) -> &'static str {
        match self.params {
            ShapeParams::Isotropic => "isotropic",
            ShapeParams::WellConditioned { .. } => "well-conditioned",
            ShapeParams::LowRank { .. } => "low-rank",
            ShapeParams::Spiked { .. } => "spiked",
            ShapeParams::PowerLaw { .. } => "power-law",
            ShapeParams::Exponential { .. } => "exponential",
            ShapeParams::Block { .. } => "block",
        }
    }
}

fn validate_spectrum(eigenvalues: &[f64]) -> Result<()> {
    ensure!(!eigenvalues.is_empty(), "spectrum is empty");
    ensure!(
        eigenvalues.iter().all(|l| l.is_finite() && *l >= 0.0),
        "eigenvalues must be finite and nonnegative"
    );
    ensure!(eigenvalues.iter().any(|&l| l > 0.0), "spectrum is identically zero");
    Ok(())
}

/// `Σ^{1/2} z / ‖Σ^{1/2} z‖` with `z` standard normal.
pub fn sample_elliptical_direction<R: Rng + ?Sized>(shape: &SpectralShape, rng: &mut R) -> Result<Vec<f64>> {
    validate_spectrum(&shape.eigenvalues)?;
    loop {
        let v: Vec<f64> = shape
            .eigenvalues
            .iter()
            .map(|l| {
                let z: f64 = StandardNormal.sample(rng);
                l.sqrt() * z
            })
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // Redraw on the measure-zero event of an all-zero draw.
        if norm > 0.0 {
            return Ok(v.into_iter().map(|x| x / norm).collect());
        }
    }
}

pub fn effective_dimension(shape: &SpectralShape) -> Result<f64> {
    validate_spectrum(&shape.eigenvalues)?;
    let tr: f64 = shape.eigenvalues.iter().sum();
    let tr2: f64 = shape.eigenvalues.iter().map(|l| l * l).sum();
    Ok(tr * tr / tr2)
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl McEstimate {
    fn from_values(values: &[f64]) -> Self {
        let count = values.len() as f64;
        let mean = values.iter().sum::<f64>() / count;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / count).sqrt(),
            samples: values.len(),
        }
    }

    /// `|mean − target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if self.std_error == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / self.std_error
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    /// Estimate of `E[(u·v)²]`.
    pub mc: McEstimate,
    /// `Tr(Σ_u Σ_v) / (Tr Σ_u · Tr Σ_v)`.
    pub closed_form: f64,
}

/// Mean squared overlap of independent directions drawn from two shapes.
pub fn rms_overlap<R: Rng + ?Sized>(
    shape_u: &SpectralShape,
    shape_v: &SpectralShape,
    samples: usize,
    rng: &mut R,
) -> Result<OverlapReport> {
    ensure!(
        shape_u.dim() == shape_v.dim(),
        "shape dimensions differ: {} vs {}",
        shape_u.dim(),
        shape_v.dim()
    );
    ensure!(samples >= 1, "need at least one sample");
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        let u = sample_elliptical_direction(shape_u, rng)?;
        let v = sample_elliptical_direction(shape_v, rng)?;
        let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
        values.push(dot * dot);
    }
    let tr_u: f64 = shape_u.eigenvalues.iter().sum();
    let tr_v: f64 = shape_v.eigenvalues.iter().sum();
    let cross: f64 = shape_u
        .eigenvalues
        .iter()
        .zip(&shape_v.eigenvalues)
        .map(|(a, b)| a * b)
        .sum();
    Ok(OverlapReport {
        mc: McEstimate::from_values(&values),
        closed_form: cross / (tr_u * tr_v),
    })
}

/// Exact `E[u_i²]` for `u = Σ^{1/2}z/‖Σ^{1/2}z‖`:
///
/// `E[u_i²] = ∫₀^∞ λ_i/(1+2tλ_i) · Π_j (1+2tλ_j)^{-1/2} dt`,
///
/// evaluated by the trapezoidal rule after `t = e^s`, where the integrand
/// decays exponentially in both directions.
pub fn direction_second_moments(shape: &SpectralShape) -> Result<Vec<f64>> {
    validate_spectrum(&shape.eigenvalues)?;
    let lambda = &shape.eigenvalues;
    let scale = lambda.iter().copied().fold(0.0, f64::max);
    let (lo, hi, step) = (-60.0f64, 100.0f64, 0.02f64);
    let mut moments = vec![0.0; lambda.len()];
    let mut s = lo;
    while s <= hi {
        // Rescale so the largest eigenvalue is 1; E[u_i²] is scale-free.
        let t = s.exp();
        let log_prod: f64 = lambda.iter().map(|l| -0.5 * (2.0 * t * l / scale).ln_1p()).sum();
        let weight = log_prod.exp() * t * step;
        for (acc, l) in moments.iter_mut().zip(lambda) {
            let l = l / scale;
            *acc += weight * l / (1.0 + 2.0 * t * l);
        }
        s += step;
    }
    Ok(moments)
}

/// Exact `E[(u·v)²] = Σ_i E[u_i²] E[v_i²]` for independent directions;
/// the cross terms vanish by reflection symmetry of each coordinate.
pub fn exact_overlap(shape_u: &SpectralShape, shape_v: &SpectralShape) -> Result<f64> {
    ensure!(
        shape_u.dim() == shape_v.dim(),
        "shape dimensions differ: {} vs {}",
        shape_u.dim(),
        shape_v.dim()
    );
    let a = direction_second_moments(shape_u)?;
    let b = direction_second_moments(shape_v)?;
    Ok(a.iter().zip(&b).map(|(x, y)| x * y).sum())
}

/// Monte-Carlo `E|⟨u, v⟩|` for independent uniform unit vectors in `ℝ^m`.
pub fn isotropic_abs_overlap<R: Rng + ?Sized>(m: usize, samples: usize, rng: &mut R) -> Result<McEstimate> {
    ensure!(m >= 1, "dimension must be positive");
    ensure!(samples >= 1, "need at least one sample");
    let shape = SpectralShape::isotropic(m)?;
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        let u = sample_elliptical_direction(&shape, rng)?;
        let v = sample_elliptical_direction(&shape, rng)?;
        values.push(u.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>().abs());
    }
    Ok(McEstimate::from_values(&values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MenuRow {
    pub kind: String,
    pub m: usize,
    pub params: ShapeParams,
    pub d_eff: f64,
    /// `1/√d_eff`.
    pub overlap_scale: f64,
    /// Well-conditioned shapes: `m/κ ≤ d_eff ≤ m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_holds: Option<bool>,
    /// Block shapes: `Σ_b d_eff^{(b)}`, reported next to the exact value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_sum: Option<f64>,
}

pub fn spectral_menu_row(m: usize, params: ShapeParams) -> Result<MenuRow> {
    let shape = SpectralShape::build(m, params)?;
    let d_eff = effective_dimension(&shape)?;
    let bound_holds = match &shape.params {
        ShapeParams::WellConditioned { kappa } => {
            let mf = m as f64;
            Some(d_eff >= mf / kappa * (1.0 - 1e-12) && d_eff <= mf * (1.0 + 1e-12))
        }
        _ => None,
    };
    let block_sum = match &shape.params {
        ShapeParams::Block { blocks } => Some(
            blocks
                .iter()
                .map(effective_dimension)
                .sum::<Result<f64>>()?,
        ),
        _ => None,
    };
    Ok(MenuRow {
        kind: shape.kind().to_string(),
        m,
        d_eff,
        overlap_scale: d_eff.sqrt().recip(),
        bound_holds,
        block_sum,
        params: shape.params,
    })
}
