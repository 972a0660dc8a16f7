//! Two-parameter scaling models `ln y = β₀ + β₁ φ(n)` and their ΔAICc
//! comparison.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, invalid, Error, Result};

/// Parameters counted by AICc: two coefficients plus the noise variance.
pub const AICC_PARAMS: usize = 3;

/// Log-space RSS below which a fit is treated as exact.
pub const DEGENERATE_RSS: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingModel {
    Poly,
    PowerLog,
    QuasiPoly,
    Exp,
}

impl ScalingModel {
    /// Fixed order used for table columns and tie-breaking.
    pub const ALL: [ScalingModel; 4] = [
        ScalingModel::Poly,
        ScalingModel::PowerLog,
        ScalingModel::QuasiPoly,
        ScalingModel::Exp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScalingModel::Poly => "poly",
            ScalingModel::PowerLog => "power-log",
            ScalingModel::QuasiPoly => "quasi-poly",
            ScalingModel::Exp => "exp",
        }
    }
}

impl fmt::Display for ScalingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScalingModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScalingModel::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| invalid!("unknown scaling model {s:?}"))
    }
}

/// `φ(n)`: `ln n`, `ln n + ln ln n`, `(ln n)²` or `n`.
pub fn feature_map_phi(model: ScalingModel, n: f64) -> Result<f64> {
    ensure!(n.is_finite() && n > 0.0, "system size must be positive, got {n}");
    Ok(match model {
        ScalingModel::Poly => n.ln(),
        ScalingModel::PowerLog => {
            ensure!(n >= 3.0, "power-log model needs n >= 3, got {n}");
            n.ln() + n.ln().ln()
        }
        ScalingModel::QuasiPoly => n.ln() * n.ln(),
        ScalingModel::Exp => n,
    })
}

/// Ordinary least squares `y = a + b x`; returns `(a, b, rss)`.
pub fn ols(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let count = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / count;
    let my = points.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let intercept = my - slope * mx;
    let rss = points
        .iter()
        .map(|p| {
            let r = p.1 - intercept - slope * p.0;
            r * r
        })
        .sum();
    (intercept, slope, rss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub model: ScalingModel,
    pub beta0: f64,
    pub beta1: f64,
    pub rss: f64,
    /// `-inf` for degenerate (exact) fits.
    #[serde(with = "signed_inf")]
    pub aicc: f64,
    pub n_points: usize,
    pub degenerate: bool,
}

/// Least-squares fit of `ln y` on `φ(n)` with AICc
/// `N ln(RSS/N) + 2k + 2k(k+1)/(N−k−1)`, `k = 3`.
pub fn fit_model(model: ScalingModel, points: &[(f64, f64)]) -> Result<ScalingFit> {
    ensure!(points.len() >= 4, "scaling fit needs at least 4 points, got {}", points.len());
    let mut transformed = Vec::with_capacity(points.len());
    for &(n, y) in points {
        ensure!(y > 0.0 && y.is_finite(), "scaling fit needs positive finite y, got {y} at n={n}");
        transformed.push((feature_map_phi(model, n)?, y.ln()));
    }
    let count = points.len();
    let k = AICC_PARAMS;
    if count <= k + 1 {
        return Err(Error::AiccUndefined { points: count, params: k });
    }
    let (beta0, beta1, rss) = ols(&transformed);
    let degenerate = rss < DEGENERATE_RSS;
    let aicc = if degenerate {
        f64::NEG_INFINITY
    } else {
        let nf = count as f64;
        let kf = k as f64;
        nf * (rss / nf).ln() + 2.0 * kf + 2.0 * kf * (kf + 1.0) / (nf - kf - 1.0)
    };
    Ok(ScalingFit {
        model,
        beta0,
        beta1,
        rss,
        aicc,
        n_points: count,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub label: String,
    pub fits: Vec<ScalingFit>,
    /// ΔAICc per model in table column order; the winner is exactly 0.
    pub delta: Vec<f64>,
    pub best: ScalingModel,
    #[serde(with = "signed_inf")]
    pub aicc_best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub models: Vec<ScalingModel>,
    pub rows: Vec<ScalingRow>,
}

/// Fits every model to every labelled trend and reports ΔAICc against the
/// row winner. Ties go to the earlier model in `models`.
pub fn delta_aicc_table(trends: &[(String, Vec<(f64, f64)>)], models: &[ScalingModel]) -> Result<ScalingTable> {
    ensure!(!models.is_empty(), "no scaling models requested");
    let mut rows = Vec::with_capacity(trends.len());
    for (label, points) in trends {
        let fits: Vec<ScalingFit> = models
            .iter()
            .map(|&m| fit_model(m, points))
            .collect::<Result<_>>()?;
        let mut winner = 0;
        for (i, f) in fits.iter().enumerate() {
            if f.aicc < fits[winner].aicc {
                winner = i;
            }
        }
        let best = fits[winner].aicc;
        let delta = fits
            .iter()
            .enumerate()
            .map(|(i, f)| {
                if i == winner {
                    0.0
                } else if f.aicc == best {
                    // equal (possibly both -inf) fits tie at zero
                    0.0
                } else {
                    f.aicc - best
                }
            })
            .collect();
        rows.push(ScalingRow {
            label: label.clone(),
            best: models[winner],
            aicc_best: best,
            fits,
            delta,
        });
    }
    Ok(ScalingTable {
        models: models.to_vec(),
        rows,
    })
}

impl ScalingTable {
    /// Rows are trends, columns are ΔAICc per model, then `AICc_best`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("head");
        for m in &self.models {
            out.push(',');
            out.push_str(m.as_str());
        }
        out.push_str(",AICc_best\n");
        for row in &self.rows {
            out.push_str(&row.label);
            for d in &row.delta {
                out.push_str(&format!(",{d}"));
            }
            out.push_str(&format!(",{}\n", row.aicc_best));
        }
        out
    }
}

/// Serializes `±inf` as the strings `"inf"` / `"-inf"`.
pub(crate) mod signed_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Raw::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("invalid float {t:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::E;

    fn sizes() -> Vec<f64> {
        (4..=12).map(|k| 2.0 * k as f64).collect()
    }

    #[test]
    fn phi_values() {
        assert!((feature_map_phi(ScalingModel::Poly, E).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(feature_map_phi(ScalingModel::Exp, 24.0).unwrap(), 24.0);
        assert!((feature_map_phi(ScalingModel::QuasiPoly, E).unwrap() - 1.0).abs() < 1e-15);
        let pl = feature_map_phi(ScalingModel::PowerLog, 8.0).unwrap();
        assert!((pl - (8f64.ln() + 8f64.ln().ln())).abs() < 1e-15);
        assert!(feature_map_phi(ScalingModel::PowerLog, 2.0).is_err());
        assert!(feature_map_phi(ScalingModel::Poly, 0.0).is_err());
    }

    #[test]
    fn exact_exponential_and_power_law() {
        let exp_pts: Vec<(f64, f64)> = sizes().into_iter().map(|n| (n, (-0.5 * n).exp())).collect();
        let f = fit_model(ScalingModel::Exp, &exp_pts).unwrap();
        assert!((f.beta1 + 0.5).abs() < 1e-12 && f.beta0.abs() < 1e-12);
        assert!(f.degenerate && f.aicc == f64::NEG_INFINITY);

        let pow_pts: Vec<(f64, f64)> = sizes().into_iter().map(|n| (n, n.powi(-2))).collect();
        let p = fit_model(ScalingModel::Poly, &pow_pts).unwrap();
        assert!((p.beta1 + 2.0).abs() < 1e-12);
        assert!(p.rss < DEGENERATE_RSS);
    }

    #[test]
    fn fit_errors() {
        let pts = vec![(8.0, 1.0), (10.0, 0.5), (12.0, 0.25), (14.0, 0.1)];
        assert!(matches!(
            fit_model(ScalingModel::Exp, &pts),
            Err(Error::AiccUndefined { points: 4, params: 3 })
        ));
        assert!(fit_model(ScalingModel::Exp, &pts[..3]).is_err());
        let bad = vec![(8.0, 1.0), (10.0, 0.0), (12.0, 0.25), (14.0, 0.1), (16.0, 0.1)];
        assert!(matches!(fit_model(ScalingModel::Exp, &bad), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn one_zero_per_row_and_tie_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noisy: Vec<(f64, f64)> = sizes()
            .into_iter()
            .map(|n| (n, (-0.3 * n + 0.2 * rng.random::<f64>()).exp()))
            .collect();
        let t = delta_aicc_table(&[("linear".into(), noisy.clone())], &ScalingModel::ALL).unwrap();
        assert_eq!(t.rows[0].delta.iter().filter(|&&d| d == 0.0).count(), 1);

        let dup = [ScalingModel::QuasiPoly, ScalingModel::QuasiPoly];
        let t = delta_aicc_table(&[("x".into(), noisy)], &dup).unwrap();
        assert_eq!(t.rows[0].fits[0].aicc, t.rows[0].fits[1].aicc);
        assert_eq!(t.rows[0].best, ScalingModel::QuasiPoly);
        assert_eq!(t.rows[0].delta[0], 0.0);
    }

    /// Independent oracle: shrinking 2-D grid search over (intercept, slope).
    fn grid_minimizer(points: &[(f64, f64)]) -> (f64, f64) {
        let rss = |a: f64, b: f64| points.iter().map(|p| (p.1 - a - b * p.0).powi(2)).sum::<f64>();
        let (mut a, mut b) = (0.0, 0.0);
        let mut span = 100.0;
        while span > 1e-10 {
            let mut best = (rss(a, b), a, b);
            for i in -10..=10 {
                for j in -10..=10 {
                    let (ta, tb) = (a + span * i as f64 / 10.0, b + span * j as f64 / 10.0);
                    let r = rss(ta, tb);
                    if r < best.0 {
                        best = (r, ta, tb);
                    }
                }
            }
            a = best.1;
            b = best.2;
            span *= 0.5;
        }
        (a, b)
    }

    #[test]
    fn ols_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let pts: Vec<(f64, f64)> = (0..9)
                .map(|i| {
                    let x = i as f64 * 0.5 + rng.random::<f64>();
                    (x, 1.5 - 0.7 * x + rng.random::<f64>())
                })
                .collect();
            let (a, b, _) = ols(&pts);
            let (ga, gb) = grid_minimizer(&pts);
            assert!((a - ga).abs() < 1e-6 && (b - gb).abs() < 1e-6, "{a},{b} vs {ga},{gb}");
        }
    }

    #[test]
    fn delta_order_follows_rss_and_ignores_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let noise = Normal::new(0.0, 0.3).unwrap();
        for _ in 0..50 {
            let pts: Vec<(f64, f64)> = sizes()
                .into_iter()
                .map(|n| (n, (-0.2 * n + noise.sample(&mut rng)).exp()))
                .collect();
            let t = delta_aicc_table(&[("a".into(), pts.clone())], &ScalingModel::ALL).unwrap();
            let row = &t.rows[0];
            for i in 0..4 {
                for j in 0..4 {
                    if row.fits[i].rss < row.fits[j].rss {
                        assert!(row.delta[i] < row.delta[j]);
                    }
                }
            }
            let scaled: Vec<(f64, f64)> = pts.iter().map(|&(n, y)| (n, 37.5 * y)).collect();
            let ts = delta_aicc_table(&[("a".into(), scaled)], &ScalingModel::ALL).unwrap();
            for (d, ds) in row.delta.iter().zip(&ts.rows[0].delta) {
                assert!((d - ds).abs() < 1e-10);
            }
            for (f, fs) in row.fits.iter().zip(&ts.rows[0].fits) {
                assert!((f.beta1 - fs.beta1).abs() < 1e-10);
                assert!((fs.beta0 - f.beta0 - 37.5f64.ln()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn csv_layout() {
        let pts: Vec<(f64, f64)> = sizes().into_iter().map(|n| (n, (-0.5 * n).exp() * (1.0 + 0.01 * n.sin()))).collect();
        let t = delta_aicc_table(&[("linear".into(), pts)], &ScalingModel::ALL).unwrap();
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("head,poly,power-log,quasi-poly,exp,AICc_best"));
        assert!(lines.next().unwrap().starts_with("linear,"));
        let json = serde_json::to_string(&t).unwrap();
        let back: ScalingTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }
}
