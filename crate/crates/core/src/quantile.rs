//! Quantile-level primitives shared by the sampler, the Monte Carlo designs and
//! the forecast evaluation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// A quantile level together with the constants of the asymmetric-Laplace
/// normal–exponential mixture at that level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileSpec {
    pub p: f64,
    /// `(1 - 2p) / (p (1 - p))`
    pub theta: f64,
    /// `2 / (p (1 - p))`
    pub tau2: f64,
}

impl QuantileSpec {
    pub fn new(p: f64) -> Result<Self> {
        quantile_constants(p)
    }
}

/// ALD mixture constants for quantile level `p`.
pub fn quantile_constants(p: f64) -> Result<QuantileSpec> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile level {p} outside (0, 1)")));
    }
    let pq = p * (1.0 - p);
    Ok(QuantileSpec {
        p,
        theta: (1.0 - 2.0 * p) / pq,
        tau2: 2.0 / pq,
    })
}

/// Check loss `ρ_p(u) = [(1-p) I(u ≤ 0) + p I(u > 0)] |u|`.
#[inline]
pub fn check_loss(u: f64, p: f64) -> f64 {
    if u > 0.0 {
        p * u
    } else {
        (p - 1.0) * u
    }
}

/// Sum of check losses over a residual vector.
pub fn total_check_loss(residuals: impl IntoIterator<Item = f64>, p: f64) -> f64 {
    residuals.into_iter().map(|u| check_loss(u, p)).sum()
}

/// Minimiser of `Σ ρ_p(y_t - c)` over `c`: the order statistic `y_(⌈np⌉)`.
///
/// When `np` is an integer every point between two order statistics is
/// optimal; the lower one is returned.
pub fn empirical_quantile(y: &[f64], p: f64) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::Input("empirical quantile of an empty sample".into()));
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = ((n as f64) * p).ceil() as usize;
    Ok(sorted[k.clamp(1, n) - 1])
}

/// An ordered list of quantile levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileGrid {
    levels: Vec<f64>,
}

impl QuantileGrid {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Input("empty quantile grid".into()));
        }
        if levels.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::Domain("quantile grid levels must lie in (0, 1)".into()));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("quantile grid must be strictly increasing".into()));
        }
        Ok(Self { levels })
    }

    /// `n` equidistant levels `1/(n+1), …, n/(n+1)`; `n = 19` gives 0.05..0.95.
    pub fn equidistant(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("grid needs at least one level".into()));
        }
        let step = 1.0 / (n as f64 + 1.0);
        // Round to 12 decimals so 0.05*k prints and compares cleanly.
        Self::new(
            (1..=n)
                .map(|k| ((k as f64) * step * 1e12).round() / 1e12)
                .collect(),
        )
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Index of `p` in the grid, matched to 1e-9.
    pub fn position(&self, p: f64) -> Option<usize> {
        self.levels.iter().position(|&q| (q - p).abs() < 1e-9)
    }
}

impl Default for QuantileGrid {
    fn default() -> Self {
        Self::equidistant(19).expect("19-level grid is valid")
    }
}

/// Error distributions used by the simulation designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorDist {
    StandardNormal,
    /// Student t with 3 degrees of freedom.
    StudentT3,
    /// Uniform on (0, 2).
    Uniform02,
}

impl ErrorDist {
    pub fn cdf(self, x: f64) -> f64 {
        match self {
            ErrorDist::StandardNormal => std_normal_cdf(x),
            ErrorDist::StudentT3 => t3_cdf(x),
            ErrorDist::Uniform02 => (x / 2.0).clamp(0.0, 1.0),
        }
    }

    /// Quantile function `F⁻¹(p)`.
    pub fn inv_cdf(self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("probability {p} outside (0, 1)")));
        }
        Ok(match self {
            ErrorDist::StandardNormal => std_normal_inv_cdf(p),
            ErrorDist::StudentT3 => t3_inv_cdf(p),
            ErrorDist::Uniform02 => 2.0 * p,
        })
    }
}

pub fn std_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

pub fn std_normal_inv_cdf(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Closed-form CDF of Student t with 3 degrees of freedom.
pub fn t3_cdf(t: f64) -> f64 {
    let s = t / 3f64.sqrt();
    0.5 + (s / (1.0 + s * s) + s.atan()) / std::f64::consts::PI
}

/// Bisection on [`t3_cdf`] to 1e-12 absolute width (well inside 1e-10).
fn t3_inv_cdf(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let (mut lo, mut hi) = (-1.0, 1.0);
    while t3_cdf(lo) > p {
        lo *= 2.0;
    }
    while t3_cdf(hi) < p {
        hi *= 2.0;
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if t3_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `β(p) = β + ϑ F⁻¹(p)` for a 0/1 indicator vector `ϑ`.
pub fn true_quantile_coefficients(
    beta: &[f64],
    vartheta: &[u8],
    dist: ErrorDist,
    p: f64,
) -> Result<Vec<f64>> {
    if beta.len() != vartheta.len() {
        return Err(Error::Dimension(format!(
            "beta has {} entries, vartheta {}",
            beta.len(),
            vartheta.len()
        )));
    }
    if vartheta.iter().any(|&v| v > 1) {
        return Err(Error::Input("vartheta entries must be 0 or 1".into()));
    }
    if vartheta.first() != Some(&1) {
        return Err(Error::Input(
            "vartheta[0] must be 1: the intercept always carries the location shift".into(),
        ));
    }
    let shift = dist.inv_cdf(p)?;
    Ok(beta
        .iter()
        .zip(vartheta)
        .map(|(&b, &v)| b + f64::from(v) * shift)
        .collect())
}
