//! From quantile forecasts to densities, and the scores used to judge them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::{check_loss, empirical_quantile, std_normal_cdf, QuantileGrid};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LOG_FLOOR: f64 = 1e-300;

/// Asymptotic Kolmogorov-Smirnov constants at the 1%, 5% and 10% levels.
const KS_C: [f64; 3] = [1.63, 1.36, 1.22];

/// Two-sided normal critical values at 10%, 5% and 1%.
const DM_Z: [f64; 3] = [1.645, 1.96, 2.576];

/// Quantile forecasts for one horizon: one row per forecast origin, one
/// column per grid level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileForecastSet {
    pub grid: QuantileGrid,
    pub horizon: usize,
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl QuantileForecastSet {
    pub fn new(grid: QuantileGrid, horizon: usize, labels: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} forecast rows",
                labels.len(),
                values.len()
            )));
        }
        for (i, row) in values.iter().enumerate() {
            if row.len() != grid.len() {
                return Err(Error::Dimension(format!(
                    "forecast row {i} has {} values, grid has {}",
                    row.len(),
                    grid.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("forecast row {i} has a non-finite value")));
            }
        }
        Ok(Self {
            grid,
            horizon,
            labels,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Column of forecasts at grid level `p`.
    pub fn column(&self, p: f64) -> Option<Vec<f64>> {
        let j = self.grid.position(p)?;
        Some(self.values.iter().map(|r| r[j]).collect())
    }

    /// Smoothed density of every row.
    pub fn densities(&self) -> Result<Vec<ForecastDensity>> {
        self.values
            .iter()
            .map(|row| smooth_to_density(&sort_quantiles(row).0))
            .collect()
    }
}

/// Ascending rearrangement and the number of adjacent crossings found.
pub fn sort_quantiles(values: &[f64]) -> (Vec<f64>, usize) {
    let crossings = values.windows(2).filter(|w| w[1] < w[0]).count();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    (sorted, crossings)
}

/// Equal-weight Gaussian mixture centred on the quantile points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastDensity {
    pub points: Vec<f64>,
    pub bandwidth: f64,
}

impl ForecastDensity {
    pub fn pdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let s: f64 = self
            .points
            .iter()
            .map(|m| {
                let u = (x - m) / h;
                (-0.5 * u * u).exp()
            })
            .sum();
        s * INV_SQRT_2PI / (h * self.points.len() as f64)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let s: f64 = self.points.iter().map(|m| std_normal_cdf((x - m) / self.bandwidth)).sum();
        (s / self.points.len() as f64).clamp(0.0, 1.0)
    }

    /// Evaluation range padded by four bandwidths on each side.
    pub fn support(&self) -> (f64, f64) {
        let lo = self.points[0];
        let hi = self.points[self.points.len() - 1];
        (lo - 4.0 * self.bandwidth, hi + 4.0 * self.bandwidth)
    }

    /// `(x, pdf, cdf)` on `n ≥ 2` evenly spaced points over [`support`](Self::support).
    pub fn grid(&self, n: usize) -> Vec<(f64, f64, f64)> {
        let (lo, hi) = self.support();
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                (x, self.pdf(x), self.cdf(x))
            })
            .collect()
    }
}

fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Type-7 quantile of sorted data.
fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule `0.9 · min(sd, IQR/1.34) · n^{-1/5}` (the IQR term is
/// skipped when it is zero), floored at `1e-6 · range`.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    let sd = sample_sd(sorted);
    let iqr = (sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25)) / 1.34;
    let spread = if iqr > 0.0 { sd.min(iqr) } else { sd };
    let range = sorted[n - 1] - sorted[0];
    (0.9 * spread * (n as f64).powf(-0.2)).max(1e-6 * range)
}

/// Kernel-smooth sorted quantile points into a density.
pub fn smooth_to_density(sorted: &[f64]) -> Result<ForecastDensity> {
    if sorted.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite quantile value".into()));
    }
    let mut points = sorted.to_vec();
    points.sort_by(f64::total_cmp);
    let distinct = points.windows(2).filter(|w| w[1] != w[0]).count() + usize::from(!points.is_empty());
    if distinct < 2 {
        return Err(Error::Degenerate(format!(
            "need at least two distinct quantile values, got {distinct}"
        )));
    }
    let bandwidth = silverman_bandwidth(&points);
    Ok(ForecastDensity { points, bandwidth })
}

/// Probability integral transform of a realization.
pub fn pit(density: &ForecastDensity, realization: f64) -> f64 {
    density.cdf(realization)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub n: usize,
    pub crit_1: f64,
    pub crit_5: f64,
    pub crit_10: f64,
}

impl KsResult {
    fn new(statistic: f64, n: usize) -> Self {
        let r = (n as f64).sqrt();
        Self {
            statistic,
            n,
            crit_1: KS_C[0] / r,
            crit_5: KS_C[1] / r,
            crit_10: KS_C[2] / r,
        }
    }

    /// Whether uniformity survives at the 10% level.
    pub fn passes_10(&self) -> bool {
        self.statistic < self.crit_10
    }
}

/// One-sample KS statistic of PITs against U(0,1).
pub fn ks_uniformity(pits: &[f64]) -> Result<KsResult> {
    if pits.is_empty() {
        return Err(Error::Input("no PIT values".into()));
    }
    if let Some(g) = pits.iter().find(|g| !(**g >= 0.0 && **g <= 1.0)) {
        return Err(Error::Domain(format!("PIT value {g} outside [0, 1]")));
    }
    let mut g = pits.to_vec();
    g.sort_by(f64::total_cmp);
    let n = g.len() as f64;
    let d = g
        .iter()
        .enumerate()
        .map(|(i, &gi)| ((i + 1) as f64 / n - gi).max(gi - i as f64 / n))
        .fold(0.0, f64::max);
    Ok(KsResult::new(d, g.len()))
}

/// KS distance evaluated on the quantile grid: the largest gap between each
/// level `p` and the share of realizations below the forecast `p`-quantile.
/// Critical values use `n` = number of grid levels.
pub fn ks_grid_coverage(set: &QuantileForecastSet, realizations: &[f64]) -> Result<KsResult> {
    if set.is_empty() || set.len() != realizations.len() {
        return Err(Error::Dimension(format!(
            "{} forecast rows, {} realizations",
            set.len(),
            realizations.len()
        )));
    }
    let n = set.len() as f64;
    let mut d: f64 = 0.0;
    for (j, &p) in set.grid.levels().iter().enumerate() {
        let hits = set
            .values
            .iter()
            .zip(realizations)
            .filter(|(row, y)| {
                let (sorted, _) = sort_quantiles(row);
                **y <= sorted[j]
            })
            .count() as f64;
        d = d.max((hits / n - p).abs());
    }
    Ok(KsResult::new(d, set.grid.len()))
}

/// Mean log predictive density at the realizations.
pub fn avg_log_score(densities: &[ForecastDensity], realizations: &[f64]) -> Result<f64> {
    if densities.len() != realizations.len() || densities.is_empty() {
        return Err(Error::Dimension(format!(
            "{} densities, {} realizations",
            densities.len(),
            realizations.len()
        )));
    }
    let s: f64 = densities
        .iter()
        .zip(realizations)
        .map(|(d, &y)| d.pdf(y).max(LOG_FLOOR).ln())
        .sum();
    Ok(s / densities.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateFit {
    pub intercept: f64,
    pub slope: f64,
    pub loss: f64,
}

fn line_loss(v: &[f64], y: &[f64], a: f64, b: f64, p: f64) -> f64 {
    v.iter().zip(y).map(|(vi, yi)| check_loss(yi - a - b * vi, p)).sum()
}

/// Exact check-loss regression of `y` on `(1, v)`.
///
/// Some optimal line passes through two observations with distinct `v`, so
/// enumerating those lines (plus horizontal lines through each point) finds
/// the minimum. Ties go to the smaller `|slope|`.
pub fn exact_bivariate_qr(v: &[f64], y: &[f64], p: f64) -> Result<BivariateFit> {
    if v.len() != y.len() {
        return Err(Error::Dimension(format!("{} fitted values, {} realizations", v.len(), y.len())));
    }
    if v.len() < 2 {
        return Err(Error::Input("need at least two observations".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile level {p} outside (0, 1)")));
    }
    if v.iter().chain(y).any(|x| !x.is_finite()) {
        return Err(Error::Input("non-finite value".into()));
    }
    if v.iter().all(|&vi| vi == v[0]) {
        let a = empirical_quantile(y, p)?;
        return Ok(BivariateFit {
            intercept: a,
            slope: 0.0,
            loss: line_loss(v, y, a, 0.0, p),
        });
    }
    let mut best: Option<BivariateFit> = None;
    let mut consider = |a: f64, b: f64| {
        let loss = line_loss(v, y, a, b, p);
        let better = match &best {
            None => true,
            Some(cur) => {
                let tol = 1e-12 * (1.0 + cur.loss.abs());
                loss < cur.loss - tol || (loss <= cur.loss + tol && b.abs() < cur.slope.abs())
            }
        };
        if better {
            best = Some(BivariateFit {
                intercept: a,
                slope: b,
                loss,
            });
        }
    };
    for &yi in y {
        consider(yi, 0.0);
    }
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            if v[i] != v[j] {
                let b = (y[j] - y[i]) / (v[j] - v[i]);
                consider(y[i] - b * v[i], b);
            }
        }
    }
    Ok(best.expect("at least one candidate line"))
}

/// `1 − RASW/TASW`: check loss of the exact `(1, v)` fit relative to the
/// intercept-only fit. Zero when `TASW = 0`.
pub fn pseudo_r2(v: &[f64], y: &[f64], p: f64) -> Result<f64> {
    let fit = exact_bivariate_qr(v, y, p)?;
    let q = empirical_quantile(y, p)?;
    let tasw: f64 = y.iter().map(|yi| check_loss(yi - q, p)).sum();
    if tasw == 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 - fit.loss / tasw).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    pub statistic: f64,
    pub mean_diff: f64,
    pub sig_10: bool,
    pub sig_5: bool,
    pub sig_1: bool,
}

impl DmResult {
    /// `*`, `**`, `***` for 10/5/1% significance.
    pub fn stars(&self) -> &'static str {
        match (self.sig_1, self.sig_5, self.sig_10) {
            (true, _, _) => "***",
            (_, true, _) => "**",
            (_, _, true) => "*",
            _ => "",
        }
    }
}

/// Diebold-Mariano test on the loss differential `a − b` with a
/// rectangular long-run variance over `h − 1` lags and the small-sample
/// correction `√((n + 1 − 2h + h(h−1)/n) / n)`. Positive statistics mean
/// `a` has the larger loss.
pub fn dm_test(loss_a: &[f64], loss_b: &[f64], h: usize) -> Result<DmResult> {
    if loss_a.len() != loss_b.len() {
        return Err(Error::Dimension(format!(
            "loss series of length {} and {}",
            loss_a.len(),
            loss_b.len()
        )));
    }
    let n = loss_a.len();
    if h == 0 || n <= h {
        return Err(Error::Input(format!("need more than h = {h} observations, got {n}")));
    }
    let d: Vec<f64> = loss_a.iter().zip(loss_b).map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let autocov = |k: usize| (k..n).map(|t| (d[t] - mean) * (d[t - k] - mean)).sum::<f64>() / nf;
    let mut lrv = autocov(0) + 2.0 * (1..h).map(autocov).sum::<f64>();
    if lrv <= 0.0 {
        lrv = autocov(0);
    }
    let hf = h as f64;
    let correction = ((nf + 1.0 - 2.0 * hf + hf * (hf - 1.0) / nf) / nf).sqrt();
    // Rounding leaves a tiny positive variance on a constant differential.
    let statistic = if lrv > 1e-24 * mean * mean {
        correction * mean / (lrv / nf).sqrt()
    } else if mean == 0.0 {
        0.0
    } else {
        mean.signum() * f64::INFINITY
    };
    let a = statistic.abs();
    Ok(DmResult {
        statistic,
        mean_diff: mean,
        sig_10: a > DM_Z[0],
        sig_5: a > DM_Z[1],
        sig_1: a > DM_Z[2],
    })
}

/// Write `(x, pdf, cdf)` rows for each density, tagged by `label`.
pub fn write_density_grids(path: &Path, labels: &[String], densities: &[ForecastDensity], n: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["label", "x", "pdf", "cdf"])?;
    for (label, d) in labels.iter().zip(densities) {
        for (x, f, c) in d.grid(n) {
            w.write_record([label.clone(), format!("{x:.6}"), format!("{f:.8}"), format!("{c:.8}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantile::std_normal_inv_cdf;
    use crate::rng::RngHandle;
    use proptest::prelude::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    fn normal_quantile_points() -> Vec<f64> {
        let grid = QuantileGrid::default();
        grid.levels().iter().map(|&p| std_normal_inv_cdf(p)).collect()
    }

    #[test]
    fn sorting_examples() {
        assert_eq!(sort_quantiles(&[1.0, 2.0, 3.0]), (vec![1.0, 2.0, 3.0], 0));
        assert_eq!(sort_quantiles(&[1.0, 3.0, 2.0, 4.0]), (vec![1.0, 2.0, 3.0, 4.0], 1));
        assert_eq!(sort_quantiles(&[2.0; 4]), (vec![2.0; 4], 0));
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(matches!(smooth_to_density(&[1.0, 1.0, 1.0]), Err(Error::Degenerate(_))));
        assert!(smooth_to_density(&[1.0]).is_err());
        assert!(smooth_to_density(&[1.0, 2.0]).is_ok());
    }

    #[test]
    fn density_is_normalised_and_symmetric() {
        let d = smooth_to_density(&normal_quantile_points()).unwrap();
        let (lo, hi) = d.support();
        let mass = simpson(|x| d.pdf(x), lo - 10.0 * d.bandwidth, hi + 10.0 * d.bandwidth, 20_000);
        assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
        for &x in &[0.3, 1.0, 2.2] {
            assert!((d.pdf(x) - d.pdf(-x)).abs() < 1e-12);
        }
        assert!((pit(&d, 0.0) - 0.5).abs() < 1e-12);
        assert!(pit(&d, -100.0) < 1e-12);
        assert!(pit(&d, 100.0) > 1.0 - 1e-12);
    }

    #[test]
    fn cdf_matches_quadrature() {
        let pts = [-1.0, -0.2, 0.1, 0.5, 2.0, 3.5];
        let d = smooth_to_density(&pts).unwrap();
        let lo = -1.0 - 12.0 * d.bandwidth;
        for &x in &[-1.5, 0.0, 0.7, 3.0] {
            let q = simpson(|u| d.pdf(u), lo, x, 20_000);
            assert!((q - d.cdf(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn pit_near_normal_cdf() {
        // A standard normal density, realization at its 90% point.
        let d = ForecastDensity {
            points: vec![0.0],
            bandwidth: 1.0,
        };
        assert!((pit(&d, 1.2816) - 0.9).abs() < 1e-4);
        assert!((d.pdf(0.0).ln() - (-0.918_938_533_204_672_7)).abs() < 1e-12);
    }

    #[test]
    fn separated_clusters_are_bimodal() {
        let mut pts: Vec<f64> = (0..9).map(|i| -5.0 + 0.1 * i as f64).collect();
        pts.extend((0..10).map(|i| 5.0 + 0.1 * i as f64));
        let d = smooth_to_density(&pts).unwrap();
        let g = d.grid(2001);
        let modes = g.windows(3).filter(|w| w[1].1 > w[0].1 && w[1].1 > w[2].1).count();
        assert_eq!(modes, 2);
    }

    #[test]
    fn ks_examples() {
        let n = 19;
        let plotting: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let ks = ks_uniformity(&plotting).unwrap();
        assert!((ks.statistic - 0.5 / n as f64).abs() < 1e-12);
        assert!((ks.crit_5 - 0.312).abs() < 5e-4);
        assert!((ks.crit_1 - 0.374).abs() < 5e-4);
        assert!((ks.crit_10 - 0.28).abs() < 5e-4);
        assert!((ks_uniformity(&[0.5; 7]).unwrap().statistic - 0.5).abs() < 1e-12);
        assert!(ks_uniformity(&[]).is_err());
        assert!(ks_uniformity(&[1.2]).is_err());
    }

    #[test]
    fn pits_of_own_draws_are_uniform() {
        let d = smooth_to_density(&[-1.0, -0.4, 0.0, 0.3, 1.5, 2.5]).unwrap();
        let mut rng = RngHandle::new(3, 0);
        let trials = 200;
        let mut pass = 0;
        for _ in 0..trials {
            let pits: Vec<f64> = (0..19)
                .map(|_| {
                    let m = d.points[(rng.uniform() * d.points.len() as f64) as usize];
                    pit(&d, m + d.bandwidth * rng.standard_normal())
                })
                .collect();
            pass += usize::from(ks_uniformity(&pits).unwrap().passes_10());
        }
        assert!(pass >= 170, "{pass}/{trials}");
    }

    #[test]
    fn log_score_examples() {
        let d = ForecastDensity {
            points: vec![0.0],
            bandwidth: 1.0,
        };
        let s = avg_log_score(&[d.clone(), d.clone()], &[0.0, 0.0]).unwrap();
        assert!((s + 0.918_938_533_204_672_7).abs() < 1e-12);
        let off = avg_log_score(&[d.clone(), d.clone()], &[3.0, 60.0]).unwrap();
        assert!(off < s);
        assert!(off.is_finite());
        assert!(avg_log_score(&[d], &[]).is_err());
    }

    #[test]
    fn bivariate_qr_identity() {
        let v = [0.3, -1.0, 2.0, 0.7, 1.1];
        let fit = exact_bivariate_qr(&v, &v, 0.3).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12 && fit.intercept.abs() < 1e-12);
        assert_eq!(fit.loss, 0.0);
        assert!((pseudo_r2(&v, &v, 0.3).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bivariate_qr_constant_regressor() {
        let v = [1.0; 5];
        let y = [3.0, 1.0, 2.0, 5.0, 4.0];
        let fit = exact_bivariate_qr(&v, &y, 0.5).unwrap();
        assert_eq!((fit.intercept, fit.slope), (3.0, 0.0));
        assert_eq!(pseudo_r2(&v, &y, 0.5).unwrap(), 0.0);
        assert_eq!(pseudo_r2(&[1.0, 2.0], &[4.0, 4.0], 0.5).unwrap(), 0.0);
    }

    #[test]
    fn bivariate_qr_independent_regressor() {
        let mut rng = RngHandle::new(4, 0);
        let v: Vec<f64> = (0..150).map(|_| rng.standard_normal()).collect();
        let y: Vec<f64> = (0..150).map(|_| rng.standard_normal()).collect();
        let fit = exact_bivariate_qr(&v, &y, 0.5).unwrap();
        assert!(fit.slope.abs() < 0.3, "slope {}", fit.slope);
        assert!(pseudo_r2(&v, &y, 0.5).unwrap() < 0.05);
    }

    #[test]
    fn dm_examples() {
        let a: Vec<f64> = (0..50).map(|i| ((i * 7) % 11) as f64 * 0.1).collect();
        let r = dm_test(&a, &a, 2).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.sig_10);
        let mut rng = RngHandle::new(5, 0);
        let b: Vec<f64> = a.iter().map(|x| x + 0.5 + 0.1 * rng.standard_normal()).collect();
        let r = dm_test(&b, &a, 1).unwrap();
        assert!(r.sig_1 && r.statistic > 0.0);
        assert_eq!(r.stars(), "***");
        let shifted: Vec<f64> = a.iter().map(|x| x + 1.0).collect();
        assert_eq!(dm_test(&a, &shifted, 1).unwrap().statistic, f64::NEG_INFINITY);
        assert!(dm_test(&a[..2], &a[..2], 2).is_err());
    }

    #[test]
    fn dm_h1_is_t_statistic() {
        let mut rng = RngHandle::new(6, 0);
        let a: Vec<f64> = (0..40).map(|_| rng.standard_normal().powi(2)).collect();
        let b: Vec<f64> = (0..40).map(|_| rng.standard_normal().powi(2)).collect();
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let n = d.len() as f64;
        let m = d.iter().sum::<f64>() / n;
        // The small-sample factor turns the 1/n variance into the usual 1/(n−1) one.
        let v = d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        let t = m / (v / n).sqrt();
        assert!((dm_test(&a, &b, 1).unwrap().statistic - t).abs() < 1e-12);
    }

    #[test]
    fn grid_coverage_ks() {
        let grid = QuantileGrid::default();
        let row: Vec<f64> = grid.levels().iter().map(|&p| std_normal_inv_cdf(p)).collect();
        let mut rng = RngHandle::new(7, 0);
        let n = 2000;
        let set = QuantileForecastSet::new(grid.clone(), 1, vec![String::new(); n], vec![row; n]).unwrap();
        let ys: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let ks = ks_grid_coverage(&set, &ys).unwrap();
        assert_eq!(ks.n, 19);
        assert!(ks.statistic < 0.05);
    }

    proptest! {
        #[test]
        fn sorting_preserves_multiset(values in proptest::collection::vec(-1e3f64..1e3, 0..30)) {
            let (sorted, _) = sort_quantiles(&values);
            let mut expect = values.clone();
            expect.sort_by(f64::total_cmp);
            prop_assert_eq!(sorted.clone(), expect);
            prop_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn cdf_monotone_pdf_nonnegative(values in proptest::collection::vec(-50f64..50.0, 2..25)) {
            let (sorted, _) = sort_quantiles(&values);
            prop_assume!(sorted[0] < sorted[sorted.len() - 1]);
            let d = smooth_to_density(&sorted).unwrap();
            let g = d.grid(300);
            prop_assert!(g.iter().all(|(_, f, c)| *f >= 0.0 && (0.0..=1.0).contains(c)));
            prop_assert!(g.windows(2).all(|w| w[1].2 >= w[0].2));
        }

        #[test]
        fn pseudo_r2_in_unit_interval(
            pts in proptest::collection::vec((-5f64..5.0, -5f64..5.0), 2..12),
            p in 0.05f64..0.95,
        ) {
            let (v, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            let r = pseudo_r2(&v, &y, p).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
        }

        #[test]
        fn exact_fit_beats_any_line(
            pts in proptest::collection::vec((-5f64..5.0, -5f64..5.0), 2..10),
            a in -5f64..5.0,
            b in -3f64..3.0,
            p in 0.05f64..0.95,
        ) {
            let (v, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            let fit = exact_bivariate_qr(&v, &y, p).unwrap();
            prop_assert!(fit.loss <= line_loss(&v, &y, a, b, p) + 1e-9);
        }
    }
}
