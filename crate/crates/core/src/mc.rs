//! Monte Carlo designs and coefficient/forecast error scores.
//!
//! A design is a coefficient pattern ([`Sparsity`]) crossed with an error
//! model ([`ErrorModel`]). Regressors are Gaussian with correlation
//! `0.5^{|i−j|}` and an intercept column is prepended. The holdout block is
//! drawn from its own stream, so every replication of a study is scored on
//! the same test rows.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::quantile::{std_normal_inv_cdf, true_quantile_coefficients, ErrorDist};
use crate::rng::RngHandle;
use crate::sampler::{run_chain, SamplerConfig};

/// Stream tags for [`RngHandle::for_job`].
const HOLDOUT_TAG: u64 = 0x686f_6c64;
const TRAIN_TAG: u64 = 0x7472_6169;
const CHAIN_TAG: u64 = 0x6368_6169;

/// Correlation between neighbouring regressors.
const AR_COEF: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sparsity {
    Sparse,
    Dense,
    Block,
}

impl std::str::FromStr for Sparsity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sparse" => Ok(Sparsity::Sparse),
            "dense" => Ok(Sparsity::Dense),
            "block" => Ok(Sparsity::Block),
            _ => Err(Error::Input(format!("unknown design '{s}' (sparse|dense|block)"))),
        }
    }
}

impl fmt::Display for Sparsity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sparsity::Sparse => "sparse",
            Sparsity::Dense => "dense",
            Sparsity::Block => "block",
        })
    }
}

/// Error models. `x2` is the first non-constant regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorModel {
    /// `ε ~ N(0,1)`
    Y1,
    /// `ε ~ t(3)`
    Y2,
    /// `(1 + x2) ε`, `ε ~ N(0,1)`
    Y3,
    /// `ε1 + x2 ε2`, `ε1 ~ N(0,1)`, `ε2 ~ U(0,2)`
    Y4,
    /// `ε ≡ 0`, for smoke tests.
    Noiseless,
}

impl std::str::FromStr for ErrorModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "y1" => Ok(ErrorModel::Y1),
            "y2" => Ok(ErrorModel::Y2),
            "y3" => Ok(ErrorModel::Y3),
            "y4" => Ok(ErrorModel::Y4),
            "none" | "noiseless" => Ok(ErrorModel::Noiseless),
            _ => Err(Error::Input(format!("unknown error model '{s}' (y1|y2|y3|y4|none)"))),
        }
    }
}

impl fmt::Display for ErrorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorModel::Y1 => "y1",
            ErrorModel::Y2 => "y2",
            ErrorModel::Y3 => "y3",
            ErrorModel::Y4 => "y4",
            ErrorModel::Noiseless => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub sparsity: Sparsity,
    pub error_model: ErrorModel,
    /// Training rows plus holdout rows.
    pub t_total: usize,
    pub holdout: usize,
    pub n_replications: usize,
    pub seed: u64,
    /// Width constant of the coefficient patterns (200 gives K = 406 sparse).
    pub pattern_width: usize,
}

impl DgpConfig {
    pub fn new(sparsity: Sparsity, error_model: ErrorModel, n_train: usize) -> Self {
        Self {
            sparsity,
            error_model,
            t_total: n_train + 100,
            holdout: 100,
            n_replications: 1,
            seed: 0,
            pattern_width: 200,
        }
    }

    pub fn n_train(&self) -> usize {
        self.t_total.saturating_sub(self.holdout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_total <= self.holdout {
            return Err(Error::Input(format!(
                "sample size {} must exceed the holdout {}",
                self.t_total, self.holdout
            )));
        }
        if self.n_replications == 0 {
            return Err(Error::Input("at least one replication is required".into()));
        }
        if self.pattern_width == 0 {
            return Err(Error::Input("pattern width must be positive".into()));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("{}/{}", self.sparsity, self.error_model)
    }
}

/// `T × K` regressors with `corr(x_i, x_j) = 0.5^{|i−j|}`, built row by row
/// as a stationary AR(1) across columns (the Cholesky factor of that
/// Toeplitz matrix is bidiagonal).
pub fn generate_design(rng: &mut RngHandle, t: usize, k: usize) -> DMatrix<f64> {
    let innov = (1.0 - AR_COEF * AR_COEF).sqrt();
    let mut x = DMatrix::zeros(t, k);
    for i in 0..t {
        let mut prev = 0.0;
        for j in 0..k {
            let e = rng.standard_normal();
            prev = if j == 0 { e } else { AR_COEF * prev + innov * e };
            x[(i, j)] = prev;
        }
    }
    x
}

/// Coefficient pattern (intercept first) and its length.
pub fn make_beta(sparsity: Sparsity, width: usize) -> (Vec<f64>, usize) {
    let beta: Vec<f64> = match sparsity {
        Sparsity::Sparse => [1.0, 1.0, 0.5, 1.0 / 3.0, 0.25, 0.2]
            .into_iter()
            .chain(std::iter::repeat_n(0.0, 2 * width))
            .collect(),
        Sparsity::Dense => std::iter::once(1.0).chain(std::iter::repeat_n(0.85, width)).collect(),
        Sparsity::Block => std::iter::once(1.0)
            .chain(std::iter::repeat_n(0.85, width))
            .chain(std::iter::repeat_n(0.0, width))
            .chain(std::iter::repeat_n(0.85, width))
            .collect(),
    };
    let k = beta.len();
    (beta, k)
}

/// One simulated data set with its exact quantile-coefficient profile.
#[derive(Debug, Clone)]
pub struct DgpInstance {
    pub x_train: DMatrix<f64>,
    pub y_train: DVector<f64>,
    pub x_test: DMatrix<f64>,
    pub y_test: DVector<f64>,
    pub beta_base: Vec<f64>,
    /// 1 where the coefficient carries a quantile shift.
    pub vartheta: Vec<u8>,
    pub error_model: ErrorModel,
}

impl DgpInstance {
    /// Exact `β(p)`.
    pub fn true_beta(&self, p: f64) -> Result<Vec<f64>> {
        match self.error_model {
            ErrorModel::Y1 | ErrorModel::Y3 => {
                true_quantile_coefficients(&self.beta_base, &self.vartheta, ErrorDist::StandardNormal, p)
            }
            ErrorModel::Y2 => true_quantile_coefficients(&self.beta_base, &self.vartheta, ErrorDist::StudentT3, p),
            ErrorModel::Y4 => {
                // Intercept follows ε1, the x2 coefficient follows ε2.
                let mut b = self.beta_base.clone();
                b[0] += ErrorDist::StandardNormal.inv_cdf(p)?;
                b[1] += ErrorDist::Uniform02.inv_cdf(p)?;
                Ok(b)
            }
            ErrorModel::Noiseless => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::Domain(format!("quantile level {p} outside (0, 1)")));
                }
                Ok(self.beta_base.clone())
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.beta_base.len()
    }
}

fn rows_with_intercept(rng: &mut RngHandle, t: usize, k: usize) -> DMatrix<f64> {
    let body = generate_design(rng, t, k - 1);
    DMatrix::from_fn(t, k, |i, j| if j == 0 { 1.0 } else { body[(i, j - 1)] })
}

fn student_t3(rng: &mut RngHandle) -> f64 {
    let chi2 = rng.gamma(1.5, 0.5).expect("valid gamma parameters");
    rng.standard_normal() / (chi2 / 3.0).sqrt()
}

fn responses(rng: &mut RngHandle, x: &DMatrix<f64>, beta: &DVector<f64>, model: ErrorModel) -> DVector<f64> {
    let mean = x * beta;
    DVector::from_fn(x.nrows(), |t, _| {
        let x2 = x[(t, 1)];
        let e = match model {
            ErrorModel::Y1 => rng.standard_normal(),
            ErrorModel::Y2 => student_t3(rng),
            ErrorModel::Y3 => (1.0 + x2) * rng.standard_normal(),
            ErrorModel::Y4 => {
                let e1 = rng.standard_normal();
                e1 + x2 * 2.0 * rng.uniform()
            }
            ErrorModel::Noiseless => 0.0,
        };
        mean[t] + e
    })
}

/// Simulate one replication: training rows from `rng`, holdout rows from the
/// study's fixed holdout stream.
pub fn simulate_dgp(rng: &mut RngHandle, cfg: &DgpConfig) -> Result<DgpInstance> {
    cfg.validate()?;
    let (beta_base, k) = make_beta(cfg.sparsity, cfg.pattern_width);
    let beta = DVector::from_vec(beta_base.clone());
    let x_train = rows_with_intercept(rng, cfg.n_train(), k);
    let y_train = responses(rng, &x_train, &beta, cfg.error_model);
    let mut hold = RngHandle::for_job(cfg.seed, &[HOLDOUT_TAG]);
    let x_test = rows_with_intercept(&mut hold, cfg.holdout, k);
    let y_test = responses(&mut hold, &x_test, &beta, cfg.error_model);
    let mut vartheta = vec![0u8; k];
    vartheta[0] = 1;
    if matches!(cfg.error_model, ErrorModel::Y3 | ErrorModel::Y4) {
        vartheta[1] = 1;
    }
    Ok(DgpInstance {
        x_train,
        y_train,
        x_test,
        y_test,
        beta_base,
        vartheta,
        error_model: cfg.error_model,
    })
}

/// Replication `rep` of a study.
pub fn simulate_replication(cfg: &DgpConfig, rep: usize) -> Result<DgpInstance> {
    simulate_dgp(&mut RngHandle::for_job(cfg.seed, &[TRAIN_TAG, rep as u64]), cfg)
}

fn check_shapes(estimates: &[Vec<f64>], k: usize) -> Result<()> {
    if estimates.is_empty() {
        return Err(Error::Input("no estimates to score".into()));
    }
    if let Some(e) = estimates.iter().find(|e| e.len() != k) {
        return Err(Error::Dimension(format!("estimate has {} entries, truth {k}", e.len())));
    }
    Ok(())
}

/// Root mean coefficient bias: `√(Σ_reps ‖β̂ − β(p)‖² / (reps · K))`.
pub fn rmcb(estimates: &[Vec<f64>], truth: &[f64]) -> Result<f64> {
    check_shapes(estimates, truth.len())?;
    let ss: f64 = estimates
        .iter()
        .flat_map(|e| e.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)))
        .sum();
    Ok((ss / (estimates.len() * truth.len()) as f64).sqrt())
}

/// Root mean squared forecast error of the implied quantile on the holdout
/// rows: `√(Σ_reps ‖X(β̂ − β(p))‖² / (reps · rows))`.
pub fn rmsfe(estimates: &[Vec<f64>], truth: &[f64], x_test: &DMatrix<f64>) -> Result<f64> {
    check_shapes(estimates, truth.len())?;
    if x_test.ncols() != truth.len() {
        return Err(Error::Dimension(format!(
            "holdout has {} columns, truth {}",
            x_test.ncols(),
            truth.len()
        )));
    }
    let t = DVector::from_column_slice(truth);
    let mut ss = 0.0;
    for e in estimates {
        let d = x_test * (DVector::from_column_slice(e) - &t);
        ss += d.norm_squared();
    }
    Ok((ss / (estimates.len() * x_test.nrows()).max(1) as f64).sqrt())
}

/// A named sampler configuration scored in a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    pub name: String,
    pub sampler: SamplerConfig,
}

/// Scores of one estimator on one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McScore {
    pub estimator: String,
    pub design: String,
    pub quantiles: Vec<f64>,
    pub rmcb: Vec<f64>,
    pub rmsfe: Vec<f64>,
    /// Replications that completed for every quantile.
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainFailure {
    pub estimator: String,
    pub replication: usize,
    pub quantile: f64,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McStudy {
    pub scores: Vec<McScore>,
    pub failures: Vec<ChainFailure>,
}

/// Fit every estimator at every quantile on every replication and score the
/// posterior means. A failed chain drops that replication for that estimator.
pub fn run_mc_study(
    cfg: &DgpConfig,
    estimators: &[Estimator],
    quantiles: &[f64],
    threads: Option<usize>,
) -> Result<McStudy> {
    cfg.validate()?;
    if estimators.is_empty() || quantiles.is_empty() {
        return Err(Error::Input("need at least one estimator and one quantile".into()));
    }
    for e in estimators {
        e.sampler.validate()?;
    }
    let reps: Vec<usize> = (0..cfg.n_replications).collect();
    let jobs: Vec<(usize, usize, usize)> = reps
        .iter()
        .flat_map(|&r| (0..estimators.len()).flat_map(move |e| (0..quantiles.len()).map(move |q| (r, e, q))))
        .collect();

    let (instances, fits) = par::with_threads(threads, || {
        let instances: Vec<DgpInstance> = par::par_map(&reps, |&r| simulate_replication(cfg, r))
            .into_iter()
            .collect::<Result<_>>()?;
        let fits = par::par_map(&jobs, |&(r, e, q)| {
            let mut rng = RngHandle::for_job(cfg.seed, &[CHAIN_TAG, r as u64, e as u64, q as u64]);
            let inst = &instances[r];
            run_chain(&mut rng, &inst.x_train, &inst.y_train, quantiles[q], &estimators[e].sampler)
                .map(|d| d.mean_beta().iter().copied().collect::<Vec<f64>>())
        });
        Ok::<_, Error>((instances, fits))
    })?;

    let mut failures = Vec::new();
    // estimates[e][r][q]
    let mut estimates: Vec<Vec<Vec<Option<Vec<f64>>>>> =
        vec![vec![vec![None; quantiles.len()]; reps.len()]; estimators.len()];
    for (&(r, e, q), fit) in jobs.iter().zip(fits) {
        match fit {
            Ok(b) => estimates[e][r][q] = Some(b),
            Err(err) => {
                log::warn!(
                    "{} replication {r} at p={}: chain failed: {err}",
                    estimators[e].name,
                    quantiles[q]
                );
                failures.push(ChainFailure {
                    estimator: estimators[e].name.clone(),
                    replication: r,
                    quantile: quantiles[q],
                    message: err.to_string(),
                });
            }
        }
    }

    let x_test = &instances[0].x_test;
    let mut scores = Vec::new();
    for (e, est) in estimators.iter().enumerate() {
        let complete: Vec<usize> = reps
            .iter()
            .copied()
            .filter(|&r| estimates[e][r].iter().all(Option::is_some))
            .collect();
        let mut rmcb_row = Vec::with_capacity(quantiles.len());
        let mut rmsfe_row = Vec::with_capacity(quantiles.len());
        for (q, &p) in quantiles.iter().enumerate() {
            let truth = instances[0].true_beta(p)?;
            let ests: Vec<Vec<f64>> = complete
                .iter()
                .map(|&r| estimates[e][r][q].clone().expect("complete replication"))
                .collect();
            if ests.is_empty() {
                rmcb_row.push(f64::NAN);
                rmsfe_row.push(f64::NAN);
            } else {
                rmcb_row.push(rmcb(&ests, &truth)?);
                rmsfe_row.push(rmsfe(&ests, &truth, x_test)?);
            }
        }
        scores.push(McScore {
            estimator: est.name.clone(),
            design: cfg.label(),
            quantiles: quantiles.to_vec(),
            rmcb: rmcb_row,
            rmsfe: rmsfe_row,
            n_ok: complete.len(),
            n_failed: reps.len() - complete.len(),
        });
    }
    Ok(McStudy { scores, failures })
}

/// Write the study as two stacked tables (`metric` = rmcb, rmsfe): one row
/// per estimator × design, one column per quantile.
pub fn write_tables_csv(path: &Path, study: &McStudy) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let quantiles = study.scores.first().map(|s| s.quantiles.clone()).unwrap_or_default();
    let mut header = vec!["metric".to_string(), "estimator".into(), "design".into()];
    header.extend(quantiles.iter().map(|p| format!("p{p}")));
    header.push("n_ok".into());
    w.write_record(&header)?;
    for (metric, pick) in [("rmcb", 0), ("rmsfe", 1)] {
        for s in &study.scores {
            let values = if pick == 0 { &s.rmcb } else { &s.rmsfe };
            let mut row = vec![metric.to_string(), s.estimator.clone(), s.design.clone()];
            row.extend(values.iter().map(|v| format!("{v:.6}")));
            row.push(s.n_ok.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Quantile `p` of the intercept-only true profile `1 + Φ⁻¹(p)`, convenient
/// for profile plots of the y1 designs.
pub fn y1_intercept_profile(p: f64) -> f64 {
    1.0 + std_normal_inv_cdf(p)
}
