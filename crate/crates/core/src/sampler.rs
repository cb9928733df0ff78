//! Gibbs sampler for Bayesian quantile regression.
//!
//! The asymmetric-Laplace likelihood is written as a normal scale mixture,
//! `y_t | z_t ~ N(x_t'β + θ z_t, σ τ² z_t)` with `z_t ~ Exp(mean σ)`, so every
//! block has a standard conditional. One sweep updates, in order:
//!
//! 1. the latent mixture variables `z`,
//! 2. the ALD scale `σ`,
//! 3. the coefficients `β` (through [`crate::gaussian`]),
//! 4. the prior scales (horseshoe local/global, or lasso local + hyperrate).
//!
//! `σ` is stored as the ALD scale itself; see [`ChainState::sigma`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{self, Backend, StructuredGaussian};
use crate::quantile::QuantileSpec;
use crate::rng::RngHandle;

/// Prior variance used for an intercept exempted from shrinkage.
const FLAT_INTERCEPT_VARIANCE: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prior {
    Horseshoe,
    Lasso,
}

impl std::str::FromStr for Prior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "horseshoe" | "hs" => Ok(Prior::Horseshoe),
            "lasso" => Ok(Prior::Lasso),
            _ => Err(Error::Input(format!("unknown prior '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub prior: Prior,
    /// Inverse-gamma shape for `σ`.
    pub a_prior: f64,
    /// Inverse-gamma rate for `σ`.
    pub b_prior: f64,
    pub n_iter: usize,
    pub n_burn: usize,
    pub thin: usize,
    pub beta_backend: Backend,
    /// Lower bound on `|y_t − x_t'β|` (and `|β_j|` in the lasso update).
    pub residual_floor: f64,
    /// When false, column 0 gets a fixed vague prior and is left out of the
    /// scale updates.
    pub shrink_intercept: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            prior: Prior::Horseshoe,
            a_prior: 0.1,
            b_prior: 0.1,
            n_iter: 5000,
            n_burn: 1000,
            thin: 1,
            beta_backend: Backend::Auto,
            residual_floor: 1e-10,
            shrink_intercept: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_prior > 0.0 && self.b_prior > 0.0) {
            return Err(Error::Domain(format!(
                "inverse-gamma hyperparameters must be positive (a={}, b={})",
                self.a_prior, self.b_prior
            )));
        }
        if self.n_burn >= self.n_iter {
            return Err(Error::Input(format!(
                "burn-in ({}) must be smaller than the number of sweeps ({})",
                self.n_burn, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::Input("thin must be at least 1".into()));
        }
        if !(self.residual_floor > 0.0) {
            return Err(Error::Domain("residual_floor must be positive".into()));
        }
        Ok(())
    }

    /// Number of retained draws.
    pub fn n_keep(&self) -> usize {
        (self.n_iter - self.n_burn) / self.thin
    }

    fn first_shrunk(&self) -> usize {
        usize::from(!self.shrink_intercept)
    }
}

/// One Gibbs state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub beta: DVector<f64>,
    /// The ALD scale `σ` (enters the likelihood variance as `σ τ² z_t`).
    pub sigma: f64,
    pub z: DVector<f64>,
    pub lambda2: DVector<f64>,
    /// Global scale `ν²`; fixed at 1 under the lasso prior.
    pub nu2: f64,
    /// Lasso hyperrate `u²`; unused by the horseshoe.
    pub lasso_rate: f64,
}

impl ChainState {
    pub fn initial(k: usize, t: usize) -> Self {
        Self {
            beta: DVector::zeros(k),
            sigma: 1.0,
            z: DVector::from_element(t, 1.0),
            lambda2: DVector::from_element(k, 1.0),
            nu2: 1.0,
            lasso_rate: 1.0,
        }
    }

    /// Positivity and finiteness of every component.
    pub fn is_valid(&self) -> bool {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        self.beta.iter().all(|b| b.is_finite())
            && pos(self.sigma)
            && self.z.iter().all(|&v| pos(v))
            && self.lambda2.iter().all(|&v| pos(v))
            && pos(self.nu2)
            && pos(self.lasso_rate)
    }

    /// Prior covariance diagonal of `β`.
    fn prior_variances(&self, cfg: &SamplerConfig) -> DVector<f64> {
        let mut d = &self.lambda2 * self.nu2;
        if !cfg.shrink_intercept && !d.is_empty() {
            d[0] = FLAT_INTERCEPT_VARIANCE;
        }
        d
    }
}

fn residuals(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> DVector<f64> {
    y - x * beta
}

/// `z_t = 1/v_t` with `v_t ~ IG(mean √(θ²+2τ²)/|r_t|, shape (θ²+2τ²)/(στ²))`.
pub fn update_latent_z(
    rng: &mut RngHandle,
    state: &ChainState,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    q: &QuantileSpec,
    cfg: &SamplerConfig,
) -> Result<DVector<f64>> {
    let r = residuals(x, y, &state.beta);
    let c = q.theta * q.theta + 2.0 * q.tau2;
    let shape = c / (state.sigma * q.tau2);
    let root = c.sqrt();
    let mut z = DVector::zeros(r.len());
    for (t, rt) in r.iter().enumerate() {
        let mean = root / rt.abs().max(cfg.residual_floor);
        z[t] = 1.0 / rng.inverse_gaussian(mean, shape)?;
    }
    Ok(z)
}

/// `σ ~ IG(a + 3T/2, b + Σ (r_t − θz_t)² / (2 z_t τ²) + Σ z_t)`.
pub fn update_sigma(
    rng: &mut RngHandle,
    state: &ChainState,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    q: &QuantileSpec,
    cfg: &SamplerConfig,
) -> Result<f64> {
    let (shape, rate) = sigma_posterior(state, x, y, q, cfg);
    rng.inverse_gamma(shape, rate)
}

/// Shape and rate of the inverse-gamma conditional of `σ`.
pub fn sigma_posterior(
    state: &ChainState,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    q: &QuantileSpec,
    cfg: &SamplerConfig,
) -> (f64, f64) {
    let r = residuals(x, y, &state.beta);
    let mut rate = cfg.b_prior;
    for (rt, zt) in r.iter().zip(state.z.iter()) {
        let e = rt - q.theta * zt;
        rate += e * e / (2.0 * zt * q.tau2) + zt;
    }
    (cfg.a_prior + 1.5 * r.len() as f64, rate)
}

/// The Gaussian conditional of `β`: `Φ = √U X`, `α = √U (y − θz)`,
/// `D = ν² λ²`, with `U = diag(1 / (τ² z_t σ))`.
pub fn beta_conditional(
    state: &ChainState,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    q: &QuantileSpec,
    cfg: &SamplerConfig,
) -> Result<StructuredGaussian> {
    let w = state.z.map(|zt| (q.tau2 * zt * state.sigma).recip().sqrt());
    let mut phi = x.clone();
    for (t, mut row) in phi.row_iter_mut().enumerate() {
        row *= w[t];
    }
    let alpha = DVector::from_fn(y.len(), |t, _| w[t] * (y[t] - q.theta * state.z[t]));
    StructuredGaussian::new(phi, state.prior_variances(cfg), alpha)
}

pub fn update_beta(
    rng: &mut RngHandle,
    state: &ChainState,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    q: &QuantileSpec,
    cfg: &SamplerConfig,
) -> Result<DVector<f64>> {
    let sg = beta_conditional(state, x, y, q, cfg)?;
    gaussian::sample(rng, &sg, cfg.beta_backend)
}

/// One slice step for a horseshoe scale: `u ~ U(0, 1/(1+η))`, then `η` from
/// `draw(upper)` restricted to `(0, (1−u)/u)`.
fn slice_step(rng: &mut RngHandle, eta: f64, draw: impl FnOnce(&mut RngHandle, f64) -> Result<f64>) -> Result<f64> {
    let u = rng.uniform_pos() / (1.0 + eta);
    let upper = (1.0 - u) / u;
    let next = draw(rng, upper)?;
    Ok(next.max(f64::MIN_POSITIVE))
}

/// Slice update of one local scale `λ²` given `μ² = β²/ν²`; the chain on
/// `η = 1/λ²` leaves `exp(−μ² η / 2) / (1 + η)` invariant.
pub fn horseshoe_local_step(rng: &mut RngHandle, lambda2: f64, mu2: f64) -> Result<f64> {
    let eta = slice_step(rng, 1.0 / lambda2, |rng, upper| {
        Ok(rng.truncated_exponential_unchecked(0.5 * mu2, upper))
    })?;
    Ok(1.0 / eta)
}

/// Horseshoe scales. Locals: `η_j = 1/λ_j²` with target
/// `exp(−μ_j² η_j / 2) / (1 + η_j)`, `μ_j = β_j / ν`. Global: `η = 1/ν²` with
/// target `η^{(K−1)/2} exp(−η Σ β_j²/λ_j² / 2) / (1 + η)`.
pub fn update_horseshoe_scales(
    rng: &mut RngHandle,
    state: &ChainState,
    cfg: &SamplerConfig,
) -> Result<(DVector<f64>, f64)> {
    let k = state.beta.len();
    let start = cfg.first_shrunk().min(k);
    let mut lambda2 = state.lambda2.clone();
    for j in start..k {
        let mu2 = state.beta[j] * state.beta[j] / state.nu2;
        lambda2[j] = horseshoe_local_step(rng, lambda2[j], mu2)?;
    }
    let shrunk = (k - start) as f64;
    let ss: f64 = (start..k).map(|j| state.beta[j] * state.beta[j] / lambda2[j]).sum();
    let eta = slice_step(rng, 1.0 / state.nu2, |rng, upper| {
        rng.truncated_gamma(0.5 * (shrunk + 1.0), 0.5 * ss, upper)
    })?;
    Ok((lambda2, 1.0 / eta))
}

/// Bayesian-lasso scales under `β_j ~ N(0, λ_j²)`, `λ_j² ~ Exp(rate u²/2)`:
/// `1/λ_j² ~ IG(mean u/|β_j|, shape u²)`, then the hyperrate from its
/// `Gamma(1 + K, 1 + Σ λ_j²/2)` conditional (unit-rate exponential hyperprior).
pub fn update_lasso_scales(
    rng: &mut RngHandle,
    state: &ChainState,
    cfg: &SamplerConfig,
) -> Result<(DVector<f64>, f64)> {
    let k = state.beta.len();
    let start = cfg.first_shrunk().min(k);
    let u2 = state.lasso_rate;
    let u = u2.sqrt();
    let mut lambda2 = state.lambda2.clone();
    for j in start..k {
        let mean = u / state.beta[j].abs().max(cfg.residual_floor);
        lambda2[j] = 1.0 / rng.inverse_gaussian(mean, u2)?;
    }
    let total: f64 = (start..k).map(|j| lambda2[j]).sum();
    let rate = rng.gamma(1.0 + (k - start) as f64, 1.0 + 0.5 * total)?;
    Ok((lambda2, rate))
}

/// `κ_j = 1 / (1 + T σ⁻² ν² s_j² λ_j²)`.
pub fn shrinkage_factor(nu2: f64, lambda2_j: f64, s_j: f64, t: usize, sigma2: f64) -> f64 {
    1.0 / (1.0 + t as f64 / sigma2 * nu2 * s_j * s_j * lambda2_j)
}

fn diverged(update: &'static str, sweep: usize, detail: impl Into<String>) -> Error {
    Error::Divergence {
        update,
        sweep,
        detail: detail.into(),
    }
}

fn all_positive(v: &DVector<f64>) -> bool {
    v.iter().all(|x| *x > 0.0 && x.is_finite())
}

/// One full sweep in the order z, σ, β, scales.
pub fn sweep(
    rng: &mut RngHandle,
    state: &mut ChainState,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    q: &QuantileSpec,
    cfg: &SamplerConfig,
    index: usize,
) -> Result<()> {
    let z = update_latent_z(rng, state, x, y, q, cfg)?;
    if !all_positive(&z) {
        return Err(diverged("latent_z", index, "non-positive or non-finite mixing variable"));
    }
    state.z = z;

    let sigma = update_sigma(rng, state, x, y, q, cfg)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(diverged("sigma", index, format!("scale became {sigma}")));
    }
    state.sigma = sigma;

    let beta = update_beta(rng, state, x, y, q, cfg).map_err(|e| match e {
        Error::Numerical(msg) => diverged("beta", index, msg),
        other => other,
    })?;
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(diverged("beta", index, "non-finite coefficient"));
    }
    state.beta = beta;

    match cfg.prior {
        Prior::Horseshoe => {
            let (lambda2, nu2) = update_horseshoe_scales(rng, state, cfg)?;
            if !all_positive(&lambda2) || !(nu2 > 0.0 && nu2.is_finite()) {
                return Err(diverged("horseshoe_scales", index, "non-finite scale"));
            }
            state.lambda2 = lambda2;
            state.nu2 = nu2;
        }
        Prior::Lasso => {
            let (lambda2, rate) = update_lasso_scales(rng, state, cfg)?;
            if !all_positive(&lambda2) || !(rate > 0.0 && rate.is_finite()) {
                return Err(diverged("lasso_scales", index, "non-finite scale"));
            }
            state.lambda2 = lambda2;
            state.lasso_rate = rate;
        }
    }
    Ok(())
}

/// Retained draws of one chain.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub quantile: QuantileSpec,
    /// `n_keep × K`.
    pub betas: DMatrix<f64>,
    pub sigmas: Vec<f64>,
    pub nu2s: Vec<f64>,
    /// Posterior mean of each local scale.
    pub lambda2_mean: DVector<f64>,
    pub config: SamplerConfig,
}

impl PosteriorDraws {
    pub fn n_keep(&self) -> usize {
        self.betas.nrows()
    }

    pub fn dim(&self) -> usize {
        self.betas.ncols()
    }

    /// Posterior mean of `β`, the point estimate.
    pub fn mean_beta(&self) -> DVector<f64> {
        self.betas.row_mean().transpose()
    }

    /// Equal-tailed `level` credible interval per coefficient.
    pub fn credible_intervals(&self, level: f64) -> Result<Vec<(f64, f64)>> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Domain(format!("credible level {level} outside (0,1)")));
        }
        let lo = 0.5 * (1.0 - level);
        Ok((0..self.dim())
            .map(|j| {
                let mut col: Vec<f64> = self.betas.column(j).iter().copied().collect();
                col.sort_by(f64::total_cmp);
                (interpolated_quantile(&col, lo), interpolated_quantile(&col, 1.0 - lo))
            })
            .collect())
    }

    pub fn summary(&self, level: f64) -> Result<PosteriorSummary> {
        let ci = self.credible_intervals(level)?;
        Ok(PosteriorSummary {
            p: self.quantile.p,
            n_keep: self.n_keep(),
            mean: self.mean_beta().iter().copied().collect(),
            lower: ci.iter().map(|c| c.0).collect(),
            upper: ci.iter().map(|c| c.1).collect(),
            level,
            sigma_mean: mean(&self.sigmas),
            config: self.config.clone(),
        })
    }

    /// Draws of coefficient `j`.
    pub fn trace(&self, j: usize) -> Vec<f64> {
        self.betas.column(j).iter().copied().collect()
    }
}

/// Serializable summary of a fitted quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub p: f64,
    pub n_keep: usize,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
    pub sigma_mean: f64,
    pub config: SamplerConfig,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Linear-interpolated quantile of sorted data (type 7).
fn interpolated_quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn check_inputs(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "X has {} rows but y has {} entries",
            x.nrows(),
            y.len()
        )));
    }
    if x.ncols() == 0 {
        return Err(Error::Dimension("X has no columns".into()));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite entry in X or y".into()));
    }
    Ok(())
}

/// Run one chain of `cfg.n_iter` sweeps at quantile level `p`.
pub fn run_chain(
    rng: &mut RngHandle,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    p: f64,
    cfg: &SamplerConfig,
) -> Result<PosteriorDraws> {
    check_inputs(x, y)?;
    cfg.validate()?;
    let q = QuantileSpec::new(p)?;
    let (t, k) = x.shape();
    let n_keep = cfg.n_keep();
    let mut state = ChainState::initial(k, t);
    let mut betas = DMatrix::zeros(n_keep, k);
    let mut sigmas = Vec::with_capacity(n_keep);
    let mut nu2s = Vec::with_capacity(n_keep);
    let mut lambda2_sum = DVector::zeros(k);
    let mut kept = 0;
    for i in 0..cfg.n_iter {
        sweep(rng, &mut state, x, y, &q, cfg, i)?;
        if i >= cfg.n_burn && (i + 1 - cfg.n_burn).is_multiple_of(cfg.thin) && kept < n_keep {
            betas.row_mut(kept).copy_from(&state.beta.transpose());
            sigmas.push(state.sigma);
            nu2s.push(state.nu2);
            lambda2_sum += &state.lambda2;
            kept += 1;
        }
    }
    debug_assert_eq!(kept, n_keep);
    Ok(PosteriorDraws {
        quantile: q,
        betas,
        sigmas,
        nu2s,
        lambda2_mean: lambda2_sum / n_keep.max(1) as f64,
        config: cfg.clone(),
    })
}

/// Column centring/scaling. A leading all-ones column is kept as the
/// intercept; other columns are centred (only when an intercept is present)
/// and scaled to unit variance. Constant non-intercept columns are left
/// unscaled.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub has_intercept: bool,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let has_intercept = x.ncols() > 0 && x.column(0).iter().all(|v| *v == 1.0);
        let n = x.nrows().max(1) as f64;
        let mut means = vec![0.0; x.ncols()];
        let mut scales = vec![1.0; x.ncols()];
        for j in usize::from(has_intercept)..x.ncols() {
            let col = x.column(j);
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            if has_intercept {
                means[j] = m;
            }
            if var > 0.0 {
                scales[j] = var.sqrt();
            }
        }
        Self {
            has_intercept,
            means,
            scales,
        }
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.means[j]) / self.scales[j])
    }

    /// Map coefficients fitted on transformed columns back to raw columns.
    pub fn to_original(&self, beta: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::from_fn(beta.len(), |j, _| beta[j] / self.scales[j]);
        if self.has_intercept {
            let shift: f64 = (1..beta.len()).map(|j| out[j] * self.means[j]).sum();
            out[0] -= shift;
        }
        out
    }
}

/// [`run_chain`] on standardized columns, with every retained draw mapped
/// back to the original scale.
pub fn fit_standardized(
    rng: &mut RngHandle,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    p: f64,
    cfg: &SamplerConfig,
) -> Result<PosteriorDraws> {
    check_inputs(x, y)?;
    let st = Standardizer::fit(x);
    let mut draws = run_chain(rng, &st.transform(x), y, p, cfg)?;
    for i in 0..draws.n_keep() {
        let b = st.to_original(&draws.betas.row(i).transpose());
        draws.betas.row_mut(i).copy_from(&b.transpose());
    }
    Ok(draws)
}

/// Split potential scale reduction of one or more chains of a scalar.
/// Each chain is halved; returns NaN when fewer than four draws per half.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let mut halves: Vec<&[f64]> = Vec::new();
    let n = chains.iter().map(|c| c.len() / 2).min().unwrap_or(0);
    if n < 4 {
        return f64::NAN;
    }
    for c in chains {
        halves.push(&c[..n]);
        halves.push(&c[c.len() - n..]);
    }
    let m = halves.len() as f64;
    let nf = n as f64;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let grand = mean(&means);
    let b = nf / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = halves
        .iter()
        .zip(&means)
        .map(|(h, mu)| h.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / m;
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    (var_plus / w).sqrt()
}

/// Monte Carlo standard error of a chain mean by non-overlapping batch means.
pub fn batch_means_se(draws: &[f64], n_batches: usize) -> f64 {
    let nb = n_batches.max(2);
    let size = draws.len() / nb;
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = draws.chunks_exact(size).take(nb).map(mean).collect();
    let mu = mean(&means);
    let var = means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / (nb as f64 - 1.0);
    (var / nb as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantile::empirical_quantile;

    fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }

    fn small_problem(rng: &mut RngHandle, t: usize, k: usize) -> (DMatrix<f64>, DVector<f64>) {
        let x = DMatrix::from_fn(t, k, |_, j| if j == 0 { 1.0 } else { rng.standard_normal() });
        let y = DVector::from_fn(t, |i, _| 0.5 + x[(i, k - 1)] + rng.standard_normal());
        (x, y)
    }

    #[test]
    fn config_validation() {
        let mut cfg = SamplerConfig::default();
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.n_keep(), 4000);
        cfg.n_burn = cfg.n_iter;
        assert!(cfg.validate().is_err());
        let cfg = SamplerConfig {
            a_prior: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SamplerConfig {
            thin: 3,
            n_iter: 100,
            n_burn: 10,
            ..Default::default()
        };
        assert_eq!(cfg.n_keep(), 30);
    }

    #[test]
    fn median_z_shape_is_two_over_sigma() {
        // p = 0.5: θ = 0, τ² = 8, so the IG shape is 16 / (8σ) = 2/σ.
        let q = QuantileSpec::new(0.5).unwrap();
        let sigma = 1.7;
        let c = q.theta * q.theta + 2.0 * q.tau2;
        assert!((c / (sigma * q.tau2) - 2.0 / sigma).abs() < 1e-15);
    }

    #[test]
    fn latent_z_matches_direct_inverse_gaussian() {
        let q = QuantileSpec::new(0.3).unwrap();
        let cfg = SamplerConfig::default();
        let x = DMatrix::from_element(1, 1, 1.0);
        let y = DVector::from_element(1, 0.8);
        let mut state = ChainState::initial(1, 1);
        state.beta[0] = 0.2;
        state.sigma = 0.9;
        let mut rng = RngHandle::new(11, 0);
        let mut from_update: Vec<f64> = (0..20_000)
            .map(|_| 1.0 / update_latent_z(&mut rng, &state, &x, &y, &q, &cfg).unwrap()[0])
            .collect();
        let c = q.theta * q.theta + 2.0 * q.tau2;
        let (mean, shape) = (c.sqrt() / 0.6, c / (0.9 * q.tau2));
        let mut rng = RngHandle::new(12, 0);
        let mut direct: Vec<f64> = (0..20_000).map(|_| rng.inverse_gaussian(mean, shape).unwrap()).collect();
        let d = ks_two_sample(&mut from_update, &mut direct);
        // p > 0.01 for two samples of 20k: D < 1.63 * sqrt(2/20000)
        assert!(d < 1.63 * (2.0f64 / 20_000.0).sqrt(), "KS distance {d}");
    }

    #[test]
    fn zero_residual_limit() {
        // As r → 0 the conditional of z tends to Gamma(1/2, rate d/2) with
        // d = (θ²+2τ²)/(στ²); for p = 0.5, σ = 1 that is mean 1/d = 0.5.
        let q = QuantileSpec::new(0.5).unwrap();
        let cfg = SamplerConfig::default();
        let x = DMatrix::from_element(1, 1, 1.0);
        let y = DVector::from_element(1, 0.0);
        let state = ChainState::initial(1, 1);
        let mut rng = RngHandle::new(13, 0);
        let n = 100_000;
        let zs: Vec<f64> = (0..n)
            .map(|_| update_latent_z(&mut rng, &state, &x, &y, &q, &cfg).unwrap()[0])
            .collect();
        let m = mean(&zs);
        // Var = (1/2) / (d/2)² = 0.5 at d = 2.
        assert!((m - 0.5).abs() < 4.0 * (0.5f64 / n as f64).sqrt(), "mean {m}");
    }

    #[test]
    fn sigma_without_data_is_prior() {
        let q = QuantileSpec::new(0.5).unwrap();
        let cfg = SamplerConfig {
            a_prior: 3.0,
            b_prior: 2.0,
            ..Default::default()
        };
        let x = DMatrix::zeros(0, 1);
        let y = DVector::zeros(0);
        let state = ChainState::initial(1, 0);
        assert_eq!(sigma_posterior(&state, &x, &y, &q, &cfg), (3.0, 2.0));
    }

    #[test]
    fn sigma_perfect_fit_rate() {
        let q = QuantileSpec::new(0.25).unwrap();
        let cfg = SamplerConfig::default();
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, -1.0]);
        let mut state = ChainState::initial(1, 3);
        state.beta[0] = 0.4;
        state.z = DVector::from_vec(vec![0.5, 1.5, 2.0]);
        let y = &x * &state.beta + &state.z * q.theta;
        let (shape, rate) = sigma_posterior(&state, &x, &y, &q, &cfg);
        assert!((shape - (0.1 + 4.5)).abs() < 1e-15);
        assert!((rate - (0.1 + 4.0)).abs() < 1e-12);
    }

    #[test]
    fn sigma_draws_match_inverse_gamma_mean() {
        let q = QuantileSpec::new(0.7).unwrap();
        let cfg = SamplerConfig::default();
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 1.0]);
        let y = DVector::from_vec(vec![0.3, -1.2, 2.5]);
        let mut state = ChainState::initial(1, 3);
        state.z = DVector::from_vec(vec![0.4, 1.1, 0.8]);
        let (a, b) = sigma_posterior(&state, &x, &y, &q, &cfg);
        let mut rng = RngHandle::new(14, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| update_sigma(&mut rng, &state, &x, &y, &q, &cfg).unwrap()).collect();
        let m = mean(&xs);
        let target = b / (a - 1.0);
        let sd = target / (a - 2.0).sqrt();
        assert!((m - target).abs() < 4.0 * sd / (n as f64).sqrt(), "{m} vs {target}");
    }

    #[test]
    fn beta_scalar_closed_form() {
        // One regressor, z ≡ 1, θ = 0 (p = 0.5): mean = (x'Ux + 1/d)⁻¹ x'Uy.
        let q = QuantileSpec::new(0.5).unwrap();
        let cfg = SamplerConfig::default();
        let x = DMatrix::from_column_slice(4, 1, &[0.5, -1.0, 2.0, 1.5]);
        let y = DVector::from_vec(vec![1.0, -0.5, 2.2, 0.7]);
        let mut state = ChainState::initial(1, 4);
        state.sigma = 0.3;
        state.lambda2[0] = 2.0;
        state.nu2 = 0.5;
        let u = 1.0 / (q.tau2 * state.sigma);
        let xux: f64 = x.iter().map(|v| v * v * u).sum();
        let xuy: f64 = x.iter().zip(y.iter()).map(|(a, b)| a * b * u).sum();
        let by_hand = xuy / (xux + 1.0 / (2.0 * 0.5));
        let sg = beta_conditional(&state, &x, &y, &q, &cfg).unwrap();
        assert!((sg.mean().unwrap()[0] - by_hand).abs() < 1e-12);
    }

    #[test]
    fn beta_draws_match_dense_mean() {
        let q = QuantileSpec::new(0.4).unwrap();
        let mut rng = RngHandle::new(15, 0);
        let (x, y) = small_problem(&mut rng, 50, 3);
        let mut state = ChainState::initial(3, 50);
        state.z = DVector::from_fn(50, |_, _| 0.2 + rng.uniform());
        state.sigma = 0.6;
        state.lambda2 = DVector::from_vec(vec![4.0, 0.3, 1.2]);
        state.nu2 = 0.8;
        let cfg = SamplerConfig {
            beta_backend: Backend::Fast,
            ..Default::default()
        };
        // Dense oracle.
        let u = state.z.map(|zt| 1.0 / (q.tau2 * zt * state.sigma));
        let xu = DMatrix::from_fn(3, 50, |j, t| x[(t, j)] * u[t]);
        let prec = &xu * &x + DMatrix::from_diagonal(&(state.lambda2.map(|l| 1.0 / (l * state.nu2))));
        let cov = prec.clone().try_inverse().unwrap();
        let mu = &cov * (&xu * (&y - &state.z * q.theta));
        let n = 100_000;
        let mut sum = DVector::zeros(3);
        for _ in 0..n {
            sum += update_beta(&mut rng, &state, &x, &y, &q, &cfg).unwrap();
        }
        let m = sum / n as f64;
        for j in 0..3 {
            let se = (cov[(j, j)] / n as f64).sqrt();
            assert!((m[j] - mu[j]).abs() < 3.0 * se, "coef {j}: {} vs {}", m[j], mu[j]);
        }
    }

    #[test]
    fn beta_vanishing_prior_variance() {
        let q = QuantileSpec::new(0.5).unwrap();
        let mut rng = RngHandle::new(16, 0);
        let (x, y) = small_problem(&mut rng, 20, 4);
        let mut state = ChainState::initial(4, 20);
        state.lambda2 = DVector::from_element(4, 1e-16);
        let b = update_beta(&mut rng, &state, &x, &y, &q, &SamplerConfig::default()).unwrap();
        assert!(b.amax() < 1e-6);
    }

    /// Prior chain: β_j ~ N(0, ν²λ_j²) alternated with the scale update.
    fn horseshoe_prior_chain(k: usize, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let cfg = SamplerConfig::default();
        let mut rng = RngHandle::new(seed, 0);
        let mut state = ChainState::initial(k, 0);
        let mut lam = Vec::with_capacity(n);
        let mut nus = Vec::with_capacity(n);
        for _ in 0..n {
            for j in 0..k {
                state.beta[j] = (state.nu2 * state.lambda2[j]).sqrt() * rng.standard_normal();
            }
            let (l, nu2) = update_horseshoe_scales(&mut rng, &state, &cfg).unwrap();
            state.lambda2 = l;
            state.nu2 = nu2;
            lam.push(state.lambda2[0]);
            nus.push(state.nu2);
        }
        (lam, nus)
    }

    #[test]
    fn horseshoe_prior_chain_has_unit_median() {
        // Squared half-Cauchy has median 1, for both local and global scales.
        let (mut lam, mut nus) = horseshoe_prior_chain(3, 200_000, 17);
        lam.sort_by(f64::total_cmp);
        nus.sort_by(f64::total_cmp);
        let med = lam[lam.len() / 2];
        let med_nu = nus[nus.len() / 2];
        assert!((med.ln()).abs() < 0.1, "local median {med}");
        assert!((med_nu.ln()).abs() < 0.15, "global median {med_nu}");
    }

    #[test]
    fn lasso_prior_chain_moments() {
        // Hyperrate fixed (single scale, hyperrate reset each step): λ² ~ Exp(rate u²/2).
        let cfg = SamplerConfig {
            prior: Prior::Lasso,
            ..Default::default()
        };
        let mut rng = RngHandle::new(18, 0);
        let mut state = ChainState::initial(1, 0);
        state.lasso_rate = 2.0;
        let n = 200_000;
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            state.beta[0] = state.lambda2[0].sqrt() * rng.standard_normal();
            let (l, _) = update_lasso_scales(&mut rng, &state, &cfg).unwrap();
            state.lambda2 = l;
            xs.push(state.lambda2[0]);
        }
        // Exp(rate 1): mean 1, second moment 2.
        let m = mean(&xs);
        let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        assert!((m - 1.0).abs() < 0.03, "mean {m}");
        assert!((m2 - 2.0).abs() < 0.15, "second moment {m2}");
    }

    #[test]
    fn lasso_large_signal_gets_large_scale() {
        let cfg = SamplerConfig {
            prior: Prior::Lasso,
            ..Default::default()
        };
        let mut rng = RngHandle::new(19, 0);
        let mut state = ChainState::initial(2, 0);
        state.beta = DVector::from_vec(vec![0.01, 5.0]);
        let (mut a, mut b) = (0.0, 0.0);
        for _ in 0..5000 {
            let (l, _) = update_lasso_scales(&mut rng, &state, &cfg).unwrap();
            a += l[0];
            b += l[1];
        }
        // E[λ²] = |β|/u + 1/u²: about 1.01 against 6.
        assert!(b > 4.0 * a, "{a} vs {b}");
    }

    #[test]
    fn lasso_sign_symmetry() {
        let cfg = SamplerConfig {
            prior: Prior::Lasso,
            ..Default::default()
        };
        let mut s1 = ChainState::initial(1, 0);
        s1.beta[0] = 0.7;
        let mut s2 = s1.clone();
        s2.beta[0] = -0.7;
        let mut r1 = RngHandle::new(20, 0);
        let mut r2 = RngHandle::new(20, 0);
        for _ in 0..100 {
            assert_eq!(
                update_lasso_scales(&mut r1, &s1, &cfg).unwrap(),
                update_lasso_scales(&mut r2, &s2, &cfg).unwrap()
            );
        }
    }

    #[test]
    fn horseshoe_slice_bound_holds() {
        // Replay the slice step and confirm η lies under the slice height.
        let mut rng = RngHandle::new(21, 0);
        for i in 0..10_000 {
            let eta = 0.01 + i as f64 * 0.01;
            let mut probe = rng.clone();
            let u = probe.uniform_pos() / (1.0 + eta);
            let next = slice_step(&mut rng, eta, |r, upper| Ok(r.truncated_exponential_unchecked(0.3, upper))).unwrap();
            assert!(u < 1.0 / (1.0 + next));
        }
    }

    #[test]
    fn intercept_exemption_keeps_scale() {
        let cfg = SamplerConfig {
            shrink_intercept: false,
            ..Default::default()
        };
        let mut rng = RngHandle::new(22, 0);
        let mut state = ChainState::initial(3, 0);
        state.beta = DVector::from_vec(vec![5.0, 0.1, 0.2]);
        let (l, _) = update_horseshoe_scales(&mut rng, &state, &cfg).unwrap();
        assert_eq!(l[0], 1.0);
        assert_eq!(state.prior_variances(&cfg)[0], FLAT_INTERCEPT_VARIANCE);
    }

    #[test]
    fn shrinkage_factor_values() {
        assert!((shrinkage_factor(1.0, 1.0, 1.0, 1, 1.0) - 0.5).abs() < 1e-15);
        assert!((shrinkage_factor(0.5, 2.0, 1.0, 4, 4.0) - 0.5).abs() < 1e-15);
        assert!(shrinkage_factor(1.0, 1e-300, 1.0, 100, 1.0) > 1.0 - 1e-12);
        let mut last = 1.0;
        for i in 1..100 {
            let k = shrinkage_factor(0.3, i as f64 * 0.1, 1.2, 50, 2.0);
            assert!(k < last && k > 0.0);
            last = k;
        }
    }

    #[test]
    fn intercept_only_recovers_median() {
        let mut rng = RngHandle::new(23, 0);
        let y = DVector::from_fn(500, |_, _| rng.standard_normal());
        let x = DMatrix::from_element(500, 1, 1.0);
        let cfg = SamplerConfig {
            n_iter: 2000,
            n_burn: 500,
            ..Default::default()
        };
        let draws = run_chain(&mut rng, &x, &y, 0.5, &cfg).unwrap();
        let b0 = draws.mean_beta()[0];
        let med = empirical_quantile(y.as_slice(), 0.5).unwrap();
        assert!(b0.abs() < 0.15, "intercept {b0}");
        assert!((b0 - med).abs() < 0.1);
        let q90 = run_chain(&mut rng, &x, &y, 0.9, &cfg).unwrap().mean_beta()[0];
        let e90 = empirical_quantile(y.as_slice(), 0.9).unwrap();
        assert!((q90 - e90).abs() < 0.15, "{q90} vs {e90}");
    }

    #[test]
    fn chain_is_deterministic_and_retains_right_count() {
        let mut rng = RngHandle::new(24, 0);
        let (x, y) = small_problem(&mut rng, 30, 5);
        let cfg = SamplerConfig {
            n_iter: 105,
            n_burn: 20,
            thin: 4,
            ..Default::default()
        };
        let a = run_chain(&mut RngHandle::new(9, 1), &x, &y, 0.3, &cfg).unwrap();
        let b = run_chain(&mut RngHandle::new(9, 1), &x, &y, 0.3, &cfg).unwrap();
        assert_eq!(a.n_keep(), 21);
        assert_eq!(a.betas, b.betas);
        assert_eq!(a.sigmas, b.sigmas);
        assert!(a.sigmas.iter().all(|s| *s > 0.0));
        assert!(a.nu2s.iter().all(|s| *s > 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = SamplerConfig::default();
        let mut rng = RngHandle::new(25, 0);
        let x = DMatrix::from_element(3, 1, 1.0);
        let y = DVector::from_vec(vec![1.0, f64::NAN, 0.0]);
        assert!(matches!(run_chain(&mut rng, &x, &y, 0.5, &cfg), Err(Error::Input(_))));
        let y = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(run_chain(&mut rng, &x, &y, 0.5, &cfg), Err(Error::Dimension(_))));
        let y = DVector::from_vec(vec![1.0, 0.0, 2.0]);
        assert!(run_chain(&mut rng, &x, &y, 1.0, &cfg).is_err());
    }

    #[test]
    fn backends_agree_on_small_problem() {
        let mut rng = RngHandle::new(26, 0);
        let (x, y) = small_problem(&mut rng, 40, 4);
        let run = |backend, seed| {
            let cfg = SamplerConfig {
                n_iter: 4000,
                n_burn: 500,
                beta_backend: backend,
                ..Default::default()
            };
            run_chain(&mut RngHandle::new(seed, 0), &x, &y, 0.5, &cfg).unwrap()
        };
        let fast = run(Backend::Fast, 1);
        let chol = run(Backend::Cholesky, 2);
        for j in 0..4 {
            let (a, b) = (fast.trace(j), chol.trace(j));
            let se = (batch_means_se(&a, 20).powi(2) + batch_means_se(&b, 20).powi(2)).sqrt();
            let diff = (mean(&a) - mean(&b)).abs();
            assert!(diff < 2.0 * se + 1e-3, "coef {j}: diff {diff}, se {se}");
        }
    }

    #[test]
    fn standardizer_round_trip() {
        let mut rng = RngHandle::new(27, 0);
        let x = DMatrix::from_fn(25, 3, |_, j| if j == 0 { 1.0 } else { 3.0 + 2.0 * rng.standard_normal() });
        let st = Standardizer::fit(&x);
        assert!(st.has_intercept);
        let xs = st.transform(&x);
        assert!(xs.column(1).mean().abs() < 1e-12);
        let beta_s = DVector::from_vec(vec![0.4, -1.0, 2.0]);
        let beta = st.to_original(&beta_s);
        let diff = (&xs * &beta_s - &x * &beta).amax();
        assert!(diff < 1e-12);
    }

    #[test]
    fn diagnostics_basics() {
        let mut rng = RngHandle::new(28, 0);
        let a: Vec<f64> = (0..4000).map(|_| rng.standard_normal()).collect();
        let r = split_rhat(&[&a]);
        assert!((r - 1.0).abs() < 0.02, "rhat {r}");
        let drift: Vec<f64> = (0..4000).map(|i| i as f64 / 100.0 + rng.standard_normal()).collect();
        assert!(split_rhat(&[&drift]) > 1.5);
        let se = batch_means_se(&a, 20);
        assert!((se - 1.0 / (4000f64).sqrt()).abs() < 0.01);
    }

    #[test]
    fn summary_serializes() {
        let mut rng = RngHandle::new(29, 0);
        let (x, y) = small_problem(&mut rng, 20, 2);
        let cfg = SamplerConfig {
            n_iter: 200,
            n_burn: 50,
            ..Default::default()
        };
        let d = run_chain(&mut rng, &x, &y, 0.5, &cfg).unwrap();
        let s = d.summary(0.9).unwrap();
        assert!(s.lower.iter().zip(&s.mean).all(|(l, m)| l <= m));
        let json = serde_json::to_string(&s).unwrap();
        let back: PosteriorSummary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}
