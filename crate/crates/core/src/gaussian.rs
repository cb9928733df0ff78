//! Draws from `N(μ, Σ)` with `Σ = (Φ'Φ + D⁻¹)⁻¹` and `μ = ΣΦ'α`.
//!
//! `D` is the diagonal *prior covariance*. Two interchangeable backends:
//!
//! * [`sample_fast`]: data augmentation on the `T × T` system
//!   `(ΦDΦ' + I_T) w = α − ξ`; cost `O(T²K)`.
//! * [`sample_cholesky`]: factor the `K × K` precision `Φ'Φ + D⁻¹`; cost
//!   `O(K³ + TK²)`. Used as the reference and when `T ≥ K`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::rng::RngHandle;

/// Jitter schedule (relative to the mean diagonal) tried when a factorisation fails.
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct StructuredGaussian {
    /// `T × K`
    phi: DMatrix<f64>,
    /// Prior covariance diagonal, length `K`, strictly positive.
    d: DVector<f64>,
    /// Length `T`.
    alpha: DVector<f64>,
}

impl StructuredGaussian {
    pub fn new(phi: DMatrix<f64>, d: DVector<f64>, alpha: DVector<f64>) -> Result<Self> {
        if phi.ncols() != d.len() {
            return Err(Error::Dimension(format!(
                "Phi has {} columns but D has {} entries",
                phi.ncols(),
                d.len()
            )));
        }
        if phi.nrows() != alpha.len() {
            return Err(Error::Dimension(format!(
                "Phi has {} rows but alpha has {} entries",
                phi.nrows(),
                alpha.len()
            )));
        }
        if let Some(bad) = d.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!(
                "prior covariance entries must be positive and finite, found {bad}"
            )));
        }
        if phi.iter().chain(alpha.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite entry in Phi or alpha".into()));
        }
        Ok(Self { phi, d, alpha })
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn d(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Number of coefficients `K`.
    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Number of observations `T`.
    pub fn n_obs(&self) -> usize {
        self.alpha.len()
    }

    /// Posterior mean via the Woodbury form `DΦ'(ΦDΦ' + I_T)⁻¹α`.
    pub fn mean(&self) -> Result<DVector<f64>> {
        let chol = self.capacitance()?;
        let w = chol.solve(&self.alpha);
        Ok(self.d.component_mul(&self.phi.tr_mul(&w)))
    }

    /// `ΦDΦ' + I_T`, factorised.
    fn capacitance(&self) -> Result<Cholesky<f64, Dyn>> {
        let t = self.n_obs();
        let mut scaled = self.phi.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.d[j].sqrt();
        }
        let mut m = DMatrix::identity(t, t);
        m.gemm(1.0, &scaled, &scaled.transpose(), 1.0);
        factor_with_jitter(m, "capacitance matrix")
    }

    /// `Φ'Φ + D⁻¹`, factorised.
    fn precision(&self) -> Result<Cholesky<f64, Dyn>> {
        let mut a = DMatrix::from_diagonal(&self.d.map(|v| 1.0 / v));
        a.gemm(1.0, &self.phi.transpose(), &self.phi, 1.0);
        factor_with_jitter(a, "posterior precision")
    }
}

/// Cholesky with the jitter escalation policy; the error carries the
/// diagonal range as a conditioning hint.
fn factor_with_jitter(m: DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    let n = m.nrows();
    let diag = m.diagonal();
    let mean_diag = diag.mean();
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let mut jittered = m.clone();
        for i in 0..n {
            jittered[(i, i)] += rel * mean_diag;
        }
        if let Some(c) = Cholesky::new(jittered) {
            log::debug!("{what}: factorised after adding {rel:e} x mean diagonal");
            return Ok(c);
        }
        rel *= 10.0;
    }
    Err(Error::Numerical(format!(
        "{what} ({n}x{n}) not positive definite after jitter up to {JITTER_MAX:e}; \
         diagonal range [{:e}, {:e}], mean {mean_diag:e}",
        diag.min(),
        diag.max()
    )))
}

/// Which backend draws the coefficient block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Fast,
    Cholesky,
    /// Fast when `K > T`, Cholesky otherwise.
    Auto,
}

impl Backend {
    pub fn resolve(self, k: usize, t: usize) -> Backend {
        match self {
            Backend::Auto if k > t => Backend::Fast,
            Backend::Auto => Backend::Cholesky,
            other => other,
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Backend::Fast),
            "cholesky" => Ok(Backend::Cholesky),
            "auto" => Ok(Backend::Auto),
            _ => Err(Error::Input(format!("unknown backend '{s}'"))),
        }
    }
}

pub fn sample(rng: &mut RngHandle, sg: &StructuredGaussian, backend: Backend) -> Result<DVector<f64>> {
    match backend.resolve(sg.dim(), sg.n_obs()) {
        Backend::Fast => sample_fast(rng, sg),
        _ => sample_cholesky(rng, sg),
    }
}

/// Data-augmentation draw:
/// `u ~ N(0, D)`, `δ ~ N(0, I_T)`, `ξ = Φu + δ`,
/// `(ΦDΦ' + I_T) w = α − ξ`, return `u + DΦ'w`.
pub fn sample_fast(rng: &mut RngHandle, sg: &StructuredGaussian) -> Result<DVector<f64>> {
    let zk = DVector::from_fn(sg.dim(), |_, _| rng.standard_normal());
    let zt = DVector::from_fn(sg.n_obs(), |_, _| rng.standard_normal());
    sample_fast_with_noise(sg, &zk, &zt)
}

/// [`sample_fast`] with the standard-normal inputs supplied by the caller
/// (`u = √D ∘ zk`, `δ = zt`). Zero noise returns `μ`.
pub fn sample_fast_with_noise(
    sg: &StructuredGaussian,
    zk: &DVector<f64>,
    zt: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_noise(zk.len(), sg.dim(), "coefficient")?;
    check_noise(zt.len(), sg.n_obs(), "observation")?;
    let u = zk.component_mul(&sg.d.map(f64::sqrt));
    let xi = &sg.phi * &u + zt;
    let chol = sg.capacitance()?;
    let w = chol.solve(&(&sg.alpha - xi));
    Ok(u + sg.d.component_mul(&sg.phi.tr_mul(&w)))
}

/// Reference draw: `A = Φ'Φ + D⁻¹ = LL'`, return `A⁻¹Φ'α + L'⁻¹ z`.
pub fn sample_cholesky(rng: &mut RngHandle, sg: &StructuredGaussian) -> Result<DVector<f64>> {
    let z = DVector::from_fn(sg.dim(), |_, _| rng.standard_normal());
    sample_cholesky_with_noise(sg, &z)
}

pub fn sample_cholesky_with_noise(sg: &StructuredGaussian, z: &DVector<f64>) -> Result<DVector<f64>> {
    check_noise(z.len(), sg.dim(), "coefficient")?;
    let chol = sg.precision()?;
    let mean = chol.solve(&sg.phi.tr_mul(&sg.alpha));
    let dev = chol
        .l_dirty()
        .tr_solve_lower_triangular(z)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    Ok(mean + dev)
}

fn check_noise(got: usize, want: usize, what: &str) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Dimension(format!("{what} noise has {got} entries, expected {want}")))
    }
}
