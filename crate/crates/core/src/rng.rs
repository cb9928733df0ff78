//! Seeded random-variate kernels.
//!
//! Every generator is a ChaCha8 keystream addressed by `(seed, stream)`, so
//! independent chains get disjoint streams without coordination and a run is
//! reproducible regardless of how the chains are scheduled.
//!
//! Exponential-family kernels are parameterised by **rate** throughout.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// A reproducible random stream.
#[derive(Debug, Clone)]
pub struct RngHandle {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngHandle {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    /// Stream addressed by a path of job coordinates, e.g. `[replication,
    /// estimator, quantile]`. Distinct paths map to distinct streams with
    /// overwhelming probability.
    pub fn for_job(seed: u64, path: &[u64]) -> Self {
        let mut h = 0x243f_6a88_85a3_08d3_u64;
        for &c in path {
            h = splitmix64(h ^ splitmix64(c.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        }
        Self::new(seed, h)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on `(0, 1]`, safe to take logs of.
    #[inline]
    pub fn uniform_pos(&mut self) -> f64 {
        1.0 - self.inner.random::<f64>()
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn exponential(&mut self, rate: f64) -> Result<f64> {
        positive("exponential rate", rate)?;
        let e: f64 = Exp1.sample(&mut self.inner);
        Ok(e / rate)
    }

    pub fn gamma(&mut self, shape: f64, rate: f64) -> Result<f64> {
        positive("gamma shape", shape)?;
        positive("gamma rate", rate)?;
        let g = Gamma::new(shape, 1.0 / rate)
            .map_err(|e| Error::Domain(format!("gamma({shape}, {rate}): {e}")))?;
        Ok(g.sample(&mut self.inner))
    }

    /// Inverse gamma with density `∝ x^{-a-1} e^{-b/x}`.
    pub fn inverse_gamma(&mut self, shape: f64, rate: f64) -> Result<f64> {
        Ok(1.0 / self.gamma(shape, rate)?)
    }

    /// Inverse Gaussian with mean `mean` and shape `shape` (variance
    /// `mean³/shape`), by the Michael–Schucany–Haas transformation.
    pub fn inverse_gaussian(&mut self, mean: f64, shape: f64) -> Result<f64> {
        positive("inverse Gaussian mean", mean)?;
        positive("inverse Gaussian shape", shape)?;
        let v = self.standard_normal();
        let y = v * v;
        // Smaller root of the chi-square(1) transform, written without the
        // cancellation in `mu + mu^2 y / 2l - (mu / 2l) sqrt(4 mu l y + mu^2 y^2)`.
        let r = mean * y / (2.0 * shape);
        let x = mean / (1.0 + r + (r * (r + 2.0)).sqrt());
        if self.uniform() * (mean + x) <= mean {
            Ok(x)
        } else {
            Ok(mean * (mean / x))
        }
    }

    /// Exponential(rate) truncated to `(0, upper)` by CDF inversion.
    pub fn truncated_exponential(&mut self, rate: f64, upper: f64) -> Result<f64> {
        positive("truncated exponential rate", rate)?;
        positive("truncated exponential bound", upper)?;
        Ok(self.truncated_exponential_unchecked(rate, upper))
    }

    /// As [`truncated_exponential`](Self::truncated_exponential) but accepts a
    /// zero or vanishing rate, in which case the law is uniform on `(0, upper)`.
    pub(crate) fn truncated_exponential_unchecked(&mut self, rate: f64, upper: f64) -> f64 {
        let v = self.uniform();
        let ru = rate * upper;
        let x = if rate < 1e-300 || ru < 1e-12 {
            v * upper
        } else {
            // x = -ln(1 - v (1 - e^{-ru})) / r
            -(v * (-ru).exp_m1()).ln_1p() / rate
        };
        // Guard the open upper end against rounding.
        if x >= upper {
            upper * (1.0 - f64::EPSILON)
        } else {
            x
        }
    }

    /// Gamma(shape, rate) truncated to `(0, upper)`.
    ///
    /// Plain rejection when the bound sits beyond the mode region, otherwise
    /// CDF inversion on the log scale through the lower incomplete-gamma series.
    pub fn truncated_gamma(&mut self, shape: f64, rate: f64, upper: f64) -> Result<f64> {
        positive("truncated gamma shape", shape)?;
        positive("truncated gamma bound", upper)?;
        if !(rate >= 0.0) {
            return Err(Error::Domain(format!("truncated gamma rate {rate}")));
        }
        if rate < 1e-300 || rate * upper < 1e-12 * shape.max(1.0) {
            // Power law x^{shape-1} on (0, upper).
            return Ok(upper * self.uniform_pos().powf(1.0 / shape));
        }
        let z_max = rate * upper;
        if z_max >= shape {
            // P(X < upper) is at least about one half, rejection is cheap.
            for _ in 0..64 {
                let x = self.gamma(shape, rate)?;
                if x < upper {
                    return Ok(x);
                }
            }
        }
        // Invert F(z) = P(shape, z) / P(shape, z_max) on z ∈ (0, z_max).
        let log_target = self.uniform_pos().ln() + ln_lower_gamma_series(shape, z_max);
        let (mut lo, mut hi) = (0.0_f64, z_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ln_lower_gamma_series(shape, mid) < log_target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi) / rate)
    }
}

impl RngCore for RngHandle {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() || (v == f64::INFINITY && what.ends_with("bound")) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must be positive, got {v}")))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `ln γ(s, z) - ln Γ(s)`, i.e. the log regularised lower incomplete gamma,
/// via `γ(s,z) = z^s e^{-z} Σ_n z^n / (s (s+1) … (s+n))`.
///
/// Used only for `z < s` (and the final bisection interval), where the series
/// converges geometrically.
fn ln_lower_gamma_series(s: f64, z: f64) -> f64 {
    if z <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut n = 1.0;
    while n < 10_000.0 {
        term *= z / (s + n);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        n += 1.0;
    }
    s * z.ln() - z + sum.ln() - ln_gamma(s)
}
