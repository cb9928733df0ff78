//! Horseshoe-prior Bayesian quantile regression.
//!
//! The crate is organised bottom-up:
//!
//! * [`quantile`]: asymmetric-Laplace constants, the check loss and true
//!   quantile-coefficient profiles of location/scale designs.
//! * [`rng`]: seeded, stream-splittable random variate kernels.
//! * [`gaussian`]: draws from `N(μ, Σ)` with `Σ = (Φ'Φ + D⁻¹)⁻¹`, either by the
//!   `O(T²K)` data-augmentation route or a dense Cholesky reference.
//! * [`sampler`]: the Gibbs sampler (horseshoe and Bayesian-lasso priors).
//! * [`mc`]: Monte Carlo designs and coefficient/forecast error scores.
//! * [`density`]: quantile-to-density smoothing and forecast evaluation.
//! * [`gar`]: panel ingestion and rolling-origin quantile forecasting.
//!
//! Independent chains (quantile levels, replications, forecast origins) are
//! dispatched through [`par`], which uses rayon when the `parallel` feature is
//! enabled and plain iteration otherwise. Every chain owns its RNG stream, so
//! results are identical under either mode.

pub mod density;
pub mod error;
pub mod gar;
pub mod gaussian;
pub mod manifest;
pub mod mc;
pub mod par;
pub mod quantile;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use quantile::{QuantileGrid, QuantileSpec};
pub use rng::RngHandle;
pub use sampler::{run_chain, PosteriorDraws, Prior, SamplerConfig};
