//! Single-coefficient soft-threshold risk `p(λ, θ) = E (T_λ(θ + Z) - θ)²`
//! in unit-variance coefficient units.

use crate::error::{invalid, Error, Result};
use crate::noise::{NoiseSpec, SeedSpec};
use crate::normal::{cdf, pdf, upper_tail};
use crate::threshold::soft;

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
}

impl McEstimate {
    pub(crate) fn from_sums(s1: f64, s2: f64, reps: usize) -> Self {
        let r = reps as f64;
        let mean = s1 / r;
        let var = if reps > 1 { ((s2 - s1 * mean) / (r - 1.0)).max(0.0) } else { 0.0 };
        Self { mean, se: (var / r).sqrt() }
    }
}

/// Closed form of `p(λ, θ)` for standard normal noise, `λ >= 0`:
///
/// `θ²[Φ(λ-θ) - Φ(-λ-θ)] + (1+λ²)[Q(λ-θ) + Q(λ+θ)] - (λ+θ)φ(λ-θ) + (θ-λ)φ(λ+θ)`.
pub fn gaussian_soft_risk(lambda: f64, theta: f64) -> f64 {
    if lambda.is_infinite() {
        return theta * theta;
    }
    let a = lambda - theta;
    let b = lambda + theta;
    let l2 = 1.0 + lambda * lambda;
    theta * theta * (cdf(a) - cdf(-b)) + l2 * (upper_tail(a) + upper_tail(b)) - b * pdf(a) - a * pdf(b)
}

/// Monte Carlo `p(λ, θ)` under `noise`. Noise without a finite variance is
/// rejected unless `allow_infinite` is set.
pub fn mc_soft_risk(
    noise: &NoiseSpec,
    lambda: f64,
    theta: f64,
    reps: usize,
    seed: SeedSpec,
    allow_infinite: bool,
) -> Result<McEstimate> {
    if reps < 100 {
        return Err(invalid(format!("mc_soft_risk needs at least 100 replicates, got {reps}")));
    }
    if !(lambda >= 0.0) {
        return Err(invalid(format!("threshold must be >= 0, got {lambda}")));
    }
    if noise.variance().is_none() && !allow_infinite {
        return Err(Error::InfiniteVariance(format!("{noise}: soft-threshold risk may be infinite")));
    }
    let mut rng = seed.rng();
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..reps {
        let d = soft(theta + noise.draw(&mut rng), lambda) - theta;
        let l = d * d;
        s1 += l;
        s2 += l * l;
    }
    Ok(McEstimate::from_sums(s1, s2, reps))
}
