//! Executable checks of exponential tail bounds, the fourth-moment sandwich
//! and moderate-deviation ratios for weighted sums of noise.

use crate::error::{invalid, Error, Result};
use crate::noise::{d_dependent_sample, NoiseFamily, NoiseSpec, SeedSpec};
use crate::normal::{cdf, upper_tail};
use crate::risk::functional::McEstimate;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const CHUNK: usize = 4096;

/// Mean of `sample(rng)` over `reps` draws, in fixed chunks so the result
/// does not depend on the thread count.
pub(crate) fn parallel_mean<F>(reps: usize, seed: SeedSpec, sample: F) -> McEstimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let chunks = reps.div_ceil(CHUNK);
    let parts: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed.child(c as u64).rng();
            let len = CHUNK.min(reps - c * CHUNK);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                let v = sample(&mut rng);
                s1 += v;
                s2 += v * v;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    McEstimate::from_sums(s1, s2, reps)
}

fn weighted_sum(weights: &[f64], base: &NoiseSpec, rng: &mut ChaCha8Rng) -> f64 {
    weights.iter().map(|w| w * base.draw(rng)).sum()
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < 2 {
        return Err(invalid(format!("need at least 2 replicates, got {reps}")));
    }
    Ok(())
}

/// Which exponential inequality to test, with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum TailBoundParams {
    /// `S = Σ w_i e_i` with bounded `e`; event `S >= s_n x`.
    Kolmogorov { weights: Vec<f64>, base: NoiseSpec, x: f64 },
    /// `E S² 1{S >= a}` for `Σ w_i² Var e = 1`, with `0 < a < a_n` and
    /// `k_n = 1 - a_n K / 2 > 0`.
    TruncatedMoment { weights: Vec<f64>, base: NoiseSpec, a: f64, a_n: f64 },
    /// `n` moving medians of width `d` over bounded i.i.d. `base`; event `Σ X_i >= x`.
    DDependent { base: NoiseSpec, d: usize, n: usize, x: f64 },
}

impl TailBoundParams {
    pub fn kind(&self) -> &'static str {
        match self {
            TailBoundParams::Kolmogorov { .. } => "kolmogorov",
            TailBoundParams::TruncatedMoment { .. } => "truncated_moment",
            TailBoundParams::DDependent { .. } => "d_dependent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCheck {
    pub kind: &'static str,
    /// Tail probability, or truncated second moment.
    pub empirical: f64,
    pub se: f64,
    pub bound: f64,
    /// `empirical <= bound + 3 se`.
    pub pass: bool,
}

fn bounded(base: &NoiseSpec) -> Result<f64> {
    base.bound().ok_or_else(|| Error::Hypothesis(format!("{base} is not bounded")))
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
        return Err(invalid("weights must be a non-empty finite vector"));
    }
    Ok(())
}

/// `exp(-x²/2 (1 - xK/(2 s_n)))` for `x <= s_n / K`, else `exp(-x s_n / (4K))`.
pub fn kolmogorov_bound(x: f64, s_n: f64, k: f64) -> f64 {
    if x <= s_n / k {
        (-x * x / 2.0 * (1.0 - x * k / (2.0 * s_n))).exp()
    } else {
        (-x * s_n / (4.0 * k)).exp()
    }
}

/// `(a² + 2)/k e^{-k a²/2} + (8 + 32K²) e^{-1/(4K²)}` with `k = 1 - a_n K/2`.
pub fn truncated_moment_bound(a: f64, a_n: f64, k_n: f64) -> f64 {
    let k = 1.0 - a_n * k_n / 2.0;
    let tail = (-1.0 / (4.0 * k_n * k_n)).exp();
    (a * a + 2.0) / k * (-k * a * a / 2.0).exp() + (8.0 + 32.0 * k_n * k_n) * tail
}

/// `D e^{-x²/(4D²σ²)}` for `x <= σ² D / K`, else `D e^{-x/(4KD)}`.
pub fn d_dependent_bound(x: f64, d: usize, sigma_max: f64, k: f64) -> f64 {
    let df = d as f64;
    let s2 = sigma_max * sigma_max;
    if x <= s2 * df / k {
        df * (-x * x / (4.0 * df * df * s2)).exp()
    } else {
        df * (-x / (4.0 * k * df)).exp()
    }
}

/// Variance of the median of `d` i.i.d. draws, for the bounded families.
fn median_variance(base: &NoiseSpec, d: usize) -> Result<f64> {
    match base.family {
        NoiseFamily::BernoulliSym => Ok(base.scale * base.scale),
        NoiseFamily::UniformSym => {
            let b = bounded(base)?;
            Ok(b * b / (d as f64 + 2.0))
        }
        _ => Err(Error::Hypothesis(format!("{base} is not bounded"))),
    }
}

/// Monte Carlo check of one exponential inequality.
pub fn tail_bound_check(params: &TailBoundParams, reps: usize, seed: SeedSpec) -> Result<TailCheck> {
    check_reps(reps)?;
    let (est, bound) = match params {
        TailBoundParams::Kolmogorov { weights, base, x } => {
            check_weights(weights)?;
            if !(*x >= 0.0) {
                return Err(invalid(format!("x must be >= 0, got {x}")));
            }
            let b = bounded(base)?;
            let var = base.variance().expect("bounded noise has a variance");
            let s_n = (weights.iter().map(|w| w * w).sum::<f64>() * var).sqrt();
            let k = weights.iter().fold(0.0f64, |a, w| a.max(w.abs())) * b;
            let level = s_n * x;
            let est = parallel_mean(reps, seed, |rng| (weighted_sum(weights, base, rng) >= level) as u8 as f64);
            (est, kolmogorov_bound(*x, s_n, k))
        }
        TailBoundParams::TruncatedMoment { weights, base, a, a_n } => {
            check_weights(weights)?;
            let b = bounded(base)?;
            let var = base.variance().expect("bounded noise has a variance");
            let total: f64 = weights.iter().map(|w| w * w).sum::<f64>() * var;
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Hypothesis(format!("sum of variances must be 1, got {total}")));
            }
            if !(*a > 0.0 && a < a_n) {
                return Err(Error::Hypothesis(format!("need 0 < a < a_n, got a = {a}, a_n = {a_n}")));
            }
            let k_n = weights.iter().fold(0.0f64, |acc, w| acc.max(w.abs())) * b;
            if !(1.0 - a_n * k_n / 2.0 > 0.0) {
                return Err(Error::Hypothesis("k_n = 1 - a_n K_n / 2 must be positive".into()));
            }
            let est = parallel_mean(reps, seed, |rng| {
                let s = weighted_sum(weights, base, rng);
                if s >= *a {
                    s * s
                } else {
                    0.0
                }
            });
            (est, truncated_moment_bound(*a, *a_n, k_n))
        }
        TailBoundParams::DDependent { base, d, n, x } => {
            if d % 2 == 0 || *n < *d {
                return Err(Error::Hypothesis(format!("need odd D <= n, got D = {d}, n = {n}")));
            }
            if !(*x >= 0.0) {
                return Err(invalid(format!("x must be >= 0, got {x}")));
            }
            let k = bounded(base)?;
            let per_term = median_variance(base, *d)?;
            let sigma_max = (n.div_ceil(*d) as f64 * per_term).sqrt();
            let est = parallel_mean(reps, seed, |rng| {
                let sub = SeedSpec::new(rand::RngCore::next_u64(rng), 0);
                let xs = d_dependent_sample(base, *d, *n, sub).expect("validated parameters");
                (xs.iter().sum::<f64>() >= *x) as u8 as f64
            });
            (est, d_dependent_bound(*x, *d, sigma_max, k))
        }
    };
    Ok(TailCheck {
        kind: params.kind(),
        empirical: est.mean,
        se: est.se,
        bound,
        pass: est.mean <= bound + 3.0 * est.se,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichCheck {
    pub estimate: f64,
    pub se: f64,
    /// `min(3, m4) - 4 se`.
    pub lower: f64,
    /// `max(3, m4) + 4 se`.
    pub upper: f64,
    pub pass: bool,
}

/// Monte Carlo `E(Σ a_i X_i)⁴` for unit `a` and standardised `X`, against
/// `[min(3, m4), max(3, m4)]`.
pub fn fourth_moment_sandwich(weights: &[f64], base: &NoiseSpec, reps: usize, seed: SeedSpec) -> Result<SandwichCheck> {
    check_reps(reps)?;
    check_weights(weights)?;
    let norm: f64 = weights.iter().map(|w| w * w).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("weights must have unit norm, got squared norm {norm}")));
    }
    let (var, m4) = match (base.variance(), base.fourth_moment()) {
        (Some(v), Some(m)) => (v, m / (v * v)),
        _ => return Err(Error::Hypothesis(format!("{base} has no finite fourth moment"))),
    };
    let sd = var.sqrt();
    let est = parallel_mean(reps, seed, |rng| (weighted_sum(weights, base, rng) / sd).powi(4));
    let lower = 3f64.min(m4) - 4.0 * est.se;
    let upper = 3f64.max(m4) + 4.0 * est.se;
    Ok(SandwichCheck {
        estimate: est.mean,
        se: est.se,
        lower,
        upper,
        pass: (lower..=upper).contains(&est.mean),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationRow {
    pub x: f64,
    /// `P(S <= x)` for `x <= 0`, `P(S > x)` for `x > 0`.
    pub empirical: f64,
    pub gaussian: f64,
    pub ratio: f64,
    pub se: f64,
}

/// `0.8 sqrt(2 log(1/M3))` with `M3 = Σ |w_i|³ E|X|³`.
pub fn deviation_window(weights: &[f64], base: &NoiseSpec) -> Result<f64> {
    let third = base
        .third_abs_moment()
        .ok_or_else(|| Error::Hypothesis(format!("{base} has no finite third moment")))?;
    let sd = base.variance().expect("finite third moment implies finite variance").sqrt();
    let m3: f64 = weights.iter().map(|w| w.abs().powi(3)).sum::<f64>() * third / sd.powi(3);
    if m3 >= 1.0 {
        return Ok(0.0);
    }
    Ok(0.8 * (2.0 * (1.0 / m3).ln()).sqrt())
}

/// Ratios of empirical tails of the standardised weighted sum to Gaussian tails.
pub fn deviation_ratio_probe(
    weights: &[f64],
    base: &NoiseSpec,
    xs: &[f64],
    reps: usize,
    seed: SeedSpec,
) -> Result<Vec<DeviationRow>> {
    check_reps(reps)?;
    check_weights(weights)?;
    let norm: f64 = weights.iter().map(|w| w * w).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("weights must have unit norm, got squared norm {norm}")));
    }
    let window = deviation_window(weights, base)?;
    if let Some(x) = xs.iter().find(|x| !(x.abs() <= window)) {
        return Err(invalid(format!("x = {x} lies outside the moderate-deviation window |x| <= {window}")));
    }
    let sd = base.variance().expect("checked by the window").sqrt();
    let chunks = reps.div_ceil(CHUNK);
    let counts: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed.child(c as u64).rng();
            let mut hits = vec![0u64; xs.len()];
            for _ in 0..CHUNK.min(reps - c * CHUNK) {
                let s = weighted_sum(weights, base, &mut rng) / sd;
                for (h, &x) in hits.iter_mut().zip(xs) {
                    if (x <= 0.0 && s <= x) || (x > 0.0 && s > x) {
                        *h += 1;
                    }
                }
            }
            hits
        })
        .collect();
    let r = reps as f64;
    Ok(xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let p = counts.iter().map(|c| c[i]).sum::<u64>() as f64 / r;
            let g = if x <= 0.0 { cdf(x) } else { upper_tail(x) };
            DeviationRow { x, empirical: p, gaussian: g, ratio: p / g, se: (p * (1.0 - p) / r).sqrt() / g }
        })
        .collect())
}
