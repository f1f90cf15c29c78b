//! Sliding-maximum estimator for noise with a well-behaved upper end.

use crate::error::{invalid, Error, Result};
use crate::noise::{max_statistics, NoiseSpec, SeedSpec};
use crate::risk::functional::McEstimate;
use crate::wavelet::Signal;
use rayon::prelude::*;
use std::collections::VecDeque;

/// `f̂_i = max(X_i, ..., X_{i+M-1}) - c_M` for `i <= n - M`, then constant.
/// `c_M` is `E max(e_1..e_M) / sqrt(n)` in the usual model.
pub fn max_estimator(x: &Signal, window: usize, c_m: f64) -> Result<Signal> {
    let n = x.len();
    if window < 1 || window > n {
        return Err(invalid(format!("max window must lie in [1, {n}], got {window}")));
    }
    Signal::new(sliding_max(x.samples(), window).into_iter().map(|v| v - c_m).collect())
}

fn sliding_max(x: &[f64], window: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    let mut dq: VecDeque<usize> = VecDeque::with_capacity(window);
    for (i, &v) in x.iter().enumerate() {
        while dq.back().is_some_and(|&b| x[b] <= v) {
            dq.pop_back();
        }
        dq.push_back(i);
        if dq[0] + window <= i {
            dq.pop_front();
        }
        if i + 1 >= window {
            out.push(x[dq[0]]);
        }
    }
    let last = *out.last().expect("window <= n");
    out.resize(n, last);
    out
}

/// Outcome of a Monte Carlo risk check against `4M² Σ|Δf|² + 4 var(max e)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxRiskCheck {
    pub risk: McEstimate,
    pub bound: f64,
    pub var_max: f64,
    pub pass: bool,
}

/// Estimates `E Σ (f̂_i - f_i)²` for `X = f + e/sqrt(n)` and compares it
/// with the bound plus four standard errors.
pub fn max_estimator_risk(f: &Signal, noise: &NoiseSpec, window: usize, reps: usize, seed: SeedSpec) -> Result<MaxRiskCheck> {
    if reps < 2 {
        return Err(invalid("max estimator risk needs at least 2 replicates"));
    }
    let n = f.len();
    let stats = max_statistics(noise, window)?;
    let scale = 1.0 / (n as f64).sqrt();
    let c_m = stats.mean * scale;
    let fs = f.samples();
    let sums: Vec<(f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed.child(r as u64).rng();
            let mut x = vec![0.0; n];
            noise.fill(&mut rng, &mut x);
            x.iter_mut().zip(fs).for_each(|(v, fi)| *v = fi + *v * scale);
            let est = sliding_max(&x, window);
            let loss: f64 = est.iter().zip(fs).map(|(e, fi)| (e - c_m - fi).powi(2)).sum();
            (loss, loss * loss)
        })
        .collect();
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let risk = McEstimate::from_sums(s1, s2, reps);
    if !risk.mean.is_finite() {
        return Err(Error::Numerical("max estimator risk is not finite".into()));
    }
    let m = window as f64;
    let tv: f64 = fs.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let bound = 4.0 * m * m * tv + 4.0 * stats.variance;
    Ok(MaxRiskCheck { risk, bound, var_max: stats.variance, pass: risk.mean <= bound + 4.0 * risk.se })
}
