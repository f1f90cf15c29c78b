//! Running-median prefilter for heavy-tailed noise.
//!
//! Window `2l + 1` around each interior sample; the first `l` outputs reuse
//! the first full window and the last `l` outputs reuse the last full window.

use crate::error::{invalid, Error, Result};

/// Half-width `l` of a median window of length `2l + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MedianWindow {
    pub half_width: usize,
}

impl MedianWindow {
    pub fn new(half_width: usize) -> Self {
        Self { half_width }
    }

    pub fn len(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Median filter with boundary rule; output has the input's length.
pub fn median_filter(x: &[f64], half_width: usize) -> Result<Vec<f64>> {
    let width = 2 * half_width + 1;
    if x.len() < width {
        return Err(Error::Shape(format!("signal of length {} shorter than window {width}", x.len())));
    }
    let mut out = Vec::with_capacity(x.len());
    median_filter_into(x, half_width, &mut out);
    Ok(out)
}

/// Allocation-reusing [`median_filter`]; `x.len() >= 2l + 1` is assumed.
pub(crate) fn median_filter_into(x: &[f64], half_width: usize, out: &mut Vec<f64>) {
    out.clear();
    if half_width == 0 {
        out.extend_from_slice(x);
        return;
    }
    let width = 2 * half_width + 1;
    let mut window: Vec<f64> = x[..width].to_vec();
    window.sort_unstable_by(f64::total_cmp);
    let first = window[half_width];
    out.extend(std::iter::repeat_n(first, half_width + 1));
    for i in width..x.len() {
        // slide: drop x[i - width], insert x[i]
        let old = x[i - width];
        let pos = window.partition_point(|v| v.total_cmp(&old).is_lt());
        let new = x[i];
        let ins = window.partition_point(|v| v.total_cmp(&new).is_lt());
        if ins <= pos {
            window.copy_within(ins..pos, ins + 1);
            window[ins] = new;
        } else {
            window.copy_within(pos + 1..ins, pos);
            window[ins - 1] = new;
        }
        out.push(window[half_width]);
    }
    let last = *out.last().unwrap();
    out.extend(std::iter::repeat_n(last, half_width));
}

fn binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `binom(2k-1, k) p^k`, clipped to `[0, 1]`: bound on `P(med(X_1..X_{2k-1}) >= x)`
/// when each `P(X_i >= x) <= p`.
pub fn median_tail_bound(k: usize, p_max: f64) -> Result<f64> {
    if k < 1 {
        return Err(invalid("median tail bound needs k >= 1"));
    }
    if !(0.0..=1.0).contains(&p_max) {
        return Err(invalid(format!("p_max must lie in [0, 1], got {p_max}")));
    }
    let k64 = k as u64;
    Ok((binomial(2 * k64 - 1, k64) * p_max.powi(k as i32)).min(1.0))
}

/// Smallest half-width `l` with `(l + 1) γ > L`: the median of `2l + 1`
/// variables with tails `O(x^-γ)` then has moments of order `L`.
pub fn filter_length(gamma: f64, moment_order: f64) -> Result<usize> {
    if !(gamma > 0.0) || !(moment_order > 0.0) {
        return Err(invalid("filter length needs gamma > 0 and L > 0"));
    }
    if gamma.is_infinite() {
        return Ok(0);
    }
    Ok((moment_order / gamma).floor() as usize)
}

/// Left side: squared bias `Σ (med(f+e)_i - med(e)_i - f_i)²`;
/// right side: `8 l² Σ_{i>=2} |f_i - f_{i-1}|²`.
pub fn bias_check(f: &[f64], e: &[f64], half_width: usize) -> Result<(f64, f64)> {
    if f.len() != e.len() {
        return Err(Error::Shape(format!("signal lengths {} and {} differ", f.len(), e.len())));
    }
    let x: Vec<f64> = f.iter().zip(e).map(|(a, b)| a + b).collect();
    let mx = median_filter(&x, half_width)?;
    let me = median_filter(e, half_width)?;
    let lhs = mx.iter().zip(&me).zip(f).map(|((a, b), c)| (a - b - c).powi(2)).sum();
    let l = half_width as f64;
    let rhs = 8.0 * l * l * f.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>();
    Ok((lhs, rhs))
}
