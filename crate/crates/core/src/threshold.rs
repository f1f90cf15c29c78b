//! Thresholding operators and threshold selection.

use crate::error::{invalid, Error, Result};
use crate::normal;
use crate::wavelet::{CoeffPyramid, Signal};

/// `(|x| - λ)_+ sgn(x)`.
pub fn soft_threshold(x: f64, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(invalid(format!("threshold must be >= 0, got {lambda}")));
    }
    Ok(soft(x, lambda))
}

/// Unchecked soft threshold; `lambda` may be `+inf`.
#[inline]
pub(crate) fn soft(x: f64, lambda: f64) -> f64 {
    let m = x.abs() - lambda;
    if m > 0.0 {
        m.copysign(x)
    } else {
        0.0
    }
}

/// Level-constant soft-threshold plan for detail levels `j0..j0+len`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdPlan {
    j0: usize,
    thresholds: Vec<f64>,
    discard_above: Option<usize>,
}

impl ThresholdPlan {
    pub fn new(j0: usize, thresholds: Vec<f64>, discard_above: Option<usize>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(invalid("threshold plan needs at least one level"));
        }
        if let Some(t) = thresholds.iter().find(|t| !(**t >= 0.0)) {
            return Err(invalid(format!("thresholds must be >= 0, got {t}")));
        }
        if let Some(l) = discard_above {
            let max = j0 + thresholds.len() - 1;
            if l < j0 || l > max {
                return Err(Error::LevelOutOfRange { level: l, min: j0, max });
            }
        }
        Ok(Self { j0, thresholds, discard_above })
    }

    /// The same threshold on every detail level of a depth-`h` pyramid.
    pub fn uniform(j0: usize, h: usize, lambda: f64) -> Result<Self> {
        if j0 >= h {
            return Err(Error::LevelOutOfRange { level: j0, min: 0, max: h.saturating_sub(1) });
        }
        Self::new(j0, vec![lambda; h - j0], None)
    }

    pub fn j0(&self) -> usize {
        self.j0
    }

    pub fn depth(&self) -> usize {
        self.j0 + self.thresholds.len()
    }

    pub fn discard_above(&self) -> Option<usize> {
        self.discard_above
    }

    /// Effective threshold at level `j`, `+inf` for discarded levels.
    pub fn threshold(&self, j: usize) -> f64 {
        match self.discard_above {
            Some(l) if j > l => f64::INFINITY,
            _ => self.thresholds[j - self.j0],
        }
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    fn check(&self, p: &CoeffPyramid) -> Result<()> {
        if p.j0() != self.j0 || p.depth() != self.depth() {
            return Err(Error::Shape(format!(
                "plan covers levels {}..{} but pyramid has {}..{}",
                self.j0,
                self.depth(),
                p.j0(),
                p.depth()
            )));
        }
        Ok(())
    }
}

/// Soft-thresholds each detail level with its plan threshold; scaling
/// coefficients pass through.
pub fn apply_plan(pyramid: &CoeffPyramid, plan: &ThresholdPlan) -> Result<CoeffPyramid> {
    plan.check(pyramid)?;
    let mut out = pyramid.clone();
    for j in out.levels() {
        let lambda = plan.threshold(j);
        out.level_mut(j).iter_mut().for_each(|x| *x = soft(*x, lambda));
    }
    Ok(out)
}

/// `4Q(t) + 2tφ(t)`, the closed form of `E 1{|Z|>t}(1 + Z²)`.
pub fn tail_weight(t: f64) -> f64 {
    4.0 * normal::upper_tail(t) + 2.0 * t * normal::pdf(t)
}

/// Universal threshold `λ_n` in unit-variance coefficient units: `t + 1`
/// where `t` solves `E 1{|Z| > t}(1 + Z²) = 1/n`. Callers rescale by `σ/√n`.
pub fn universal_threshold(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(invalid(format!("universal threshold needs n >= 2, got {n}")));
    }
    let target = 1.0 / n as f64;
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if tail_weight(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi) + 1.0)
}

/// `λ_j = C σ sqrt((j - j0)_+) / sqrt(n)` for each level `j0 <= j < log2 n`.
pub fn level_thresholds(n: usize, j0: usize, c: f64, sigma: f64) -> Result<ThresholdPlan> {
    if !(c > 0.0) || !(sigma > 0.0) {
        return Err(invalid("level thresholds need C > 0 and sigma > 0"));
    }
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::NotDyadic(n));
    }
    let h = n.trailing_zeros() as usize;
    if j0 >= h {
        return Err(Error::LevelOutOfRange { level: j0, min: 0, max: h - 1 });
    }
    let scale = c * sigma / (n as f64).sqrt();
    let thresholds = (j0..h).map(|j| scale * ((j - j0) as f64).sqrt()).collect();
    ThresholdPlan::new(j0, thresholds, None)
}

/// `(jp, kp)` is above `(j, k)`: `jp <= j` and the level-`jp` ancestor of `k`
/// lies within `width` positions of `kp`.
///
/// Indices are 0-based, so the ancestor of `k` at level `jp` is
/// `k >> (j - jp)`; this is the 1-based `⌈2^{jp-j} k⌉` relation shifted by one.
pub fn above(jp: usize, kp: usize, j: usize, k: usize, width: usize) -> bool {
    jp <= j && (k >> (j - jp)).abs_diff(kp) <= width
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockConfig {
    /// Horizontal reach `J` of the above relation.
    pub width: usize,
    /// Keep-or-kill threshold `λ_n`, in the pyramid's units.
    pub lambda: f64,
    /// Optional variant: also keep same-level neighbours within this distance
    /// of a large coefficient, together with everything above them.
    pub neighbors: Option<usize>,
}

impl BlockConfig {
    pub fn new(width: usize, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(invalid(format!("block threshold must be >= 0, got {lambda}")));
        }
        Ok(Self { width, lambda, neighbors: None })
    }
}

/// Keep flags with the shape of a pyramid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetentionMask {
    j0: usize,
    scaling: Vec<bool>,
    details: Vec<Vec<bool>>,
}

impl RetentionMask {
    fn empty_like(p: &CoeffPyramid) -> Self {
        Self {
            j0: p.j0(),
            scaling: vec![true; p.scaling().len()],
            details: p.levels().map(|j| vec![false; 1 << j]).collect(),
        }
    }

    pub fn j0(&self) -> usize {
        self.j0
    }

    pub fn levels(&self) -> std::ops::Range<usize> {
        self.j0..self.j0 + self.details.len()
    }

    pub fn scaling(&self) -> &[bool] {
        &self.scaling
    }

    pub fn level(&self, j: usize) -> &[bool] {
        &self.details[j - self.j0]
    }

    pub fn is_kept(&self, j: usize, k: usize) -> bool {
        self.details[j - self.j0][k]
    }

    /// Number of kept detail coefficients.
    pub fn kept_details(&self) -> usize {
        self.details.iter().flatten().filter(|b| **b).count()
    }
}

/// Vertical block thresholding: a detail coefficient is copied iff its
/// magnitude is at least `λ` or it is above a coefficient that is; all other
/// details become zero. Ties count as kept.
pub fn vertical_block_estimate(noisy: &CoeffPyramid, cfg: &BlockConfig) -> (CoeffPyramid, RetentionMask) {
    let mut mask = RetentionMask::empty_like(noisy);
    let j0 = noisy.j0();
    let reach = cfg.neighbors.unwrap_or(0);
    for jl in noisy.levels() {
        let size = 1usize << jl;
        for (kl, y) in noisy.level(jl).iter().enumerate() {
            if y.abs() < cfg.lambda {
                continue;
            }
            for kn in kl.saturating_sub(reach)..=(kl + reach).min(size - 1) {
                for j in (j0..=jl).rev() {
                    let anc = kn >> (jl - j);
                    let hi = (anc + cfg.width).min((1 << j) - 1);
                    let row = &mut mask.details[j - j0];
                    for flag in &mut row[anc.saturating_sub(cfg.width)..=hi] {
                        *flag = true;
                    }
                }
            }
        }
    }
    let mut out = noisy.clone();
    for j in out.levels() {
        let keep = mask.level(j).to_vec();
        for (x, k) in out.level_mut(j).iter_mut().zip(keep) {
            if !k {
                *x = 0.0;
            }
        }
    }
    (out, mask)
}

/// Haar linear estimate that keeps levels up to `j0`: each output sample is
/// the mean of its dyadic block of width `2^{h - j0 - 1}`.
pub fn haar_block_mean(signal: &Signal, j0: usize) -> Result<Signal> {
    let h = signal.depth();
    if j0 >= h {
        return Err(Error::LevelOutOfRange { level: j0, min: 0, max: h - 1 });
    }
    let width = 1usize << (h - j0 - 1);
    let mut out = Vec::with_capacity(signal.len());
    for block in signal.samples().chunks(width) {
        let mean = block.iter().sum::<f64>() / width as f64;
        out.extend(std::iter::repeat_n(mean, width));
    }
    Signal::new(out)
}
