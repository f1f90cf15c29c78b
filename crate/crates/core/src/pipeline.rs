//! Estimator pipelines: optional median prefilter, forward transform,
//! thresholding rule, inverse transform.

use crate::error::{invalid, Error, Result};
use crate::prefilter::median_filter;
use crate::threshold::{
    apply_plan, level_thresholds, universal_threshold, vertical_block_estimate, BlockConfig, RetentionMask,
    ThresholdPlan,
};
use crate::wavelet::{forward_dwt_slice, inverse_dwt, CoeffPyramid, Signal, WaveletKind, WaveletSpec};
use std::fmt;

/// Coarse level of the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoarseLevel {
    /// `floor(log2(n) / (2m + 1))`.
    Auto,
    Fixed(usize),
}

impl CoarseLevel {
    pub fn resolve(&self, h: usize, m: f64) -> usize {
        let j0 = match *self {
            CoarseLevel::Auto => (h as f64 / (2.0 * m + 1.0)).floor() as usize,
            CoarseLevel::Fixed(j) => j,
        };
        j0.min(h.saturating_sub(1))
    }
}

/// Threshold rule, stated independently of `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleSpec {
    /// Keep every coefficient.
    Identity,
    /// Keep only the scaling coefficients.
    KillAll,
    /// Uniform threshold in model units.
    Fixed(f64),
    /// `C σ sqrt(j - j0) / sqrt(n)` per level.
    Level { c: f64 },
    /// `σ λ_n / sqrt(n)` on every level.
    Universal,
    /// Keep-or-kill with threshold `c σ λ_n / sqrt(n)`.
    VerticalBlock { width: usize, c: f64, neighbors: Option<usize> },
}

impl fmt::Display for RuleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleSpec::Identity => write!(f, "identity"),
            RuleSpec::KillAll => write!(f, "kill_all"),
            RuleSpec::Fixed(l) => write!(f, "fixed({l})"),
            RuleSpec::Level { c } => write!(f, "level(C={c})"),
            RuleSpec::Universal => write!(f, "universal"),
            RuleSpec::VerticalBlock { width, c, neighbors } => match neighbors {
                Some(r) => write!(f, "vblock(J={width};C={c};r={r})"),
                None => write!(f, "vblock(J={width};C={c})"),
            },
        }
    }
}

/// A fully specified estimator, still independent of `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSpec {
    pub wavelet: WaveletKind,
    /// Median half-width `l`; `None` disables the prefilter.
    pub prefilter: Option<usize>,
    pub j0: CoarseLevel,
    pub rule: RuleSpec,
    /// Noise scale `σ` in units of `e`, so coefficient noise has sd `σ/sqrt(n)`.
    pub sigma: f64,
}

impl EstimatorSpec {
    pub fn new(wavelet: WaveletKind, rule: RuleSpec) -> Self {
        Self { wavelet, prefilter: None, j0: CoarseLevel::Auto, rule, sigma: 1.0 }
    }

    pub fn with_rule(&self, rule: RuleSpec) -> Self {
        Self { rule, ..*self }
    }

    /// Identifier used in reports.
    pub fn label(&self) -> String {
        let w = match self.wavelet {
            WaveletKind::Haar => "haar",
            WaveletKind::Daubechies4 => "d4",
        };
        let mut s = w.to_string();
        if let Some(l) = self.prefilter {
            s.push_str(&format!("-med{}", 2 * l + 1));
        }
        s.push('-');
        s.push_str(&self.rule.to_string());
        s
    }

    /// Concrete pipeline for `n` samples; `m` resolves [`CoarseLevel::Auto`].
    pub fn build(&self, n: usize, m: f64) -> Result<Pipeline> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::NotDyadic(n));
        }
        if !(self.sigma > 0.0) {
            return Err(invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        let h = n.trailing_zeros() as usize;
        if let CoarseLevel::Fixed(j) = self.j0 {
            if j >= h {
                return Err(Error::LevelOutOfRange { level: j, min: 0, max: h - 1 });
            }
        }
        let j0 = self.j0.resolve(h, m);
        let unit = self.sigma / (n as f64).sqrt();
        let rule = match self.rule {
            RuleSpec::Identity => Rule::Plan(ThresholdPlan::uniform(j0, h, 0.0)?),
            RuleSpec::KillAll => Rule::Plan(ThresholdPlan::uniform(j0, h, f64::INFINITY)?),
            RuleSpec::Fixed(l) => Rule::Plan(ThresholdPlan::uniform(j0, h, l)?),
            RuleSpec::Level { c } => Rule::Plan(level_thresholds(n, j0, c, self.sigma)?),
            RuleSpec::Universal => Rule::Plan(ThresholdPlan::uniform(j0, h, unit * universal_threshold(n)?)?),
            RuleSpec::VerticalBlock { width, c, neighbors } => {
                if !(c >= 0.0) {
                    return Err(invalid(format!("block constant must be >= 0, got {c}")));
                }
                let mut cfg = BlockConfig::new(width, c * unit * universal_threshold(n)?)?;
                cfg.neighbors = neighbors;
                Rule::Block(cfg)
            }
        };
        if let Some(l) = self.prefilter {
            if 2 * l + 1 > n {
                return Err(Error::Shape(format!("median window {} longer than signal {n}", 2 * l + 1)));
            }
        }
        Ok(Pipeline { wavelet: WaveletSpec::from_kind(self.wavelet), prefilter: self.prefilter, j0, rule })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rule {
    Plan(ThresholdPlan),
    Block(BlockConfig),
}

/// An estimator bound to a sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub wavelet: WaveletSpec,
    pub prefilter: Option<usize>,
    pub j0: usize,
    pub rule: Rule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Denoised {
    pub signal: Signal,
    /// Thresholded coefficients.
    pub coefficients: CoeffPyramid,
    /// Present for vertical block thresholding.
    pub mask: Option<RetentionMask>,
}

impl Pipeline {
    /// Applies the rule to coefficients.
    pub fn shrink(&self, noisy: &CoeffPyramid) -> Result<(CoeffPyramid, Option<RetentionMask>)> {
        match &self.rule {
            Rule::Plan(plan) => Ok((apply_plan(noisy, plan)?, None)),
            Rule::Block(cfg) => {
                let (est, mask) = vertical_block_estimate(noisy, cfg);
                Ok((est, Some(mask)))
            }
        }
    }

    pub fn denoise(&self, x: &[f64]) -> Result<Denoised> {
        let filtered;
        let input = match self.prefilter {
            Some(l) => {
                filtered = median_filter(x, l)?;
                &filtered[..]
            }
            None => x,
        };
        let noisy = forward_dwt_slice(input, &self.wavelet, self.j0)?;
        let (coefficients, mask) = self.shrink(&noisy)?;
        let signal = inverse_dwt(&coefficients, &self.wavelet)?;
        Ok(Denoised { signal, coefficients, mask })
    }
}
