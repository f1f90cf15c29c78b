//! Monte Carlo minimax risk over adversary families, threshold calibration
//! and the Gaussian-versus-noise ratio experiment.

use crate::besov::{adversary_signals, Adversary, BesovSpec};
use crate::error::{invalid, Error, Result};
use crate::noise::{moment_condition, NoiseSpec, SeedSpec};
use crate::pipeline::{EstimatorSpec, Pipeline, Rule, RuleSpec};
use crate::prefilter::median_filter_into;
use crate::risk::functional::{gaussian_soft_risk, McEstimate};
use crate::risk::report::{RiskRow, SUP};
use crate::threshold::{soft, vertical_block_estimate};
use crate::wavelet::{forward_dwt_slice, inverse_dwt, CoeffPyramid};
use rayon::prelude::*;
use std::time::Instant;

/// Replicates per parallel work item.
const CHUNK: usize = 16;

/// Replicate count, master seed and optional wall-clock budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McControl {
    pub reps: usize,
    pub seed: SeedSpec,
    pub deadline: Option<(Instant, f64)>,
}

impl McControl {
    pub fn new(reps: usize, seed: SeedSpec) -> Self {
        Self { reps, seed, deadline: None }
    }

    /// Fails with [`Error::BudgetExceeded`] once `seconds` have passed since `start`.
    pub fn with_budget(mut self, start: Instant, seconds: f64) -> Self {
        self.deadline = Some((start, seconds));
        self
    }

    fn check_budget(&self) -> Result<()> {
        match self.deadline {
            Some((start, secs)) if start.elapsed().as_secs_f64() > secs => Err(Error::BudgetExceeded(secs)),
            _ => Ok(()),
        }
    }
}

/// Risk estimates for candidates × adversaries under common random numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskMatrix {
    pub n: usize,
    pub candidates: Vec<String>,
    pub adversaries: Vec<String>,
    pub reps: usize,
    cells: Vec<McEstimate>,
}

impl RiskMatrix {
    pub fn get(&self, candidate: usize, adversary: usize) -> McEstimate {
        self.cells[candidate * self.adversaries.len() + adversary]
    }

    /// Worst adversary of a candidate, with its estimate.
    pub fn sup(&self, candidate: usize) -> (usize, McEstimate) {
        (0..self.adversaries.len())
            .map(|a| (a, self.get(candidate, a)))
            .fold((0, McEstimate { mean: f64::NEG_INFINITY, se: 0.0 }), |b, x| if x.1.mean > b.1.mean { x } else { b })
    }

    /// Candidate with the smallest worst-case risk.
    pub fn best(&self) -> usize {
        (0..self.candidates.len())
            .min_by(|&a, &b| self.sup(a).1.mean.total_cmp(&self.sup(b).1.mean))
            .expect("at least one candidate")
    }

    /// One row per adversary plus a `sup` row.
    pub fn rows(&self, candidate: usize) -> Vec<RiskRow> {
        let row = |adversary: &str, e: McEstimate| RiskRow {
            n: self.n,
            estimator: self.candidates[candidate].clone(),
            adversary: adversary.to_string(),
            risk: e.mean,
            se: e.se,
            reps: self.reps,
        };
        let mut out: Vec<RiskRow> =
            self.adversaries.iter().enumerate().map(|(a, name)| row(name, self.get(candidate, a))).collect();
        out.push(row(SUP, self.sup(candidate).1));
        out
    }
}

/// `Σ (T(y) - θ)²` for one rule.
fn loss(theta: &CoeffPyramid, y: &CoeffPyramid, rule: &Rule) -> f64 {
    let mut total: f64 = theta.scaling().iter().zip(y.scaling()).map(|(t, v)| (v - t) * (v - t)).sum();
    match rule {
        Rule::Plan(plan) => {
            for j in theta.levels() {
                let lambda = plan.threshold(j);
                total += theta
                    .level(j)
                    .iter()
                    .zip(y.level(j))
                    .map(|(&t, &v)| {
                        let d = soft(v, lambda) - t;
                        d * d
                    })
                    .sum::<f64>();
            }
        }
        Rule::Block(cfg) => {
            let (est, _) = vertical_block_estimate(y, cfg);
            for j in theta.levels() {
                total += theta.level(j).iter().zip(est.level(j)).map(|(t, v)| (v - t) * (v - t)).sum::<f64>();
            }
        }
    }
    total
}

fn distinct<T: PartialEq + Copy>(it: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for x in it {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

/// Monte Carlo risk `E ‖θ̂ - θ‖²` for every (pipeline, adversary) pair under
/// `X = f + e/sqrt(n)`. Adversaries are coefficients in the pipelines'
/// (shared) wavelet basis; losses are measured in each pipeline's own
/// coordinates, which Parseval makes equal to the signal-domain loss.
pub fn risk_matrix(
    pipelines: &[(String, Pipeline)],
    adversaries: &[Adversary],
    noise: &NoiseSpec,
    n: usize,
    ctl: &McControl,
) -> Result<RiskMatrix> {
    if pipelines.is_empty() || adversaries.is_empty() {
        return Err(invalid("risk matrix needs at least one pipeline and one adversary"));
    }
    if ctl.reps < 2 {
        return Err(invalid(format!("need at least 2 replicates, got {}", ctl.reps)));
    }
    let wavelet = &pipelines[0].1.wavelet;
    if pipelines.iter().any(|(_, p)| &p.wavelet != wavelet) {
        return Err(invalid("pipelines in one risk matrix must share a wavelet"));
    }
    for (label, p) in pipelines {
        let l = p.prefilter.unwrap_or(0);
        if !(noise.tail_order() * (l as f64 + 1.0) > 2.0) {
            return Err(Error::InfiniteVariance(format!(
                "{noise} with {label}: filtered noise has no finite variance; use a longer median prefilter"
            )));
        }
    }
    let signals: Vec<Vec<f64>> = adversaries
        .iter()
        .map(|a| {
            if a.pyramid.len() != n {
                return Err(Error::Shape(format!("adversary {} has length {} != {n}", a.name, a.pyramid.len())));
            }
            Ok(inverse_dwt(&a.pyramid, wavelet)?.into_samples())
        })
        .collect::<Result<_>>()?;
    let levels = distinct(pipelines.iter().map(|(_, p)| p.j0));
    // theta[level index][adversary]
    let theta: Vec<Vec<CoeffPyramid>> = levels
        .iter()
        .map(|&j0| signals.iter().map(|f| forward_dwt_slice(f, wavelet, j0)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let level_of = |p: &Pipeline| levels.iter().position(|&j| j == p.j0).expect("collected above");
    let filters = distinct(pipelines.iter().map(|(_, p)| p.prefilter));
    let n_adv = adversaries.len();
    let cells = pipelines.len() * n_adv;
    let scale = 1.0 / (n as f64).sqrt();

    let chunks = ctl.reps.div_ceil(CHUNK);
    let parts: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            ctl.check_budget()?;
            let mut s1 = vec![0.0; cells];
            let mut s2 = vec![0.0; cells];
            let mut e = vec![0.0; n];
            let mut x = vec![0.0; n];
            let mut filtered = Vec::with_capacity(n);
            for r in c * CHUNK..((c + 1) * CHUNK).min(ctl.reps) {
                let mut rng = ctl.seed.child(r as u64).rng();
                noise.fill(&mut rng, &mut e);
                e.iter_mut().for_each(|v| *v *= scale);
                for &filter in &filters {
                    let members: Vec<usize> =
                        (0..pipelines.len()).filter(|&i| pipelines[i].1.prefilter == filter).collect();
                    let used_levels = distinct(members.iter().map(|&i| level_of(&pipelines[i].1)));
                    match filter {
                        None => {
                            for &li in &used_levels {
                                let z = forward_dwt_slice(&e, wavelet, levels[li])?;
                                for (a, th) in theta[li].iter().enumerate() {
                                    let mut y = th.clone();
                                    y.iter_mut().zip(z.iter()).for_each(|(v, zz)| *v += zz);
                                    for &i in members.iter().filter(|&&i| level_of(&pipelines[i].1) == li) {
                                        let l = loss(th, &y, &pipelines[i].1.rule);
                                        s1[i * n_adv + a] += l;
                                        s2[i * n_adv + a] += l * l;
                                    }
                                }
                            }
                        }
                        Some(half) => {
                            for (a, f) in signals.iter().enumerate() {
                                x.iter_mut().zip(f.iter().zip(&e)).for_each(|(v, (fi, ei))| *v = fi + ei);
                                median_filter_into(&x, half, &mut filtered);
                                for &li in &used_levels {
                                    let y = forward_dwt_slice(&filtered, wavelet, levels[li])?;
                                    let th = &theta[li][a];
                                    for &i in members.iter().filter(|&&i| level_of(&pipelines[i].1) == li) {
                                        let l = loss(th, &y, &pipelines[i].1.rule);
                                        s1[i * n_adv + a] += l;
                                        s2[i * n_adv + a] += l * l;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Ok((s1, s2))
        })
        .collect();
    let mut s1 = vec![0.0; cells];
    let mut s2 = vec![0.0; cells];
    for part in parts {
        let (a, b) = part?;
        s1.iter_mut().zip(&a).for_each(|(x, y)| *x += y);
        s2.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
    }
    let cells: Vec<McEstimate> = s1.iter().zip(&s2).map(|(&a, &b)| McEstimate::from_sums(a, b, ctl.reps)).collect();
    if cells.iter().any(|c| !c.mean.is_finite()) {
        return Err(Error::Numerical("Monte Carlo risk is not finite".into()));
    }
    Ok(RiskMatrix {
        n,
        candidates: pipelines.iter().map(|(l, _)| l.clone()).collect(),
        adversaries: adversaries.iter().map(|a| a.name.clone()).collect(),
        reps: ctl.reps,
        cells,
    })
}

/// Worst-case risk of one estimator over the adversary family.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxResult {
    pub matrix: RiskMatrix,
}

impl MinimaxResult {
    pub fn sup(&self) -> McEstimate {
        self.matrix.sup(0).1
    }

    pub fn worst_adversary(&self) -> &str {
        &self.matrix.adversaries[self.matrix.sup(0).0]
    }

    pub fn rows(&self) -> Vec<RiskRow> {
        self.matrix.rows(0)
    }
}

/// Monte Carlo `sup_θ E ‖θ̂ - θ‖²` over [`adversary_signals`] built with
/// threshold constant `adversary_c`.
pub fn minimax_risk(
    estimator: &EstimatorSpec,
    spec: &BesovSpec,
    n: usize,
    noise: &NoiseSpec,
    ctl: &McControl,
    adversary_c: f64,
) -> Result<MinimaxResult> {
    let advs = adversary_signals(spec, n, adversary_c)?;
    let pipeline = estimator.build(n, spec.m)?;
    let matrix = risk_matrix(&[(estimator.label(), pipeline)], &advs, noise, n, ctl)?;
    Ok(MinimaxResult { matrix })
}

/// Candidate rules: level thresholds for every `C` in `grid`, plus the universal threshold.
pub fn candidate_rules(grid: &[f64]) -> Vec<RuleSpec> {
    let mut rules: Vec<RuleSpec> = grid.iter().map(|&c| RuleSpec::Level { c }).collect();
    rules.push(RuleSpec::Universal);
    rules
}

/// Picks the rule among [`candidate_rules`] with the smallest Monte Carlo
/// worst-case risk at `n`.
pub fn calibrate(
    template: &EstimatorSpec,
    spec: &BesovSpec,
    n: usize,
    noise: &NoiseSpec,
    ctl: &McControl,
    grid: &[f64],
    adversary_c: f64,
) -> Result<(RuleSpec, RiskMatrix)> {
    let rules = candidate_rules(grid);
    let advs = adversary_signals(spec, n, adversary_c)?;
    let pipelines: Vec<(String, Pipeline)> = rules
        .iter()
        .map(|r| {
            let e = template.with_rule(*r);
            Ok((e.label(), e.build(n, spec.m)?))
        })
        .collect::<Result<_>>()?;
    let matrix = risk_matrix(&pipelines, &advs, noise, n, ctl)?;
    Ok((rules[matrix.best()], matrix))
}

/// Exact worst-case risk under standard Gaussian noise for a plan-based
/// pipeline without prefilter: `max_a Σ (σ²/n) p(λ sqrt(n)/σ, θ sqrt(n)/σ)` with `σ = 1`.
pub fn gaussian_exact_minimax(pipeline: &Pipeline, adversaries: &[Adversary], n: usize) -> Result<(usize, f64)> {
    let Rule::Plan(plan) = &pipeline.rule else {
        return Err(invalid("exact Gaussian risk needs a soft-threshold plan"));
    };
    if pipeline.prefilter.is_some() {
        return Err(invalid("exact Gaussian risk does not cover prefiltered pipelines"));
    }
    let root = (n as f64).sqrt();
    let mut best = (0, f64::NEG_INFINITY);
    for (a, adv) in adversaries.iter().enumerate() {
        let f = inverse_dwt(&adv.pyramid, &pipeline.wavelet)?;
        let theta = forward_dwt_slice(f.samples(), &pipeline.wavelet, pipeline.j0)?;
        let mut total = theta.scaling().len() as f64;
        for j in theta.levels() {
            let lambda = plan.threshold(j) * root;
            let at_zero = gaussian_soft_risk(lambda, 0.0);
            total += theta
                .level(j)
                .iter()
                .map(|&t| if t == 0.0 { at_zero } else { gaussian_soft_risk(lambda, t * root) })
                .sum::<f64>();
        }
        let risk = total / n as f64;
        if risk > best.1 {
            best = (a, risk);
        }
    }
    Ok(best)
}

/// Outcome of the Gaussian-versus-noise comparison of best worst-case risks.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioResult {
    /// Exact Gaussian `min over rules of max over adversaries`.
    pub numerator: f64,
    /// Monte Carlo counterpart under the given noise.
    pub denominator: McEstimate,
    pub ratio: f64,
    pub gaussian_rule: RuleSpec,
    pub noise_rule: RuleSpec,
}

/// Ratio of the best Gaussian worst-case soft-threshold risk to the best
/// worst-case risk under `noise`, both over [`candidate_rules`].
#[allow(clippy::too_many_arguments)]
pub fn gaussian_ratio_experiment(
    noise: &NoiseSpec,
    spec: &BesovSpec,
    n: usize,
    template: &EstimatorSpec,
    ctl: &McControl,
    grid: &[f64],
    adversary_c: f64,
) -> Result<RatioResult> {
    let needed = moment_condition(spec.m, spec.p)?;
    if !(noise.moment_order() > needed) {
        return Err(Error::Hypothesis(format!(
            "{noise} has moments below order {}, needs more than {needed}",
            noise.moment_order()
        )));
    }
    if !noise.is_symmetric() {
        return Err(Error::Hypothesis(format!("{noise} is not symmetric")));
    }
    let template = EstimatorSpec { prefilter: None, sigma: 1.0, ..*template };
    let rules = candidate_rules(grid);
    let advs = adversary_signals(spec, n, adversary_c)?;
    let pipelines: Vec<(String, Pipeline)> = rules
        .iter()
        .map(|r| {
            let e = template.with_rule(*r);
            Ok((e.label(), e.build(n, spec.m)?))
        })
        .collect::<Result<_>>()?;
    let mut numerator = (0, f64::INFINITY);
    for (i, (_, p)) in pipelines.iter().enumerate() {
        let (_, r) = gaussian_exact_minimax(p, &advs, n)?;
        if r < numerator.1 {
            numerator = (i, r);
        }
    }
    let matrix = risk_matrix(&pipelines, &advs, noise, n, ctl)?;
    let best = matrix.best();
    let denominator = matrix.sup(best).1;
    Ok(RatioResult {
        numerator: numerator.1,
        denominator,
        ratio: numerator.1 / denominator.mean,
        gaussian_rule: rules[numerator.0],
        noise_rule: rules[best],
    })
}
