//! Experiment configuration (TOML) and the runners behind the CLI.
//!
//! ```toml
//! seed = 7
//! reps = 2000
//! n = [256, 512, 1024, 2048, 4096, 8192]
//! out = "rate.csv"
//! noise = "gaussian"          # bernoulli_sym, uniform_sym, cauchy, student_t(3)
//! adversary_c = 1.0
//!
//! [besov]
//! m = 1.0
//! p = 2
//! q = 2
//! A = 1.0
//!
//! [estimator]
//! wavelet = "d4"              # or "haar"
//! prefilter = "auto"          # "none", "auto" or a half-width l
//! rule = "level"              # universal, vertical_block, fixed, identity, kill_all
//! C = "calibrate"             # or a number
//! calibrate_at = 256
//! j0 = "auto"                 # or a level
//! ```

use crate::besov::BesovSpec;
use crate::error::{Error, Result};
use crate::noise::{moment_condition, NoiseSpec, SeedSpec};
use crate::pipeline::{CoarseLevel, EstimatorSpec, RuleSpec};
use crate::prefilter::filter_length;
use crate::risk::bounds::{
    deviation_ratio_probe, fourth_moment_sandwich, tail_bound_check, TailBoundParams,
};
use crate::risk::minimax::{calibrate, minimax_risk, McControl};
use crate::risk::report::RiskReport;
use crate::wavelet::WaveletKind;
use serde::Deserialize;
use std::path::PathBuf;
use std::time::Instant;

/// A number or a keyword such as `"auto"`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Setting {
    Number(f64),
    Word(String),
}

impl Setting {
    fn word(s: &str) -> Self {
        Setting::Word(s.to_string())
    }

    fn is(&self, w: &str) -> bool {
        matches!(self, Setting::Word(x) if x.eq_ignore_ascii_case(w))
    }

    fn as_count(&self, key: &str) -> Result<usize> {
        match self {
            Setting::Number(x) if *x >= 0.0 && x.fract() == 0.0 => Ok(*x as usize),
            other => Err(Error::Config(format!("`{key}` must be a non-negative integer, got {other:?}"))),
        }
    }
}

fn default_seed() -> u64 {
    1
}
fn default_reps() -> usize {
    2000
}
fn default_noise() -> String {
    "gaussian".into()
}
fn one() -> f64 {
    1.0
}
fn default_ball() -> BesovSpec {
    BesovSpec { m: 1.0, p: 2.0, q: 2.0, radius: 1.0, j0: 0 }
}
fn default_wavelet() -> String {
    "d4".into()
}
fn default_rule() -> String {
    "level".into()
}
fn auto() -> Setting {
    Setting::word("auto")
}
fn calibrate_word() -> Setting {
    Setting::word("calibrate")
}
fn default_calibrate_at() -> usize {
    256
}
fn default_block_width() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default = "default_wavelet")]
    pub wavelet: String,
    #[serde(default = "auto")]
    pub prefilter: Setting,
    #[serde(default = "default_rule")]
    pub rule: String,
    /// Threshold constant or `"calibrate"`; absent means calibrate for the
    /// level rule and 1 otherwise.
    #[serde(rename = "C")]
    pub c: Option<Setting>,
    #[serde(default = "default_calibrate_at")]
    pub calibrate_at: usize,
    pub calibrate_grid: Option<Vec<f64>>,
    #[serde(default = "auto")]
    pub j0: Setting,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "default_block_width")]
    pub block_width: usize,
    pub block_neighbors: Option<usize>,
    pub lambda: Option<f64>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        toml::from_str("").expect("all estimator keys have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub n: Vec<usize>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub max_seconds: Option<f64>,
    #[serde(default = "default_noise")]
    pub noise: String,
    #[serde(default = "one")]
    pub noise_scale: f64,
    #[serde(default = "one")]
    pub adversary_c: f64,
    #[serde(default = "default_ball")]
    pub besov: BesovSpec,
    #[serde(default)]
    pub estimator: EstimatorConfig,
}

/// Default threshold-constant grid for calibration: `0.125, 0.25, ..., 5`.
pub fn default_grid() -> Vec<f64> {
    (1..=40).map(|i| i as f64 * 0.125).collect()
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub noise: NoiseSpec,
    pub besov: BesovSpec,
    /// The rule is a placeholder while `calibrate` is set.
    pub estimator: EstimatorSpec,
    /// Calibration size and grid, when `C = "calibrate"`.
    pub calibrate: Option<(usize, Vec<f64>)>,
    pub warnings: Vec<String>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    /// Validates everything except the sample-size list.
    pub fn plan(&self) -> Result<Plan> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        if let Some(s) = self.max_seconds {
            if !(s > 0.0) {
                return Err(Error::Config(format!("max_seconds must be positive, got {s}")));
            }
        }
        if !(self.adversary_c > 0.0) {
            return Err(Error::Config("adversary_c must be positive".into()));
        }
        self.besov.validate().map_err(config_err)?;
        let noise: NoiseSpec = self.noise.parse::<NoiseSpec>()?;
        let noise = noise.with_scale(noise.scale * self.noise_scale).map_err(config_err)?;
        let e = &self.estimator;
        let wavelet: WaveletKind = e.wavelet.parse()?;
        let mut warnings = Vec::new();
        if wavelet == WaveletKind::Haar && self.besov.m >= 1.0 {
            warnings.push(format!(
                "haar wavelets only characterise smoothness below 1; m = {} may not be represented",
                self.besov.m
            ));
        }
        let prefilter = if e.prefilter.is("none") {
            None
        } else if e.prefilter.is("auto") {
            let l = match noise.tail_order() {
                g if g.is_infinite() => 0,
                g => {
                    let needed = moment_condition(self.besov.m, self.besov.p).map_err(config_err)?;
                    filter_length(g, needed).map_err(config_err)?
                }
            };
            (l > 0).then_some(l)
        } else {
            Some(e.prefilter.as_count("prefilter")?).filter(|&l| l > 0)
        };
        let j0 = if e.j0.is("auto") { CoarseLevel::Auto } else { CoarseLevel::Fixed(e.j0.as_count("j0")?) };
        if !(e.sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {}", e.sigma)));
        }
        let is_level = e.rule.eq_ignore_ascii_case("level");
        let c_setting = e.c.clone().unwrap_or_else(|| if is_level { calibrate_word() } else { Setting::Number(1.0) });
        let calibrating = c_setting.is("calibrate");
        let c = match &c_setting {
            Setting::Number(c) if *c > 0.0 => Some(*c),
            _ if calibrating => None,
            other => return Err(Error::Config(format!("`C` must be a positive number or \"calibrate\", got {other:?}"))),
        };
        let rule = match e.rule.to_ascii_lowercase().as_str() {
            "level" => RuleSpec::Level { c: c.unwrap_or(1.0) },
            "universal" => RuleSpec::Universal,
            "identity" | "none" => RuleSpec::Identity,
            "kill_all" => RuleSpec::KillAll,
            "fixed" => RuleSpec::Fixed(
                e.lambda.filter(|l| *l >= 0.0).ok_or_else(|| Error::Config("rule `fixed` needs lambda >= 0".into()))?,
            ),
            "vertical_block" => {
                RuleSpec::VerticalBlock { width: e.block_width, c: c.unwrap_or(1.0), neighbors: e.block_neighbors }
            }
            other => return Err(Error::Config(format!("unknown rule `{other}`"))),
        };
        let calibrate = if calibrating {
            if !matches!(rule, RuleSpec::Level { .. }) {
                return Err(Error::Config("C = \"calibrate\" is only available with rule = \"level\"".into()));
            }
            if !e.calibrate_at.is_power_of_two() || e.calibrate_at < 4 {
                return Err(Error::Config(format!("calibrate_at must be a power of two >= 4, got {}", e.calibrate_at)));
            }
            let grid = e.calibrate_grid.clone().unwrap_or_else(default_grid);
            if grid.is_empty() || grid.iter().any(|c| !(*c > 0.0)) {
                return Err(Error::Config("calibrate_grid must hold positive constants".into()));
            }
            Some((e.calibrate_at, grid))
        } else {
            None
        };
        let estimator = EstimatorSpec { wavelet, prefilter, j0, rule, sigma: e.sigma };
        Ok(Plan { noise, besov: self.besov, estimator, calibrate, warnings })
    }

    /// Full validation for `experiment`: also checks the sample sizes.
    pub fn experiment_plan(&self) -> Result<Plan> {
        let plan = self.plan()?;
        if self.n.is_empty() {
            return Err(Error::Config("`n` must list at least one sample size".into()));
        }
        for &n in &self.n {
            if n < 4 || !n.is_power_of_two() {
                return Err(Error::Config(format!("sample size {n} is not a power of two >= 4")));
            }
            plan.estimator.build(n, plan.besov.m).map_err(config_err)?;
        }
        Ok(plan)
    }
}

/// Runs calibration (if requested) and the minimax experiment for every `n`.
/// Progress lines go to `progress`; the returned report carries rate fits.
pub fn run_experiment(cfg: &ExperimentConfig, progress: &mut dyn FnMut(&str)) -> Result<RiskReport> {
    let plan = cfg.experiment_plan()?;
    for w in &plan.warnings {
        progress(&format!("warning: {w}"));
    }
    let start = Instant::now();
    let control = |stream: u64| {
        let ctl = McControl::new(cfg.reps, SeedSpec::new(cfg.seed, stream));
        match cfg.max_seconds {
            Some(s) => ctl.with_budget(start, s),
            None => ctl,
        }
    };
    let mut estimator = plan.estimator;
    if let Some((n_cal, grid)) = &plan.calibrate {
        let (rule, matrix) =
            calibrate(&estimator, &plan.besov, *n_cal, &plan.noise, &control(0), grid, cfg.adversary_c)?;
        progress(&format!(
            "calibrated at n = {n_cal}: {rule} (worst-case risk {:.6e})",
            matrix.sup(matrix.best()).1.mean
        ));
        estimator = estimator.with_rule(rule);
    }
    let mut report = RiskReport::default();
    for &n in &cfg.n {
        let res = minimax_risk(&estimator, &plan.besov, n, &plan.noise, &control(n as u64), cfg.adversary_c)?;
        progress(&format!(
            "n = {n}: worst-case risk {:.6e} (se {:.2e}, {})",
            res.sup().mean,
            res.sup().se,
            res.worst_adversary()
        ));
        report.rows.extend(res.rows());
    }
    report.fit_all(Some(plan.besov.m));
    Ok(report)
}

/// One line of the bound-verification suite.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundOutcome {
    pub name: String,
    pub empirical: f64,
    pub se: f64,
    /// Bound, or lower end of an interval.
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

impl BoundOutcome {
    pub const CSV_HEADER: &'static str = "check,empirical,se,lower,upper,pass";

    pub fn csv_line(&self) -> String {
        format!("{},{},{},{},{},{}", self.name, self.empirical, self.se, self.lower, self.upper, self.pass)
    }
}

/// Probe points of the moderate-deviation check; `2` lies outside the
/// admissible window for 256 uniform summands, so the largest point is `1.75`.
pub const PROBE_POINTS: [f64; 4] = [-1.5, 0.0, 1.0, 1.75];

/// Exponential tail bounds, the fourth-moment sandwich for three bases and
/// a moderate-deviation probe, each at `reps` replicates.
pub fn verify_bounds(reps: usize, seed: u64) -> Result<Vec<BoundOutcome>> {
    if reps < 2 {
        return Err(Error::Config("reps must be at least 2".into()));
    }
    let bern = NoiseSpec::bernoulli_sym();
    let unif = NoiseSpec::uniform_sym();
    let weights = vec![1.0 / 20.0; 400];
    // σ_max² D / K for D = 3, n = 300: 100 · 3/5 · 3/√3.
    let d_branch = 100.0 * 0.6 * 3.0 / 3f64.sqrt();
    let tails = [
        TailBoundParams::Kolmogorov { weights: weights.clone(), base: bern, x: 2.0 },
        TailBoundParams::TruncatedMoment { weights, base: bern, a: 1.5, a_n: 2.0 },
        TailBoundParams::DDependent { base: unif, d: 3, n: 300, x: 0.75 * d_branch },
    ];
    let mut out = Vec::new();
    for (i, p) in tails.iter().enumerate() {
        let c = tail_bound_check(p, reps, SeedSpec::new(seed, 100 + i as u64))?;
        out.push(BoundOutcome {
            name: c.kind.to_string(),
            empirical: c.empirical,
            se: c.se,
            lower: 0.0,
            upper: c.bound,
            pass: c.pass,
        });
    }
    let w64 = vec![0.125; 64];
    for (i, base) in [NoiseSpec::gaussian(), bern, unif].iter().enumerate() {
        let c = fourth_moment_sandwich(&w64, base, reps, SeedSpec::new(seed, 200 + i as u64))?;
        out.push(BoundOutcome {
            name: format!("fourth_moment_{base}"),
            empirical: c.estimate,
            se: c.se,
            lower: c.lower,
            upper: c.upper,
            pass: c.pass,
        });
    }
    let w256 = vec![1.0 / 16.0; 256];
    for row in deviation_ratio_probe(&w256, &unif, &PROBE_POINTS, reps, SeedSpec::new(seed, 300))? {
        out.push(BoundOutcome {
            name: format!("deviation_ratio_x={}", row.x),
            empirical: row.ratio,
            se: row.se,
            lower: 0.8,
            upper: 1.25,
            pass: (0.8..=1.25).contains(&row.ratio),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        let cfg = ExperimentConfig::from_toml("n = [64, 128]").unwrap();
        let plan = cfg.experiment_plan().unwrap();
        assert_eq!(plan.noise, NoiseSpec::gaussian());
        assert_eq!(plan.estimator.prefilter, None);
        assert!(plan.calibrate.is_some());
    }

    #[test]
    fn threshold_constant_defaults_by_rule() {
        let plan = ExperimentConfig::from_toml("[estimator]\nrule = \"universal\"").unwrap().plan().unwrap();
        assert_eq!(plan.estimator.rule, RuleSpec::Universal);
        assert!(plan.calibrate.is_none());
        let vb = ExperimentConfig::from_toml("[estimator]\nrule = \"vertical_block\"").unwrap().plan().unwrap();
        assert!(matches!(vb.estimator.rule, RuleSpec::VerticalBlock { c, .. } if c == 1.0));
        let bad = ExperimentConfig::from_toml("[estimator]\nrule = \"universal\"\nC = \"calibrate\"").unwrap();
        assert!(matches!(bad.plan(), Err(Error::Config(_))));
    }

    #[test]
    fn cauchy_auto_prefilter() {
        let cfg = ExperimentConfig::from_toml("n = [256]\nnoise = \"cauchy\"\n[besov]\nm = 1.0\np = 2\nq = 2\nA = 1.0\n")
            .unwrap();
        assert_eq!(cfg.plan().unwrap().estimator.prefilter, Some(9));
    }

    #[test]
    fn config_errors_are_exit_3() {
        for text in [
            "reps = 0\nn = [64]",
            "n = [100]",
            "bogus = 1",
            "n = [64]\nnoise = \"laplace\"",
            "n = [64]\n[estimator]\nrule = \"fixed\"",
            "n = [64]\n[estimator]\nrule = \"universal\"\nC = \"calibrate\"",
            "n = [64]\n[besov]\nm = 0.2\np = 2\nq = 2\nA = 1",
            "n = [64]\n[estimator]\nwavelet = \"db8\"",
            "n = [64",
        ] {
            let err = ExperimentConfig::from_toml(text).and_then(|c| c.experiment_plan()).unwrap_err();
            assert_eq!(err.exit_code(), 3, "{text}: {err}");
        }
    }

    #[test]
    fn haar_warning() {
        let cfg = ExperimentConfig::from_toml("n = [64]\n[estimator]\nwavelet = \"haar\"\nC = 1.0").unwrap();
        assert_eq!(cfg.plan().unwrap().warnings.len(), 1);
    }

    #[test]
    fn experiment_is_deterministic() {
        let text = "seed = 3\nreps = 30\nn = [16, 32, 64, 128]\n[estimator]\ncalibrate_at = 16\ncalibrate_grid = [0.5, 1.0]";
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let a = run_experiment(&cfg, &mut |_| {}).unwrap().to_csv().unwrap();
        let b = run_experiment(&cfg, &mut |_| {}).unwrap().to_csv().unwrap();
        assert_eq!(a, b);
        assert!(a.contains("fit,"));
    }
}
