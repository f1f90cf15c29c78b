//! Noise families, seeded streams and moment bookkeeping.
//!
//! Every family with a finite variance is standardised so that `scale = 1`
//! means unit variance. Cauchy and Student-t with `ν <= 2` are used in their
//! standard form, multiplied by `scale`.

use crate::error::{invalid, Error, Result};
use crate::prefilter::median_filter_into;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal, StudentT};
use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// A reproducible random stream: ChaCha8 keyed by `seed`, on stream `stream`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub seed: u64,
    pub stream: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeedSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Derived stream for work item `index`, same master seed.
    pub fn child(&self, index: u64) -> Self {
        Self { seed: self.seed, stream: splitmix(self.stream ^ splitmix(index.wrapping_add(1))) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseFamily {
    Gaussian,
    BernoulliSym,
    UniformSym,
    StudentT(f64),
    Cauchy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub scale: f64,
}

impl NoiseSpec {
    pub fn new(family: NoiseFamily, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(invalid(format!("noise scale must be positive, got {scale}")));
        }
        if let NoiseFamily::StudentT(nu) = family {
            if !(nu > 0.0) || !nu.is_finite() {
                return Err(invalid(format!("student_t needs finite nu > 0, got {nu}")));
            }
        }
        Ok(Self { family, scale })
    }

    pub fn gaussian() -> Self {
        Self { family: NoiseFamily::Gaussian, scale: 1.0 }
    }

    pub fn bernoulli_sym() -> Self {
        Self { family: NoiseFamily::BernoulliSym, scale: 1.0 }
    }

    pub fn uniform_sym() -> Self {
        Self { family: NoiseFamily::UniformSym, scale: 1.0 }
    }

    pub fn cauchy() -> Self {
        Self { family: NoiseFamily::Cauchy, scale: 1.0 }
    }

    pub fn student_t(nu: f64) -> Result<Self> {
        Self::new(NoiseFamily::StudentT(nu), 1.0)
    }

    pub fn with_scale(self, scale: f64) -> Result<Self> {
        Self::new(self.family, scale)
    }

    /// Tail order `γ` in `P(|X| >= x) <= C x^-γ`.
    pub fn tail_order(&self) -> f64 {
        match self.family {
            NoiseFamily::StudentT(nu) => nu,
            NoiseFamily::Cauchy => 1.0,
            _ => f64::INFINITY,
        }
    }

    /// Supremum of the orders `r` with `E|X|^r < ∞` (moments strictly below it).
    pub fn moment_order(&self) -> f64 {
        self.tail_order()
    }

    pub fn is_symmetric(&self) -> bool {
        true
    }

    pub fn variance(&self) -> Option<f64> {
        match self.family {
            NoiseFamily::Cauchy => None,
            NoiseFamily::StudentT(nu) if nu <= 2.0 => None,
            _ => Some(self.scale * self.scale),
        }
    }

    /// `E X⁴`, when finite.
    pub fn fourth_moment(&self) -> Option<f64> {
        let s4 = self.scale.powi(4);
        match self.family {
            NoiseFamily::Gaussian => Some(3.0 * s4),
            NoiseFamily::BernoulliSym => Some(s4),
            NoiseFamily::UniformSym => Some(1.8 * s4),
            NoiseFamily::StudentT(nu) if nu > 4.0 => Some(s4 * (3.0 + 6.0 / (nu - 4.0))),
            _ => None,
        }
    }

    /// `E|X|³`, when finite.
    pub fn third_abs_moment(&self) -> Option<f64> {
        let s3 = self.scale.powi(3);
        match self.family {
            NoiseFamily::Gaussian => Some(2.0 * (2.0 / std::f64::consts::PI).sqrt() * s3),
            NoiseFamily::BernoulliSym => Some(s3),
            NoiseFamily::UniformSym => Some(0.75 * SQRT_3 * s3),
            NoiseFamily::StudentT(nu) if nu > 3.0 => {
                // E|T|³ = 2 ν^{3/2} Γ(2) Γ((ν-3)/2) / (√π Γ(ν/2)); then standardise.
                use libm::lgamma as ln_gamma;
                let raw = 2.0 * nu.powf(1.5) * (ln_gamma((nu - 3.0) / 2.0) - ln_gamma(nu / 2.0)).exp()
                    / std::f64::consts::PI.sqrt();
                Some(s3 * raw * ((nu - 2.0) / nu).powf(1.5))
            }
            _ => None,
        }
    }

    /// `sup |X|` for bounded families.
    pub fn bound(&self) -> Option<f64> {
        match self.family {
            NoiseFamily::BernoulliSym => Some(self.scale),
            NoiseFamily::UniformSym => Some(SQRT_3 * self.scale),
            _ => None,
        }
    }

    /// One draw.
    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let z = match self.family {
            NoiseFamily::Gaussian => StandardNormal.sample(rng),
            NoiseFamily::BernoulliSym => {
                if rng.next_u32() & 1 == 0 {
                    -1.0
                } else {
                    1.0
                }
            }
            NoiseFamily::UniformSym => SQRT_3 * (2.0 * rng.random::<f64>() - 1.0),
            NoiseFamily::StudentT(nu) => {
                let t: f64 = StudentT::new(nu).expect("validated nu").sample(rng);
                if nu > 2.0 {
                    t * ((nu - 2.0) / nu).sqrt()
                } else {
                    t
                }
            }
            NoiseFamily::Cauchy => Cauchy::new(0.0, 1.0).expect("unit cauchy").sample(rng),
        };
        z * self.scale
    }

    pub fn fill<R: RngCore + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self.family {
            NoiseFamily::StudentT(nu) => {
                let dist = StudentT::new(nu).expect("validated nu");
                let f = if nu > 2.0 { ((nu - 2.0) / nu).sqrt() } else { 1.0 } * self.scale;
                out.iter_mut().for_each(|x| *x = f * dist.sample(rng));
            }
            _ => out.iter_mut().for_each(|x| *x = self.draw(rng)),
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            NoiseFamily::Gaussian => write!(f, "gaussian"),
            NoiseFamily::BernoulliSym => write!(f, "bernoulli_sym"),
            NoiseFamily::UniformSym => write!(f, "uniform_sym"),
            NoiseFamily::StudentT(nu) => write!(f, "student_t({nu})"),
            NoiseFamily::Cauchy => write!(f, "cauchy"),
        }?;
        if self.scale != 1.0 {
            write!(f, "*{}", self.scale)?;
        }
        Ok(())
    }
}

impl std::str::FromStr for NoiseSpec {
    type Err = Error;

    /// Accepts `gaussian`, `bernoulli_sym`, `uniform_sym`, `cauchy` and
    /// `student_t(ν)`, optionally followed by `*scale`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown noise `{s}`"));
        let (name, scale) = match s.split_once('*') {
            Some((a, b)) => (a.trim(), b.trim().parse::<f64>().map_err(|_| bad())?),
            None => (s.trim(), 1.0),
        };
        let family = match name.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => NoiseFamily::Gaussian,
            "bernoulli_sym" | "bernoulli" => NoiseFamily::BernoulliSym,
            "uniform_sym" | "uniform" => NoiseFamily::UniformSym,
            "cauchy" => NoiseFamily::Cauchy,
            other => {
                let nu = other
                    .strip_prefix("student_t(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(bad)?;
                NoiseFamily::StudentT(nu)
            }
        };
        NoiseSpec::new(family, scale).map_err(|e| Error::Config(e.to_string()))
    }
}

/// `n` i.i.d. draws from `spec` on the stream `seed`.
pub fn sample(spec: &NoiseSpec, n: usize, seed: SeedSpec) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(invalid("sample size must be >= 1"));
    }
    let mut out = vec![0.0; n];
    spec.fill(&mut seed.rng(), &mut out);
    Ok(out)
}

/// Moment order `L` that noise must exceed for a Besov ball with smoothness
/// `m` and exponent `p`: `3(2m+1)/m` for `p >= 2`, otherwise
/// `6s(2m+1) / (s(2m+1) - m)` with `s = m + 1/2 - 1/p`.
pub fn moment_condition(m: f64, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(invalid(format!("Besov exponent p must be >= 1, got {p}")));
    }
    if !(m > 1.0 / p) {
        return Err(Error::Hypothesis(format!("smoothness m = {m} must exceed 1/p = {}", 1.0 / p)));
    }
    if p >= 2.0 {
        Ok(3.0 * (2.0 * m + 1.0) / m)
    } else {
        let s = m + 0.5 - 1.0 / p;
        let a = s * (2.0 * m + 1.0);
        Ok(6.0 * a / (a - m))
    }
}

/// Mean and variance of `max(e_1, ..., e_M)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxStats {
    pub mean: f64,
    pub variance: f64,
    /// Monte Carlo standard errors; zero for closed forms.
    pub mean_se: f64,
    pub variance_se: f64,
}

const MAX_STATS_REPS: usize = 200_000;
const MAX_STATS_SEED: SeedSpec = SeedSpec { seed: 0x6d61_785f_7374_6174, stream: 0 };

type MaxCache = Mutex<HashMap<(u64, u64, usize), MaxStats>>;

fn max_cache() -> &'static MaxCache {
    static CACHE: OnceLock<MaxCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Closed forms for the symmetric Bernoulli and uniform laws; Monte Carlo
/// (cached per family, scale and `M`) for Gaussian and Student-t with `ν > 2`.
pub fn max_statistics(spec: &NoiseSpec, m: usize) -> Result<MaxStats> {
    if m < 1 {
        return Err(invalid("max window M must be >= 1"));
    }
    let s = spec.scale;
    let exact = |mean: f64, variance: f64| MaxStats { mean, variance, mean_se: 0.0, variance_se: 0.0 };
    match spec.family {
        NoiseFamily::BernoulliSym => {
            // P(max = -1) = 2^-M
            let q = 0.5f64.powi(m as i32);
            Ok(exact(s * (1.0 - 2.0 * q), s * s * 4.0 * q * (1.0 - q)))
        }
        NoiseFamily::UniformSym => {
            // max of M uniforms on [-b, b] is b(2B - 1) with B ~ Beta(M, 1)
            let b = SQRT_3 * s;
            let mf = m as f64;
            let var01 = mf / ((mf + 1.0).powi(2) * (mf + 2.0));
            Ok(exact(b * (mf - 1.0) / (mf + 1.0), 4.0 * b * b * var01))
        }
        NoiseFamily::Gaussian | NoiseFamily::StudentT(_) => {
            if let NoiseFamily::StudentT(nu) = spec.family {
                if nu <= 2.0 {
                    return Err(Error::InfiniteVariance(format!("max of student_t({nu}) has no variance")));
                }
            }
            if m == 1 {
                return Ok(exact(0.0, spec.variance().unwrap()));
            }
            let nu_key = match spec.family {
                NoiseFamily::StudentT(nu) => nu.to_bits(),
                _ => 0,
            };
            let key = (nu_key, s.to_bits(), m);
            if let Some(hit) = max_cache().lock().unwrap().get(&key) {
                return Ok(*hit);
            }
            let mut rng = MAX_STATS_SEED.child(m as u64).rng();
            let mut buf = vec![0.0; m];
            let (mut s1, mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0, 0.0);
            for _ in 0..MAX_STATS_REPS {
                spec.fill(&mut rng, &mut buf);
                let x = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                s1 += x;
                s2 += x * x;
                s3 += x * x * x;
                s4 += x * x * x * x;
            }
            let r = MAX_STATS_REPS as f64;
            let mean = s1 / r;
            let var = (s2 / r - mean * mean) * r / (r - 1.0);
            let m4 = s4 / r - 4.0 * mean * s3 / r + 6.0 * mean * mean * s2 / r - 3.0 * mean.powi(4);
            let stats = MaxStats {
                mean,
                variance: var,
                mean_se: (var / r).sqrt(),
                variance_se: ((m4 - var * var).max(0.0) / r).sqrt(),
            };
            max_cache().lock().unwrap().insert(key, stats);
            Ok(stats)
        }
        NoiseFamily::Cauchy => Err(Error::InfiniteVariance("max of cauchy variables has no moments".into())),
    }
}

/// Moving median of width `D` over an i.i.d. stream of `n + D - 1` base
/// draws (full windows only), hence exactly `D`-dependent. The built-in
/// bases are symmetric, so the medians already have mean zero.
pub fn d_dependent_sample(base: &NoiseSpec, d: usize, n: usize, seed: SeedSpec) -> Result<Vec<f64>> {
    if d.is_multiple_of(2) {
        return Err(invalid(format!("dependence range D must be odd, got {d}")));
    }
    if n < 1 {
        return Err(invalid("sample size must be >= 1"));
    }
    let raw = sample(base, n + d - 1, seed)?;
    if d == 1 {
        return Ok(raw);
    }
    let l = d / 2;
    let mut filtered = Vec::with_capacity(raw.len());
    median_filter_into(&raw, l, &mut filtered);
    Ok(filtered[l..l + n].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("cauchy".parse::<NoiseSpec>().unwrap(), NoiseSpec::cauchy());
        let t: NoiseSpec = "student_t(3)".parse().unwrap();
        assert_eq!(t.family, NoiseFamily::StudentT(3.0));
        assert_eq!(t.tail_order(), 3.0);
        let g: NoiseSpec = "gaussian*0.5".parse().unwrap();
        assert_eq!(g.scale, 0.5);
        assert_eq!(g.to_string(), "gaussian*0.5");
        assert!("laplace".parse::<NoiseSpec>().is_err());
        assert!("student_t(-1)".parse::<NoiseSpec>().is_err());
    }

    #[test]
    fn bernoulli_support_and_determinism() {
        let seed = SeedSpec::new(7, 3);
        let x = sample(&NoiseSpec::bernoulli_sym(), 1000, seed).unwrap();
        assert!(x.iter().all(|v| *v == 1.0 || *v == -1.0));
        assert_eq!(x, sample(&NoiseSpec::bernoulli_sym(), 1000, seed).unwrap());
        assert_ne!(x, sample(&NoiseSpec::bernoulli_sym(), 1000, SeedSpec::new(7, 4)).unwrap());
    }

    #[test]
    fn gaussian_unit_variance() {
        let x = sample(&NoiseSpec::gaussian(), 1_000_000, SeedSpec::new(1, 0)).unwrap();
        let (_, v) = mean_var(&x);
        assert!((0.99..=1.01).contains(&v), "variance {v}");
    }

    #[test]
    fn moment_condition_examples() {
        assert!((moment_condition(1.0, 1.5).unwrap() - 10.0).abs() < 1e-12);
        assert!((moment_condition(2.0, 1.5).unwrap() - 330.0 / 43.0).abs() < 1e-12);
        assert!((moment_condition(1.0, 2.0).unwrap() - 9.0).abs() < 1e-12);
        assert!(moment_condition(0.5, 2.0).is_err());
        assert!(moment_condition(1.0, 0.5).is_err());
        for p in [1.0, 1.5, 2.0, 4.0] {
            let l = moment_condition(1e3, p).unwrap();
            assert!((l - 6.0).abs() < 0.02, "p = {p}: {l}");
        }
    }

    #[test]
    fn max_statistics_closed_forms() {
        let b = max_statistics(&NoiseSpec::bernoulli_sym(), 2).unwrap();
        assert!((b.variance - 0.75).abs() < 1e-15);
        let u = max_statistics(&NoiseSpec::uniform_sym().with_scale(1.0 / SQRT_3).unwrap(), 2).unwrap();
        assert!((u.variance - 2.0 / 9.0).abs() < 1e-15);
        for spec in [NoiseSpec::bernoulli_sym(), NoiseSpec::uniform_sym(), NoiseSpec::gaussian()] {
            let one = max_statistics(&spec, 1).unwrap();
            assert!(one.mean.abs() < 1e-15);
            assert!((one.variance - 1.0).abs() < 1e-15);
        }
        assert!(max_statistics(&NoiseSpec::cauchy(), 3).is_err());
        assert!(max_statistics(&NoiseSpec::student_t(2.0).unwrap(), 3).is_err());
    }

    #[test]
    fn gaussian_max_is_monte_carlo_with_error() {
        let g = max_statistics(&NoiseSpec::gaussian(), 2).unwrap();
        // E max(Z1, Z2) = 1/sqrt(pi), var = 1 - 1/pi
        assert!((g.mean - 1.0 / std::f64::consts::PI.sqrt()).abs() < 4.0 * g.mean_se);
        assert!((g.variance - (1.0 - 1.0 / std::f64::consts::PI)).abs() < 4.0 * g.variance_se);
        assert_eq!(g, max_statistics(&NoiseSpec::gaussian(), 2).unwrap());
    }

    #[test]
    fn d_dependent_degenerate_and_deterministic() {
        let seed = SeedSpec::new(11, 0);
        let base = NoiseSpec::gaussian();
        assert_eq!(d_dependent_sample(&base, 1, 500, seed).unwrap(), sample(&base, 500, seed).unwrap());
        let a = d_dependent_sample(&base, 5, 500, seed).unwrap();
        assert_eq!(a.len(), 500);
        assert_eq!(a, d_dependent_sample(&base, 5, 500, seed).unwrap());
        assert!(d_dependent_sample(&base, 4, 10, seed).is_err());
    }

    #[test]
    fn child_streams_differ() {
        let s = SeedSpec::new(5, 9);
        assert_ne!(s.child(0), s.child(1));
        assert_eq!(s.child(3), s.child(3));
    }
}
