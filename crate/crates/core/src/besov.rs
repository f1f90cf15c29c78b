//! Besov sequence balls: norms, tail energy and adversarial in-ball signals.

use crate::error::{invalid, Error, Result};
use crate::noise::SeedSpec;
use crate::wavelet::CoeffPyramid;
use rand::Rng;
use serde::Deserialize;

/// Ball `{θ : ‖θ‖_{m,p,q} <= A}` on pyramids with coarse level `j0`.
/// `p` and `q` may be `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesovSpec {
    pub m: f64,
    pub p: f64,
    pub q: f64,
    #[serde(rename = "A", alias = "radius")]
    pub radius: f64,
    #[serde(default)]
    pub j0: usize,
}

impl BesovSpec {
    pub fn new(m: f64, p: f64, q: f64, radius: f64, j0: usize) -> Result<Self> {
        let spec = Self { m, p, q, radius, j0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) || !(self.q >= 1.0) {
            return Err(invalid(format!("Besov exponents need p, q >= 1, got p = {}, q = {}", self.p, self.q)));
        }
        if !(self.m > 0.0) || !self.m.is_finite() {
            return Err(invalid(format!("smoothness m must be positive, got {}", self.m)));
        }
        if !(self.radius >= 0.0) || !self.radius.is_finite() {
            return Err(invalid(format!("radius A must be >= 0, got {}", self.radius)));
        }
        if !(self.m > 1.0 / self.p) {
            return Err(Error::Hypothesis(format!("smoothness m = {} must exceed 1/p = {}", self.m, 1.0 / self.p)));
        }
        Ok(())
    }

    /// `s = m + 1/2 - 1/p`.
    pub fn s(&self) -> f64 {
        self.m + 0.5 - 1.0 / self.p
    }

    /// Per-level decay exponent of the `ℓ²` energy: `m` for `p >= 2`, else `s`.
    pub fn energy_exponent(&self) -> f64 {
        if self.p >= 2.0 {
            self.m
        } else {
            self.s()
        }
    }
}

fn lp_norm(x: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        x.iter().fold(0.0, |a, v| a.max(v.abs()))
    } else if p == 2.0 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `‖scaling‖_p + ‖(2^{js} ‖θ_{j,·}‖_p)_j‖_q`.
pub fn besov_norm(pyramid: &CoeffPyramid, spec: &BesovSpec) -> Result<f64> {
    spec.validate()?;
    if pyramid.j0() != spec.j0 {
        return Err(Error::Shape(format!(
            "pyramid coarse level {} differs from ball coarse level {}",
            pyramid.j0(),
            spec.j0
        )));
    }
    let s = spec.s();
    let weighted: Vec<f64> =
        pyramid.levels().map(|j| (j as f64 * s).exp2() * lp_norm(pyramid.level(j), spec.p)).collect();
    Ok(lp_norm(pyramid.scaling(), spec.p) + lp_norm(&weighted, spec.q))
}

/// Multiplies by `A / max(A, norm)`, so pyramids already inside are unchanged.
pub fn scale_to_ball(pyramid: &CoeffPyramid, spec: &BesovSpec) -> Result<CoeffPyramid> {
    let norm = besov_norm(pyramid, spec)?;
    if norm <= spec.radius {
        return Ok(pyramid.clone());
    }
    Ok(pyramid.scaled(spec.radius / norm))
}

/// Rescales onto the sphere `norm = A`.
pub fn scale_to_boundary(pyramid: &CoeffPyramid, spec: &BesovSpec) -> Result<CoeffPyramid> {
    let norm = besov_norm(pyramid, spec)?;
    if norm == 0.0 {
        return Err(invalid("cannot scale a zero pyramid to the ball boundary"));
    }
    Ok(pyramid.scaled(spec.radius / norm))
}

/// `A² 2^{-2el} / (1 - 2^{-2e})` with `e = m` for `p >= 2` and `e = s` otherwise:
/// bounds `Σ_{j>=l} ‖θ_{j,·}‖²` over the ball.
pub fn tail_energy_bound(spec: &BesovSpec, l: usize) -> Result<f64> {
    spec.validate()?;
    if l < spec.j0 {
        return Err(Error::LevelOutOfRange { level: l, min: spec.j0, max: usize::MAX });
    }
    let r = (-2.0 * spec.energy_exponent()).exp2();
    Ok(spec.radius * spec.radius * r.powi(l as i32) / (1.0 - r))
}

/// A named in-ball pyramid.
#[derive(Debug, Clone, PartialEq)]
pub struct Adversary {
    pub name: String,
    pub pyramid: CoeffPyramid,
}

/// `min {j >= 1 : C sqrt(j / n) >= 2A 2^{-j(2m+1)/2}}`, the level where a
/// level-constant boundary signal first drops below the threshold scale.
pub fn critical_level(spec: &BesovSpec, n: usize, c: f64) -> Result<usize> {
    spec.validate()?;
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::NotDyadic(n));
    }
    if !(c > 0.0) {
        return Err(invalid("critical level needs C > 0"));
    }
    let nf = n as f64;
    let mut j = 1usize;
    while c * (j as f64 / nf).sqrt() < 2.0 * spec.radius * (-(j as f64) * (2.0 * spec.m + 1.0) / 2.0).exp2() {
        j += 1;
    }
    Ok(j)
}

const RANDOM_ADVERSARIES: u64 = 4;
const ADVERSARY_SEED: u64 = 0x6164_7665_7273_6172;

/// Finite stand-in for the supremum over the ball:
///
/// * `critical(j)`: constant level at [`critical_level`], clamped to the pyramid;
/// * `level(j)`: constant boundary signal on each other detail level;
/// * `scaling`: constant scaling coefficients on the boundary;
/// * `spike(j)`: one boundary coefficient `θ_{j,0}` per level;
/// * `random(i)`: random signs with decaying magnitudes, on the boundary.
pub fn adversary_signals(spec: &BesovSpec, n: usize, c: f64) -> Result<Vec<Adversary>> {
    let crit = critical_level(spec, n, c)?;
    let h = n.trailing_zeros() as usize;
    if spec.j0 >= h {
        return Err(Error::LevelOutOfRange { level: spec.j0, min: 0, max: h - 1 });
    }
    let crit = crit.clamp(spec.j0, h - 1);
    let a = spec.radius;
    let s = spec.s();
    let mut out = Vec::new();
    let zeros = CoeffPyramid::zeros(spec.j0, h)?;

    let level_constant = |j: usize| {
        let mut p = zeros.clone();
        let amp = a * (-(j as f64) * (spec.m + 0.5)).exp2();
        p.level_mut(j).iter_mut().for_each(|x| *x = amp);
        p
    };
    out.push(Adversary { name: format!("critical({crit})"), pyramid: level_constant(crit) });
    for j in (spec.j0..h).filter(|&j| j != crit) {
        out.push(Adversary { name: format!("level({j})"), pyramid: level_constant(j) });
    }

    let mut scaling = zeros.clone();
    let b = a * (-(spec.j0 as f64) / spec.p).exp2();
    scaling.scaling_mut().iter_mut().for_each(|x| *x = b);
    out.push(Adversary { name: "scaling".into(), pyramid: scaling });

    for j in spec.j0..h {
        let mut p = zeros.clone();
        p.level_mut(j)[0] = a * (-(j as f64) * s).exp2();
        out.push(Adversary { name: format!("spike({j})"), pyramid: p });
    }

    for i in 0..RANDOM_ADVERSARIES {
        let mut rng = SeedSpec::new(ADVERSARY_SEED, i).rng();
        let mut p = zeros.clone();
        p.scaling_mut().iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        for j in spec.j0..h {
            let amp = (-(j as f64) * (spec.m + 0.5)).exp2();
            p.level_mut(j).iter_mut().for_each(|x| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                *x = sign * amp * rng.random_range(0.0..1.0);
            });
        }
        let p = if a == 0.0 { zeros.clone() } else { scale_to_boundary(&p, spec)? };
        out.push(Adversary { name: format!("random({i})"), pyramid: p });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> BesovSpec {
        BesovSpec::new(1.0, 2.0, 2.0, 1.0, 0).unwrap()
    }

    #[test]
    fn validation() {
        assert!(BesovSpec::new(1.0, 0.5, 2.0, 1.0, 0).is_err());
        assert!(BesovSpec::new(0.4, 2.0, 2.0, 1.0, 0).is_err());
        assert!(BesovSpec::new(1.0, f64::INFINITY, f64::INFINITY, 1.0, 0).is_ok());
    }

    #[test]
    fn single_coefficient_norm() {
        let mut p = CoeffPyramid::zeros(0, 5).unwrap();
        p.level_mut(3)[2] = -0.7;
        let got = besov_norm(&p, &spec()).unwrap();
        assert!((got - 8.0 * 0.7).abs() < 1e-14);
        assert_eq!(besov_norm(&CoeffPyramid::zeros(0, 5).unwrap(), &spec()).unwrap(), 0.0);
    }

    #[test]
    fn scaling_to_ball() {
        let mut p = CoeffPyramid::zeros(0, 4).unwrap();
        p.level_mut(1)[0] = 1.0;
        let sp = spec();
        // norm = 2^{1.5}
        let inside = p.scaled(0.5 / 2f64.powf(1.5));
        assert_eq!(scale_to_ball(&inside, &sp).unwrap(), inside);
        let outside = p.scaled(2.0 / 2f64.powf(1.5));
        let got = scale_to_ball(&outside, &sp).unwrap();
        assert!((besov_norm(&got, &sp).unwrap() - 1.0).abs() < 1e-12);
        assert!(scale_to_boundary(&CoeffPyramid::zeros(0, 4).unwrap(), &sp).is_err());
    }

    #[test]
    fn tail_energy_examples() {
        let sp = spec();
        assert!((tail_energy_bound(&sp, 0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        let r = tail_energy_bound(&sp, 4).unwrap() / tail_energy_bound(&sp, 3).unwrap();
        assert!((r - 0.25).abs() < 1e-15);
    }

    #[test]
    fn critical_level_tracks_log_n() {
        let j = critical_level(&spec(), 1 << 20, 1.0).unwrap();
        assert!((j as f64 - 20.0 / 3.0).abs() <= 1.0, "j = {j}");
    }

    #[test]
    fn adversaries_in_ball() {
        for sp in [spec(), BesovSpec::new(2.0, 1.5, 1.0, 0.5, 2).unwrap()] {
            let advs = adversary_signals(&sp, 1024, 1.0).unwrap();
            assert_eq!(advs.len(), 2 * (10 - sp.j0) + 1 + 4);
            for a in &advs {
                let norm = besov_norm(&a.pyramid, &sp).unwrap();
                assert!(norm <= sp.radius * (1.0 + 1e-12), "{}: {norm}", a.name);
                assert!(norm >= sp.radius * (1.0 - 1e-12), "{} not on boundary", a.name);
            }
        }
    }

    #[test]
    fn zero_radius_gives_zero_signals() {
        let sp = BesovSpec::new(1.0, 2.0, 2.0, 0.0, 0).unwrap();
        for a in adversary_signals(&sp, 256, 1.0).unwrap() {
            assert_eq!(a.pyramid.norm_sq(), 0.0, "{}", a.name);
        }
    }
}
