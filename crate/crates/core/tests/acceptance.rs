//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.

mod common;

use common::{soft_risk_quadrature, TestRng};
use num_rational::Ratio;
use std::process::ExitCode;
use std::time::Instant;
use wavedenoise::besov::{adversary_signals, BesovSpec};
use wavedenoise::experiment::{run_experiment, verify_bounds, ExperimentConfig};
use wavedenoise::noise::{max_statistics, NoiseSpec, SeedSpec};
use wavedenoise::normal::cdf;
use wavedenoise::pipeline::{EstimatorSpec, RuleSpec};
use wavedenoise::prefilter::{bias_check, median_tail_bound};
use wavedenoise::risk::report::SUP;
use wavedenoise::risk::{gaussian_ratio_experiment, gaussian_soft_risk, max_estimator_risk, McControl, RiskReport};
use wavedenoise::threshold::{above, haar_block_mean, vertical_block_estimate, BlockConfig};
use wavedenoise::wavelet::{forward_dwt_slice, inverse_dwt};
use wavedenoise::{CoeffPyramid, Signal, WaveletKind, WaveletSpec};

const TARGET_SLOPE: f64 = -2.0 / 3.0;
const A1_BAND: f64 = 0.12;
const A2_BAND: f64 = 0.15;
const A3_N: usize = 1 << 12;
const A3_REPS: usize = 1000;
const A3_MIN_RATIO: f64 = 0.8;
const A4_TRIPLES: usize = 1000;
const A6_N: usize = 1 << 12;
const A6_REPS: usize = 2000;
const A7_PARSEVAL_TOL: f64 = 1e-10;
const A7_ROUND_TRIP_TOL: f64 = 1e-12;
const A7_BLOCK_MEAN_TOL: f64 = 1e-12;
const A8_QUADRATURE_TOL: f64 = 1e-8;
const A9_REPS: usize = 1_000_000;
const A10_REPS: usize = 200;

type Q = Ratio<i128>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn load(name: &str) -> ExperimentConfig {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/");
    let text = std::fs::read_to_string(format!("{path}{name}")).expect("config file");
    ExperimentConfig::from_toml(&text).expect("valid config")
}

fn rate_check(config: &str, band: f64) -> Outcome {
    let cfg = load(config);
    let mut log = Vec::new();
    let report = match run_experiment(&cfg, &mut |l| log.push(l.to_string())) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("experiment failed: {e}")),
    };
    let fit = &report.fits[0];
    let sups: Vec<String> = report
        .rows
        .iter()
        .filter(|r| r.adversary == SUP)
        .map(|r| format!("{:.3e}", r.risk))
        .collect();
    outcome(
        (fit.slope - TARGET_SLOPE).abs() <= band,
        format!(
            "{}; sup risks [{}]; slope {:.4} in [{:.4}, {:.4}]",
            log.first().map(String::as_str).unwrap_or(""),
            sups.join(", "),
            fit.slope,
            TARGET_SLOPE - band,
            TARGET_SLOPE + band
        ),
    )
}

fn a1() -> Outcome {
    rate_check("rate_gaussian.toml", A1_BAND)
}

fn a2() -> Outcome {
    rate_check("rate_cauchy.toml", A2_BAND)
}

fn a3() -> Outcome {
    let ball = BesovSpec::new(1.0, 2.0, 2.0, 1.0, 0).unwrap();
    let template = EstimatorSpec::new(WaveletKind::Daubechies4, RuleSpec::Universal);
    let grid: Vec<f64> = (1..=40).map(|i| i as f64 * 0.125).collect();
    let mut parts = Vec::new();
    let mut pass = true;
    for (i, noise) in [NoiseSpec::uniform_sym(), NoiseSpec::bernoulli_sym()].iter().enumerate() {
        let ctl = McControl::new(A3_REPS, SeedSpec::new(30 + i as u64, A3_N as u64));
        match gaussian_ratio_experiment(noise, &ball, A3_N, &template, &ctl, &grid, 1.0) {
            Ok(r) => {
                pass &= r.ratio >= A3_MIN_RATIO;
                parts.push(format!("{noise}: ratio {:.4} ({} vs {})", r.ratio, r.gaussian_rule, r.noise_rule));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{noise}: {e}"));
            }
        }
    }
    outcome(pass, format!("{}; need >= {A3_MIN_RATIO}", parts.join("; ")))
}

fn a4() -> Outcome {
    let mut rng = TestRng::new(44);
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    for t in 0..A4_TRIPLES {
        let n = 128;
        let l = 1 + t % 3;
        let f: Vec<f64> = match t % 4 {
            0 => rng.vec(n),
            1 => (0..n).map(|i| if i < n / 2 { 0.0 } else { 3.0 * rng.sym() }).collect(),
            2 => {
                let mut acc = 0.0;
                (0..n)
                    .map(|_| {
                        acc += 0.2 * rng.sym();
                        acc
                    })
                    .collect()
            }
            _ => (0..n).map(|i| (i as f64 * 0.3).sin() * 5.0).collect(),
        };
        let e: Vec<f64> = (0..n).map(|_| (rng.sym() * 6.0).powi(3)).collect();
        let (lhs, rhs) = bias_check(&f, &e, l).unwrap();
        if lhs > rhs {
            violations += 1;
        }
        if rhs > 0.0 {
            tightest = tightest.min(rhs / lhs.max(f64::MIN_POSITIVE));
        }
    }
    outcome(violations == 0, format!("{violations} violations in {A4_TRIPLES} triples; smallest rhs/lhs {tightest:.3}"))
}

fn binom(n: i128, k: i128) -> i128 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn a5() -> Outcome {
    let laws: [[(i64, Q); 3]; 4] = [
        [(-1, Q::new(1, 4)), (0, Q::new(1, 2)), (1, Q::new(1, 4))],
        [(-2, Q::new(1, 3)), (0, Q::new(1, 3)), (5, Q::new(1, 3))],
        [(0, Q::new(1, 10)), (1, Q::new(3, 5)), (2, Q::new(3, 10))],
        [(-3, Q::new(5, 12)), (1, Q::new(1, 12)), (4, Q::new(1, 2))],
    ];
    let mut checked = 0;
    let mut violations = 0;
    for law in &laws {
        for k in 2..=4usize {
            let w = 2 * k - 1;
            let mut thresholds: Vec<Q> = Vec::new();
            for &(v, _) in law {
                thresholds.push(Q::from_integer(v as i128));
                thresholds.push(Q::new(2 * v as i128 + 1, 2));
            }
            thresholds.push(Q::from_integer(-100));
            for x in thresholds {
                let p: Q = law.iter().filter(|(v, _)| Q::from_integer(*v as i128) >= x).map(|(_, q)| *q).sum();
                let mut exact = Q::from_integer(0);
                for code in 0..3usize.pow(w as u32) {
                    let mut c = code;
                    let mut values = Vec::with_capacity(w);
                    let mut prob = Q::from_integer(1);
                    for _ in 0..w {
                        let (v, q) = law[c % 3];
                        c /= 3;
                        values.push(v);
                        prob *= q;
                    }
                    values.sort();
                    if Q::from_integer(values[k - 1] as i128) >= x {
                        exact += prob;
                    }
                }
                let mut bound = Q::from_integer(binom(w as i128, k as i128));
                for _ in 0..k {
                    bound *= p;
                }
                let bound = bound.min(Q::from_integer(1));
                let to_f = |q: Q| *q.numer() as f64 / *q.denom() as f64;
                let lib = median_tail_bound(k, to_f(p)).unwrap();
                checked += 1;
                if exact > bound || lib < to_f(exact) {
                    violations += 1;
                }
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations over {checked} (law, k, x) cases, exact rationals"))
}

fn a6() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    // Exact variance of the max of M fair signs, enumerated over all 2^M outcomes.
    let bern = NoiseSpec::bernoulli_sym();
    for m in 1..=10u32 {
        let total = Q::from_integer(1i128 << m);
        let (mut s1, mut s2) = (Q::from_integer(0), Q::from_integer(0));
        for bits in 0u32..(1 << m) {
            let max = if bits == 0 { -1 } else { 1 };
            s1 += Q::from_integer(max);
            s2 += Q::from_integer(max * max);
        }
        let var = s2 / total - (s1 / total) * (s1 / total);
        let formula = Q::new(1, 1i128 << (m - 1)) * 2 - Q::new(4, 1i128 << (2 * m));
        let lib = max_statistics(&bern, m as usize).unwrap().variance;
        if var != formula || lib != *var.numer() as f64 / *var.denom() as f64 {
            pass = false;
            notes.push(format!("bernoulli M={m} mismatch"));
        }
    }
    let unif = NoiseSpec::uniform_sym().with_scale(1.0 / 3f64.sqrt()).unwrap();
    let mut worst = 0.0f64;
    for m in 1..=64usize {
        let mf = m as f64;
        let want = 4.0 * mf / ((mf + 1.0).powi(2) * (mf + 2.0));
        worst = worst.max((max_statistics(&unif, m).unwrap().variance - want).abs());
    }
    pass &= worst <= 1e-12;
    notes.push(format!("bernoulli var_max exact for M<=10; uniform max error {worst:.1e}"));

    let window = 2 * A6_N.trailing_zeros() as usize;
    let spec = BesovSpec::new(1.0, 2.0, 2.0, 1.0, 0).unwrap();
    let d4 = WaveletSpec::daubechies4();
    for adv in adversary_signals(&spec, A6_N, 1.0).unwrap().iter().filter(|a| a.name.starts_with("random")).take(2) {
        let f = inverse_dwt(&adv.pyramid, &d4).unwrap();
        match max_estimator_risk(&f, &bern, window, A6_REPS, SeedSpec::new(60, 0)) {
            Ok(c) => {
                pass &= c.pass;
                notes.push(format!(
                    "{}: risk {:.4} (se {:.1e}) <= bound {:.4}",
                    adv.name, c.risk.mean, c.risk.se, c.bound
                ));
            }
            Err(e) => {
                pass = false;
                notes.push(e.to_string());
            }
        }
    }
    outcome(pass, format!("M = {window}; {}", notes.join("; ")))
}

fn a7() -> Outcome {
    let mut rng = TestRng::new(77);
    let (mut parseval, mut round_trip, mut block_mean) = (0.0f64, 0.0f64, 0.0f64);
    for t in 0..100 {
        let h = 1 + t % 10;
        let x = rng.vec(1 << h);
        let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for spec in [WaveletSpec::haar(), WaveletSpec::daubechies4()] {
            let p = forward_dwt_slice(&x, &spec, t % h).unwrap();
            parseval = parseval.max((p.norm_sq().sqrt() - norm).abs() / norm);
            let y = inverse_dwt(&p, &spec).unwrap();
            for (a, b) in x.iter().zip(y.samples()) {
                round_trip = round_trip.max((a - b).abs() / scale);
            }
        }
        let j0 = t % h;
        let haar = WaveletSpec::haar();
        let mut p = forward_dwt_slice(&x, &haar, j0).unwrap();
        for j in j0 + 1..h {
            p.level_mut(j).iter_mut().for_each(|d| *d = 0.0);
        }
        let a = inverse_dwt(&p, &haar).unwrap();
        let b = haar_block_mean(&Signal::new(x.clone()).unwrap(), j0).unwrap();
        for (u, v) in a.samples().iter().zip(b.samples()) {
            block_mean = block_mean.max((u - v).abs());
        }
    }
    let (closure_cases, closure_bad) = block_closure();
    let pass = parseval <= A7_PARSEVAL_TOL
        && round_trip <= A7_ROUND_TRIP_TOL
        && block_mean <= A7_BLOCK_MEAN_TOL
        && closure_bad == 0;
    outcome(
        pass,
        format!(
            "parseval {parseval:.1e}, round trip {round_trip:.1e}, block mean {block_mean:.1e}, \
             mask mismatches {closure_bad} of {closure_cases}"
        ),
    )
}

/// Every set of large coefficients (all subsets for h <= 3, all pairs up to
/// h = 6): the mask equals the brute-force "large or above a large one" set,
/// and for J = 0 it is closed under taking ancestors.
fn block_closure() -> (usize, usize) {
    let mut rng = TestRng::new(7);
    let (mut cases, mut bad) = (0, 0);
    for h in 1..=6usize {
        let positions: Vec<(usize, usize)> = (0..h).flat_map(|j| (0..1usize << j).map(move |k| (j, k))).collect();
        let mut sets: Vec<Vec<usize>> = Vec::new();
        if positions.len() <= 7 {
            for bits in 0u32..(1 << positions.len()) {
                sets.push((0..positions.len()).filter(|i| bits >> i & 1 == 1).collect());
            }
        } else {
            for a in 0..positions.len() {
                sets.push(vec![a]);
                for b in a + 1..positions.len() {
                    sets.push(vec![a, b]);
                }
            }
        }
        for set in &sets {
            for width in 0..=2usize {
                let mut p = CoeffPyramid::zeros(0, h).unwrap();
                p.iter_mut().for_each(|x| *x = 0.5 * rng.sym());
                for &i in set {
                    let (j, k) = positions[i];
                    p.level_mut(j)[k] = if rng.sym() > 0.0 { 2.0 } else { -2.0 };
                }
                let (est, mask) = vertical_block_estimate(&p, &BlockConfig::new(width, 1.0).unwrap());
                cases += 1;
                let mut ok = true;
                for &(j, k) in &positions {
                    let want = set.iter().any(|&i| {
                        let (bj, bk) = positions[i];
                        above(j, k, bj, bk, width)
                    });
                    ok &= mask.is_kept(j, k) == want;
                    ok &= est.level(j)[k] == if want { p.level(j)[k] } else { 0.0 };
                    if width == 0 && mask.is_kept(j, k) {
                        ok &= (0..j).all(|jp| mask.is_kept(jp, k >> (j - jp)));
                    }
                }
                if !ok {
                    bad += 1;
                }
            }
        }
    }
    (cases, bad)
}

fn a8() -> Outcome {
    let mut quad_err = 0.0f64;
    for i in 0..50 {
        for k in 0..50 {
            let lambda = i as f64 * 8.0 / 49.0;
            let theta = -6.0 + k as f64 * 12.0 / 49.0;
            quad_err = quad_err.max((gaussian_soft_risk(lambda, theta) - soft_risk_quadrature(lambda, theta)).abs());
        }
    }
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.05).collect();
    let (mut floor_bad, mut a10_bad, mut a11_bad, mut mono_bad) = (0, 0, 0, 0);
    for &l in &grid {
        for &t in grid.iter().filter(|&&t| t <= l) {
            if gaussian_soft_risk(l, t) < t * t / 2.0 {
                floor_bad += 1;
            }
        }
        for &t in &grid {
            for t in [t, -t] {
                let rhs = t * t * (cdf(l - t) - cdf(-l - t))
                    + (gaussian_soft_risk(l, 0.0) + gaussian_soft_risk(l + t.abs(), 0.0)) / 2.0;
                if gaussian_soft_risk(l, t) < rhs - 1e-15 {
                    a10_bad += 1;
                }
            }
        }
        if l >= 1.0 {
            let rhs = (-(l + 1.0).powi(2) / 2.0).exp() / ((2.0 * std::f64::consts::PI).sqrt() * (l + 1.0));
            if gaussian_soft_risk(l, 0.0) < rhs {
                a11_bad += 1;
            }
        }
    }
    for n in [16.0f64, 64.0, 256.0, 1024.0, 4096.0] {
        let target = 1.0 / (n * n);
        let (mut lo, mut hi) = (0.0f64, 20.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gaussian_soft_risk(mid, 0.0) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let ln = hi;
        for i in 1..=40 {
            let l = ln + i as f64 * 0.1;
            for &t in &grid {
                if gaussian_soft_risk(ln, t) > gaussian_soft_risk(l, t) + target * (1.0 + 1e-9) {
                    mono_bad += 1;
                }
            }
        }
    }
    let pass = quad_err <= A8_QUADRATURE_TOL && floor_bad + a10_bad + a11_bad + mono_bad == 0;
    outcome(
        pass,
        format!(
            "quadrature error {quad_err:.1e} on 50x50; violations: floor {floor_bad}, \
             mixture {a10_bad}, tail {a11_bad}, monotone step {mono_bad}"
        ),
    )
}

fn a9() -> Outcome {
    match verify_bounds(A9_REPS, 1) {
        Ok(rows) => {
            let failed: Vec<&str> = rows.iter().filter(|o| !o.pass).map(|o| o.name.as_str()).collect();
            outcome(
                failed.is_empty(),
                format!("{} checks at {A9_REPS} reps; failed: [{}]", rows.len(), failed.join(", ")),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn smoke_csv(threads: usize) -> String {
    let mut cfg = load("smoke.toml");
    cfg.reps = A10_REPS;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let report: RiskReport = pool.install(|| run_experiment(&cfg, &mut |_| {})).unwrap();
    report.to_csv().unwrap()
}

fn a10() -> Outcome {
    let first = smoke_csv(4);
    let again = smoke_csv(4);
    let serial = smoke_csv(1);
    let bounds = |t: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap();
        pool.install(|| verify_bounds(20_000, 5).unwrap()).iter().map(|o| o.csv_line()).collect::<Vec<_>>()
    };
    let pass = first == again && first == serial && bounds(4) == bounds(1);
    outcome(pass, format!("experiment CSV ({} bytes) and bound CSV identical across reruns and thread counts", first.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("A1", a1),
        ("A2", a2),
        ("A3", a3),
        ("A4", a4),
        ("A5", a5),
        ("A6", a6),
        ("A7", a7),
        ("A8", a8),
        ("A9", a9),
        ("A10", a10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == name) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        failures += usize::from(!o.pass);
        println!(
            "{name:<4} {} {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
