//! Test-only oracles: adaptive Gauss–Kronrod quadrature and helpers.
#![allow(dead_code)]

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive 7/15-point Gauss–Kronrod on `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = kronrod(f, a, b);
        if err <= tol || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, tol / 2.0, depth - 1) + rec(f, m, b, tol / 2.0, depth - 1)
    }
    rec(&f, a, b, tol, 40)
}

pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `∫ g(x) φ(x) dx` over the real line, split at `breaks`, truncated at ±40.
pub fn gaussian_expectation<F: Fn(f64) -> f64>(g: F, breaks: &[f64], tol: f64) -> f64 {
    let mut pts = vec![-40.0];
    let mut b: Vec<f64> = breaks.iter().copied().filter(|x| x.abs() < 40.0).collect();
    b.sort_by(f64::total_cmp);
    pts.extend(b);
    pts.push(40.0);
    pts.windows(2).map(|w| integrate(|x| g(x) * phi(x), w[0], w[1], tol)).sum()
}

/// Soft-threshold risk `E (T_λ(θ + Z) - θ)²` by quadrature.
pub fn soft_risk_quadrature(lambda: f64, theta: f64) -> f64 {
    let t = |x: f64| {
        let y = theta + x;
        let s = (y.abs() - lambda).max(0.0).copysign(y);
        (s - theta).powi(2)
    };
    gaussian_expectation(t, &[-lambda - theta, lambda - theta], 1e-13)
}

/// `E 1{|Z| > t}(1 + Z²)` by quadrature.
pub fn tail_weight_quadrature(t: f64) -> f64 {
    2.0 * integrate(|x| (1.0 + x * x) * phi(x), t, 40.0_f64.max(t + 40.0), 1e-16)
}

/// Small deterministic generator for test inputs (xorshift64*).
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1)
    }

    pub fn next_f64(&mut self) -> f64 {
        self.0 ^= self.0 >> 12;
        self.0 ^= self.0 << 25;
        self.0 ^= self.0 >> 27;
        (self.0.wrapping_mul(0x2545_F491_4F6C_DD1D) >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform on `[-1, 1)`.
    pub fn sym(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }

    pub fn vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sym()).collect()
    }
}
