//! Orthonormal discrete wavelet transforms on dyadic signals.
//!
//! Both filters use periodic extension, so every level of the pyramid is an
//! orthonormal change of basis and Parseval holds exactly (up to round-off).
//! With Haar filters the detail coefficient `d_{j,k}` is
//! `2^{-(h-j)/2}` times the sum of the first half of the dyadic block
//! `[k 2^{h-j}, (k+1) 2^{h-j})` minus the sum of its second half.

use crate::error::{invalid, Error, Result};

/// A dyadic-length sample vector with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
}

impl Signal {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        let n = samples.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::NotDyadic(n));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `h` with `n = 2^h`.
    pub fn depth(&self) -> usize {
        self.samples.len().trailing_zeros() as usize
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

impl AsRef<[f64]> for Signal {
    fn as_ref(&self) -> &[f64] {
        &self.samples
    }
}

/// Scaling coefficients at level `j0` and detail coefficients for every level
/// `j0 <= j <= h - 1`; level `j` holds `2^j` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffPyramid {
    j0: usize,
    scaling: Vec<f64>,
    details: Vec<Vec<f64>>,
}

impl CoeffPyramid {
    pub fn new(j0: usize, scaling: Vec<f64>, details: Vec<Vec<f64>>) -> Result<Self> {
        if details.is_empty() {
            return Err(Error::Shape("pyramid needs at least one detail level".into()));
        }
        if scaling.len() != 1 << j0 {
            return Err(Error::Shape(format!(
                "scaling vector has {} entries, expected 2^{j0}",
                scaling.len()
            )));
        }
        for (i, d) in details.iter().enumerate() {
            if d.len() != 1 << (j0 + i) {
                return Err(Error::Shape(format!(
                    "level {} has {} entries, expected {}",
                    j0 + i,
                    d.len(),
                    1usize << (j0 + i)
                )));
            }
        }
        Ok(Self { j0, scaling, details })
    }

    /// All-zero pyramid for a signal of depth `h`.
    pub fn zeros(j0: usize, h: usize) -> Result<Self> {
        if j0 >= h {
            return Err(Error::LevelOutOfRange { level: j0, min: 0, max: h.saturating_sub(1) });
        }
        let details = (j0..h).map(|j| vec![0.0; 1 << j]).collect();
        Self::new(j0, vec![0.0; 1 << j0], details)
    }

    pub fn j0(&self) -> usize {
        self.j0
    }

    /// Total depth `h`; the finest detail level is `h - 1`.
    pub fn depth(&self) -> usize {
        self.j0 + self.details.len()
    }

    /// Number of coefficients, equal to the signal length.
    pub fn len(&self) -> usize {
        1 << self.depth()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn scaling(&self) -> &[f64] {
        &self.scaling
    }

    pub fn scaling_mut(&mut self) -> &mut [f64] {
        &mut self.scaling
    }

    pub fn levels(&self) -> std::ops::Range<usize> {
        self.j0..self.depth()
    }

    /// Detail coefficients of level `j`.
    ///
    /// Panics if `j` is outside [`CoeffPyramid::levels`].
    pub fn level(&self, j: usize) -> &[f64] {
        &self.details[j - self.j0]
    }

    pub fn level_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.details[j - self.j0]
    }

    pub fn details(&self) -> &[Vec<f64>] {
        &self.details
    }

    /// Scaling coefficients followed by detail levels, coarse to fine.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.scaling.iter().chain(self.details.iter().flatten()).copied()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.scaling.iter_mut().chain(self.details.iter_mut().flatten())
    }

    pub fn norm_sq(&self) -> f64 {
        self.iter().map(|x| x * x).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.iter_mut().for_each(|x| *x *= factor);
        out
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.j0 == other.j0 && self.details.len() == other.details.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveletKind {
    Haar,
    Daubechies4,
}

impl std::str::FromStr for WaveletKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "haar" => Ok(WaveletKind::Haar),
            "d4" | "db2" | "daubechies4" => Ok(WaveletKind::Daubechies4),
            other => Err(Error::Config(format!("unknown wavelet `{other}`"))),
        }
    }
}

/// Filter pair of an orthonormal compactly supported wavelet.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletSpec {
    pub kind: WaveletKind,
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
    /// Hölder exponent of the mother wavelet. Haar is booked as 1.
    pub holder_index: f64,
}

impl WaveletSpec {
    pub fn haar() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_lowpass(WaveletKind::Haar, vec![r, r], 1.0)
    }

    pub fn daubechies4() -> Self {
        let s3 = 3f64.sqrt();
        let norm = 4.0 * std::f64::consts::SQRT_2;
        let taps = vec![(1.0 + s3) / norm, (3.0 + s3) / norm, (3.0 - s3) / norm, (1.0 - s3) / norm];
        Self::from_lowpass(WaveletKind::Daubechies4, taps, 0.5500)
    }

    pub fn from_kind(kind: WaveletKind) -> Self {
        match kind {
            WaveletKind::Haar => Self::haar(),
            WaveletKind::Daubechies4 => Self::daubechies4(),
        }
    }

    /// Quadrature mirror: `g_i = (-1)^i h_{N-1-i}`.
    fn from_lowpass(kind: WaveletKind, lowpass: Vec<f64>, holder_index: f64) -> Self {
        let n = lowpass.len();
        let highpass = (0..n)
            .map(|i| if i % 2 == 0 { lowpass[n - 1 - i] } else { -lowpass[n - 1 - i] })
            .collect();
        Self { kind, lowpass, highpass, holder_index }
    }

    pub fn taps(&self) -> usize {
        self.lowpass.len()
    }
}

/// One analysis step: `approx[k] = Σ h_i x[2k+i]`, `detail[k] = Σ g_i x[2k+i]` (periodic).
fn analysis_step(x: &[f64], spec: &WaveletSpec, approx: &mut Vec<f64>, detail: &mut Vec<f64>) {
    let len = x.len();
    let half = len / 2;
    approx.clear();
    detail.clear();
    for k in 0..half {
        let mut a = 0.0;
        let mut d = 0.0;
        for (i, (&h, &g)) in spec.lowpass.iter().zip(&spec.highpass).enumerate() {
            let v = x[(2 * k + i) % len];
            a += h * v;
            d += g * v;
        }
        approx.push(a);
        detail.push(d);
    }
}

/// Adjoint of [`analysis_step`].
fn synthesis_step(approx: &[f64], detail: &[f64], spec: &WaveletSpec, out: &mut Vec<f64>) {
    let len = approx.len() * 2;
    out.clear();
    out.resize(len, 0.0);
    for (k, (&a, &d)) in approx.iter().zip(detail).enumerate() {
        for (i, (&h, &g)) in spec.lowpass.iter().zip(&spec.highpass).enumerate() {
            out[(2 * k + i) % len] += h * a + g * d;
        }
    }
}

/// Decomposes `signal` down to scaling level `j0`.
pub fn forward_dwt(signal: &Signal, spec: &WaveletSpec, j0: usize) -> Result<CoeffPyramid> {
    forward_dwt_slice(signal.samples(), spec, j0)
}

/// [`forward_dwt`] on a raw slice; the length must be a power of two.
pub fn forward_dwt_slice(samples: &[f64], spec: &WaveletSpec, j0: usize) -> Result<CoeffPyramid> {
    let n = samples.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::NotDyadic(n));
    }
    let h = n.trailing_zeros() as usize;
    if j0 >= h {
        return Err(Error::LevelOutOfRange { level: j0, min: 0, max: h - 1 });
    }
    let mut current = samples.to_vec();
    let mut approx = Vec::with_capacity(n / 2);
    let mut details = Vec::with_capacity(h - j0);
    for _ in j0..h {
        let mut detail = Vec::with_capacity(current.len() / 2);
        analysis_step(&current, spec, &mut approx, &mut detail);
        details.push(detail);
        std::mem::swap(&mut current, &mut approx);
    }
    details.reverse();
    Ok(CoeffPyramid { j0, scaling: current, details })
}

pub fn inverse_dwt(pyramid: &CoeffPyramid, spec: &WaveletSpec) -> Result<Signal> {
    let mut current = pyramid.scaling.clone();
    let mut next = Vec::with_capacity(pyramid.len());
    for detail in &pyramid.details {
        if detail.len() != current.len() {
            return Err(Error::Shape("detail level does not match approximation".into()));
        }
        synthesis_step(&current, detail, spec, &mut next);
        std::mem::swap(&mut current, &mut next);
    }
    Signal::new(current)
}

/// Cascaded filters at `depth = j0 - j`: a level-`j` scaling function
/// (resp. wavelet) written in level-`j0` scaling coordinates,
/// `φ_{j,k} = Σ_i u[i] φ_{j0, 2^depth k + i}` and likewise with `v` for `ψ_{j,k}`.
///
/// Support length is `(2^depth - 1)(N - 1) + 1`.
pub fn cascade_filters(spec: &WaveletSpec, depth: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if depth < 1 {
        return Err(invalid("cascade depth must be >= 1"));
    }
    let mut u = spec.lowpass.clone();
    let mut v = spec.highpass.clone();
    for _ in 1..depth {
        u = upsample_convolve(&u, &spec.lowpass);
        v = upsample_convolve(&v, &spec.lowpass);
    }
    Ok((u, v))
}

/// `out[i] = Σ_m coarse[m] taps[i - 2m]`.
fn upsample_convolve(coarse: &[f64], taps: &[f64]) -> Vec<f64> {
    let len = 2 * (coarse.len() - 1) + taps.len();
    let mut out = vec![0.0; len];
    for (m, &c) in coarse.iter().enumerate() {
        for (t, &h) in taps.iter().enumerate() {
            out[2 * m + t] += c * h;
        }
    }
    out
}
