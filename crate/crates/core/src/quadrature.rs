//! Numerical integration: globally adaptive Gauss–Kronrod (7/15) on finite
//! intervals, and Gauss–Hermite rules for Gaussian expectations.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Settings for adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Number of equal panels each breakpoint segment is split into before
    /// adaptive refinement starts.
    pub initial_panels: usize,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-12,
            initial_panels: 4,
            max_subdivisions: 4000,
        }
    }
}

impl QuadratureConfig {
    /// Same tolerances, twice as many starting panels.
    pub fn doubled(self) -> Self {
        Self {
            initial_panels: self.initial_panels * 2,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrate `f` over `[a, b]`. `breakpoints` inside the interval (kinks,
/// peaks, discontinuities) are honoured as panel boundaries.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain(format!("integration limits must be finite, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > lo && *x < hi)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();

    let n0 = cfg.initial_panels.max(1);
    let mut panels = Vec::with_capacity(cuts.len() * n0 * 2);
    for w in cuts.windows(2) {
        let step = (w[1] - w[0]) / n0 as f64;
        for k in 0..n0 {
            let pa = w[0] + step * k as f64;
            let pb = if k + 1 == n0 { w[1] } else { pa + step };
            panels.push(gk15(&f, pa, pb));
        }
    }
    let mut evaluations = panels.len() * 15;

    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.error).sum();
        let target = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if err <= target {
            return Ok(QuadResult { value: sign * total, abs_error: err, evaluations });
        }
        if panels.len() >= cfg.max_subdivisions {
            return Err(Error::Numerical(format!(
                "adaptive quadrature on [{lo}, {hi}] did not converge: \
                 estimate {total:e}, error {err:e} > target {target:e} after {} panels",
                panels.len()
            )));
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).unwrap())
            .unwrap();
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            return Err(Error::Numerical(format!(
                "adaptive quadrature reached machine resolution near {mid}"
            )));
        }
        panels.push(gk15(&f, p.a, mid));
        panels.push(gk15(&f, mid, p.b));
        evaluations += 30;
    }
}

const TWO_POW_M600: f64 = 2.409_919_865_102_884e-181;

/// Orthonormal Hermite values (h_n(x), h_{n−1}(x)), both multiplied by
/// 2^(−k), together with k.
fn hermite_pair(n: usize, x: f64) -> (f64, f64, i32) {
    let mut p1 = PI.powf(-0.25);
    let mut p2 = 0.0;
    let mut k = 0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = x * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
        if p1.abs() > 1e200 {
            p1 *= TWO_POW_M600;
            p2 *= TWO_POW_M600;
            k += 600;
        }
    }
    (p1, p2, k)
}

/// Root of h_n in the bracket (lo, hi) by Newton steps, falling back to
/// bisection whenever a step leaves the bracket.
fn refine_root(n: usize, mut lo: f64, mut hi: f64) -> f64 {
    let sign_lo = hermite_pair(n, lo).0.signum();
    let scale = (2.0 * n as f64).sqrt();
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (f, g, _) = hermite_pair(n, x);
        if f == 0.0 {
            return x;
        }
        if f.signum() == sign_lo {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - f / (scale * g);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) || hi - lo <= 4.0 * f64::EPSILON * hi {
            return next;
        }
        x = next;
    }
    x
}

/// Gauss–Hermite rule for weight exp(−x²): nodes ascending, weights summing
/// to √π. Exact for polynomials of degree ≤ 2n − 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Positive roots of the orthonormal Hermite polynomial are bracketed
    /// by a downward scan from √(2n+1), finer than the smallest gap between
    /// roots, and refined by safeguarded Newton; weights are 2/h_n'(x)².
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("Gauss-Hermite rule needs at least one node"));
        }
        let nf = n as f64;
        let half = n / 2;
        let step = 0.25 * PI / (2.0 * nf + 1.0).sqrt();
        let floor = if n % 2 == 1 { 0.5 * step } else { 0.0 };
        let mut positive = Vec::with_capacity(half);
        let mut hi = (2.0 * nf + 1.0).sqrt() + 1.0;
        let mut f_hi = hermite_pair(n, hi).0;
        while positive.len() < half && hi > floor {
            let lo = (hi - step).max(floor);
            let f_lo = hermite_pair(n, lo).0;
            if f_lo.signum() != f_hi.signum() {
                positive.push(refine_root(n, lo, hi));
            }
            hi = lo;
            f_hi = f_lo;
        }
        if positive.len() < half {
            return Err(Error::Numerical(format!(
                "Gauss-Hermite scan found {} of {half} positive roots for n = {n}",
                positive.len()
            )));
        }
        let mut roots: Vec<f64> = positive.iter().map(|x| -x).collect();
        if n % 2 == 1 {
            roots.push(0.0);
        }
        roots.extend(positive.iter().rev());
        let ln2 = 2f64.ln();
        let weights: Vec<f64> = roots
            .iter()
            .map(|&x| {
                let (_, g, k) = hermite_pair(n, x);
                let derivative = (2.0 * nf).sqrt() * g.abs();
                (ln2 - 2.0 * derivative.ln() - 2.0 * k as f64 * ln2).exp()
            })
            .collect();
        let distinct = roots.windows(2).all(|w| w[1] > w[0]);
        let total: f64 = weights.iter().sum();
        if !distinct || (total - PI.sqrt()).abs() > 1e-12 {
            return Err(Error::Numerical(format!("Gauss-Hermite rule with {n} nodes failed its self-check")));
        }
        Ok(Self { nodes: roots, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// E[g(X)] for X ~ N(mean, sd²).
    pub fn normal_expectation<F: Fn(f64) -> f64>(&self, mean: f64, sd: f64, g: F) -> f64 {
        let scale = std::f64::consts::SQRT_2 * sd;
        let sum: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * g(mean + scale * x))
            .sum();
        sum / PI.sqrt()
    }
}
