//! Normal and Gamma distribution functions shared by every other module.
//!
//! `ln_gamma` comes from `statrs`. Φ is built on an fdlibm-derived `erfc`;
//! Φ⁻¹, the folded-normal mean and the mean-parameterized Gamma density are
//! built on top of those.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::special::erfc;

/// 1/√(2π)
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// √(2/π), the folded-normal mean of |N(0, 1)|.
pub const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

/// Standard normal density φ(x).
pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Log of the standard normal density.
pub fn std_normal_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * (2.0 * PI).ln()
}

/// Standard normal CDF Φ(x), accepting ±∞.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail 1 − Φ(x) without cancellation.
pub fn std_normal_sf(x: f64) -> f64 {
    std_normal_cdf(-x)
}

// Wichura (1988), algorithm AS 241, PPND16.
const A: [f64; 8] = [
    3.387_132_872_796_366_608,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_577_34,
    4.630_337_846_156_545_295_9,
    5.769_497_221_460_691_405_5,
    3.647_848_324_763_204_605_04,
    1.270_458_252_452_368_382_58,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87,
    1.676_384_830_183_803_849_4,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103_777_2,
    5.463_784_911_164_114_369_9,
    1.784_826_539_917_291_335_8,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

fn rational(num: &[f64; 8], den: &[f64; 8], x: f64) -> f64 {
    let p = num.iter().rev().fold(0.0, |acc, c| acc * x + c);
    let q = den.iter().rev().fold(0.0, |acc, c| acc * x + c);
    p / q
}

fn as241(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * rational(&A, &B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        rational(&C, &D, r)
    } else {
        r -= 5.0;
        rational(&E, &F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Inverse standard normal CDF Φ⁻¹(p) for p ∈ (0, 1).
///
/// Rational initial guess followed by one Newton step against
/// [`std_normal_cdf`]. For p > 1/2 the step is taken on the upper tail,
/// where 1 − p is exact.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("quantile requires p in (0, 1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let x = as241(p);
    let density = std_normal_pdf(x);
    if density == 0.0 {
        return Ok(x);
    }
    let refined = if p < 0.5 {
        x - (std_normal_cdf(x) - p) / density
    } else {
        x + (std_normal_sf(x) - (1.0 - p)) / density
    };
    Ok(refined)
}

/// Mean of |X| for X ~ N(mu, sd²).
pub fn folded_normal_mean(mu: f64, sd: f64) -> Result<f64> {
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::domain(format!("folded normal requires sd > 0, got {sd}")));
    }
    if !mu.is_finite() {
        return Err(Error::domain(format!("folded normal requires finite mu, got {mu}")));
    }
    let m = mu.abs();
    let z = m / sd;
    Ok(m + SQRT_2_OVER_PI * sd * (-0.5 * z * z).exp() - 2.0 * m * std_normal_cdf(-z))
}

/// Log density at `x` of the Gamma distribution with the given shape and
/// mean (scale = mean / shape).
pub fn gamma_log_density(x: f64, shape: f64, mean: f64) -> Result<f64> {
    if !(x > 0.0 && shape > 0.0 && mean > 0.0) {
        return Err(Error::domain(format!(
            "gamma density requires x, shape, mean > 0, got ({x}, {shape}, {mean})"
        )));
    }
    Ok(gamma_log_density_unchecked(x, shape, mean))
}

pub(crate) fn gamma_log_density_unchecked(x: f64, shape: f64, mean: f64) -> f64 {
    let scale = mean / shape;
    -ln_gamma(shape) - shape * scale.ln() + (shape - 1.0) * x.ln() - x / scale
}

/// Two-sided p-value 2Φ(−|z|).
pub fn two_sided_p(z: f64) -> f64 {
    2.0 * std_normal_cdf(-z.abs())
}

/// |Φ⁻¹(p/2)| for a two-sided p-value.
pub fn abs_z_from_two_sided_p(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(format!("two-sided p must lie in (0, 1], got {p}")));
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    Ok(std_normal_quantile(p / 2.0)?.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pdf_values() {
        assert_eq!(std_normal_pdf(0.0), 0.3989422804014327);
        let v = std_normal_pdf(1.0);
        assert!((v - 0.24197072451914337).abs() / v < 1e-14);
        assert_eq!(std_normal_pdf(1.7), std_normal_pdf(-1.7));
    }

    #[test]
    fn cdf_values() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((std_normal_cdf(1.96) - 0.975_002_104_851_779_6).abs() < 1e-15);
        assert_eq!(std_normal_cdf(f64::INFINITY), 1.0);
        assert_eq!(std_normal_cdf(f64::NEG_INFINITY), 0.0);
        for x in [-7.5, -3.0, -0.3, 0.9, 4.0] {
            assert!((std_normal_cdf(x) + std_normal_cdf(-x) - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn quantile_values() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        let q = std_normal_quantile(0.975).unwrap();
        assert!((q - 1.959963984540054).abs() < 1e-12);
        assert!((std_normal_quantile(0.025).unwrap() + q).abs() < 1e-15);
        assert!(std_normal_quantile(0.0).is_err());
        assert!(std_normal_quantile(1.0).is_err());
        assert!(std_normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn quantile_inverts_cdf_in_tails() {
        for p in [1e-300, 1e-20, 1e-8, 0.001, 0.3, 0.7, 0.999, 1.0 - 1e-12] {
            let x = std_normal_quantile(p).unwrap();
            let back = if p < 0.5 {
                std_normal_cdf(x)
            } else {
                1.0 - std_normal_sf(x)
            };
            assert!((back - p).abs() <= 1e-12 * p.clamp(1e-300, 1.0), "p = {p}");
        }
    }

    #[test]
    fn folded_normal_limits() {
        assert!((folded_normal_mean(0.0, 1.0).unwrap() - 0.7978845608028654).abs() < 1e-15);
        assert!((folded_normal_mean(10.0, 1.0).unwrap() - 10.0).abs() < 1e-10);
        assert!(folded_normal_mean(1.0, 0.0).is_err());
        assert!(folded_normal_mean(1.0, -2.0).is_err());
    }

    #[test]
    fn gamma_density_rejects_nonpositive() {
        assert!(gamma_log_density(0.0, 0.5, 1.0).is_err());
        assert!(gamma_log_density(1.0, 0.0, 1.0).is_err());
        assert!(gamma_log_density(1.0, 0.5, -1.0).is_err());
    }

    #[test]
    fn gamma_half_shape_is_scaled_chi_square() {
        // density of Z² at x is φ(√x)/√x
        for x in [0.01f64, 0.3, 1.0, 2.5, 9.0, 30.0] {
            let chi = (std_normal_pdf(x.sqrt()) / x.sqrt()).ln();
            assert!((gamma_log_density(x, 0.5, 1.0).unwrap() - chi).abs() < 1e-13);
        }
        let v = gamma_log_density(1.0, 0.5, 1.0).unwrap();
        assert!((v - (-1.418_938_533_204_672_7)).abs() < 1e-14);
    }

    #[test]
    fn abs_z_conversion() {
        let z = abs_z_from_two_sided_p(0.05).unwrap();
        assert!((z - 1.959963984540054).abs() < 1e-12);
        assert_eq!(abs_z_from_two_sided_p(1.0).unwrap(), 0.0);
        assert!(abs_z_from_two_sided_p(0.0).is_err());
        assert!((two_sided_p(z) - 0.05).abs() < 1e-15);
    }
}
