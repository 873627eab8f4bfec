//! Jeffreys prior for the magnitude θ = |β| when the sign of β carries a
//! Bernoulli(1/2) prior, so that B | θ is the two-component mixture
//! f(b | θ) = [φ((b+θ)/se) + φ((b−θ)/se)] / (2 se).
//!
//! The Fisher information has no closed form; it is integrated numerically.
//! The resulting prior √I(θ) is improper and is reported unnormalized.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::std_normal_ln_pdf;
use crate::quadrature::{integrate, QuadratureConfig};

/// Half-width of the b-range, in standard errors beyond θ, over which the
/// information integral is taken.
const REACH_IN_SE: f64 = 12.0;

fn check(theta: f64, se: f64) -> Result<()> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::domain(format!("theta must be finite and nonnegative, got {theta}")));
    }
    if !(se > 0.0) || !se.is_finite() {
        return Err(Error::domain(format!("se must be positive and finite, got {se}")));
    }
    Ok(())
}

/// Mixture density f(b | θ).
pub fn mixture_density(b: f64, theta: f64, se: f64) -> Result<f64> {
    check(theta, se)?;
    Ok(mixture_density_unchecked(b, theta, se))
}

fn mixture_density_unchecked(b: f64, theta: f64, se: f64) -> f64 {
    let lp = std_normal_ln_pdf((b + theta) / se);
    let lm = std_normal_ln_pdf((b - theta) / se);
    let hi = lp.max(lm);
    // log-sum-exp keeps the larger component exact when the other underflows
    let log_f = hi + ((lp - hi).exp() + (lm - hi).exp()).ln() - (2.0 * se).ln();
    log_f.exp()
}

/// ∂/∂θ log f(b | θ).
///
/// The mixture weight of the (b+θ) component is 1/(1 + e^{2bθ/se²}), which
/// collapses the score to (b·tanh(bθ/se²) − θ)/se².
pub fn score_theta(b: f64, theta: f64, se: f64) -> Result<f64> {
    check(theta, se)?;
    Ok(score_unchecked(b, theta, se))
}

fn score_unchecked(b: f64, theta: f64, se: f64) -> f64 {
    let v = se * se;
    (b * (b * theta / v).tanh() - theta) / v
}

/// I(θ) = E_θ[(∂/∂θ log f(B | θ))²].
///
/// The integrand is even in b, so only [0, θ + 12 se] is integrated.
pub fn fisher_information(theta: f64, se: f64, quad: &QuadratureConfig) -> Result<f64> {
    check(theta, se)?;
    if theta == 0.0 {
        return Ok(0.0);
    }
    let upper = theta + REACH_IN_SE * se;
    let integrand = |b: f64| {
        let s = score_unchecked(b, theta, se);
        s * s * mixture_density_unchecked(b, theta, se)
    };
    let half = integrate(integrand, 0.0, upper, &[theta], quad).map_err(|e| match e {
        Error::Numerical(msg) => Error::Numerical(format!("fisher information at theta={theta}, se={se}: {msg}")),
        other => other,
    })?;
    Ok(2.0 * half.value)
}

/// Quadrature settings used for Jeffreys curves.
pub fn curve_quadrature() -> QuadratureConfig {
    QuadratureConfig { abs_tol: 1e-13, rel_tol: 1e-13, initial_panels: 4, max_subdivisions: 4000 }
}

/// Unnormalized Jeffreys prior √I(θ) on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JeffreysCurve {
    pub se: f64,
    pub theta_grid: Vec<f64>,
    pub density_values: Vec<f64>,
}

impl JeffreysCurve {
    /// Whether the curve is nondecreasing within `slack`.
    pub fn is_nondecreasing(&self, slack: f64) -> bool {
        self.density_values.windows(2).all(|w| w[1] >= w[0] - slack)
    }
}

/// √I(θ) on `n_points` equally spaced θ in [0, theta_max]. Grid points are
/// evaluated in parallel; each is independent so the result does not depend
/// on scheduling.
pub fn jeffreys_curve(se: f64, theta_max: f64, n_points: usize) -> Result<JeffreysCurve> {
    if !(theta_max > 0.0) || !theta_max.is_finite() {
        return Err(Error::domain(format!("theta_max must be positive, got {theta_max}")));
    }
    if n_points < 2 {
        return Err(Error::domain(format!("a curve needs at least 2 points, got {n_points}")));
    }
    check(0.0, se)?;
    let step = theta_max / (n_points - 1) as f64;
    let theta_grid: Vec<f64> = (0..n_points)
        .map(|i| if i + 1 == n_points { theta_max } else { step * i as f64 })
        .collect();
    let quad = curve_quadrature();
    let density_values = theta_grid
        .par_iter()
        .map(|&t| fisher_information(t, se, &quad).map(f64::sqrt))
        .collect::<Result<Vec<_>>>()?;
    Ok(JeffreysCurve { se, theta_grid, density_values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::std_normal_pdf;

    #[test]
    fn mixture_at_zero_theta_is_normal() {
        for b in [-2.0, 0.0, 0.7, 3.0] {
            let f = mixture_density(b, 0.0, 1.5).unwrap();
            assert!((f - std_normal_pdf(b / 1.5) / 1.5).abs() < 1e-16);
        }
    }

    #[test]
    fn mixture_is_even_and_normalized() {
        let cfg = QuadratureConfig { abs_tol: 1e-12, ..Default::default() };
        for theta in [0.0, 1.0, 5.0] {
            assert_eq!(mixture_density(1.3, theta, 1.0).unwrap(), mixture_density(-1.3, theta, 1.0).unwrap());
            let mass = integrate(
                |b| mixture_density(b, theta, 1.0).unwrap(),
                -theta - 40.0,
                theta + 40.0,
                &[-theta, theta],
                &cfg,
            )
            .unwrap()
            .value;
            assert!((mass - 1.0).abs() < 1e-8, "theta = {theta}");
        }
    }

    #[test]
    fn score_cases() {
        for b in [-3.0, 0.0, 2.2] {
            assert_eq!(score_theta(b, 0.0, 1.0).unwrap(), 0.0);
            assert_eq!(score_theta(b, 1.4, 0.8).unwrap(), score_theta(-b, 1.4, 0.8).unwrap());
        }
        // tanh(1) − 1, checked against mpmath
        assert!((score_theta(1.0, 1.0, 1.0).unwrap() + 0.238_405_844_044_235_1).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(mixture_density(0.0, -1.0, 1.0).is_err());
        assert!(score_theta(0.0, 1.0, 0.0).is_err());
        assert!(fisher_information(f64::NAN, 1.0, &QuadratureConfig::default()).is_err());
        assert!(jeffreys_curve(1.0, 5.0, 1).is_err());
        assert!(jeffreys_curve(1.0, 0.0, 10).is_err());
        assert!(jeffreys_curve(-1.0, 5.0, 10).is_err());
    }

    #[test]
    fn information_matches_high_precision_values() {
        // mpmath quadrature at 50 digits
        let cases = [
            (0.5, 1.0, 0.343_263_952_972_340_85),
            (1.0, 1.0, 0.733_911_672_395_443_3),
            (2.0, 1.0, 0.978_344_517_544_967_5),
            (3.0, 1.0, 0.999_223_965_719_395_6),
            (1.0, 0.5, 3.913_378_070_179_870_4),
            (2.0, 2.0, 0.183_477_918_098_860_8),
        ];
        let q = curve_quadrature();
        for (theta, se, want) in cases {
            let got = fisher_information(theta, se, &q).unwrap();
            assert!((got - want).abs() < 1e-11, "I({theta}; se={se}) = {got}, want {want}");
        }
    }

    #[test]
    fn curve_starts_at_zero_and_has_grid_endpoints() {
        let c = jeffreys_curve(1.0, 6.0, 201).unwrap();
        assert_eq!(c.theta_grid.len(), 201);
        assert_eq!(c.density_values[0], 0.0);
        assert_eq!(*c.theta_grid.last().unwrap(), 6.0);
        assert!(c.theta_grid.windows(2).all(|w| w[0] < w[1]));
        assert!(c.is_nondecreasing(0.0));
    }
}
