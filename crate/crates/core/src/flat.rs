//! How much the flat prior inflates magnitude and overstates sign evidence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{folded_normal_mean, std_normal_ln_pdf};
use crate::posterior::Estimate;
use crate::quadrature::{integrate, QuadratureConfig};

/// E(|β| | B = b) under the flat prior: the folded-normal mean at (b, se).
pub fn flat_abs_posterior_mean(est: &Estimate) -> f64 {
    folded_normal_mean(est.b(), est.se()).expect("Estimate guarantees se > 0")
}

/// Bias E_β|B| − |β| of |B| as an estimator of |β|.
pub fn abs_estimator_bias(beta: f64, se: f64) -> Result<f64> {
    let m = folded_normal_mean(beta, se)?;
    Ok((m - beta.abs()).max(0.0))
}

/// A unimodal prior density symmetric about zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SymmetricPrior {
    /// N(0, scale²)
    Normal { scale: f64 },
    /// Laplace with density exp(−|x|/scale) / (2·scale)
    Laplace { scale: f64 },
    /// Uniform on [−scale, scale]
    Uniform { scale: f64 },
}

impl SymmetricPrior {
    pub fn scale(&self) -> f64 {
        match *self {
            SymmetricPrior::Normal { scale }
            | SymmetricPrior::Laplace { scale }
            | SymmetricPrior::Uniform { scale } => scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.scale();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::domain(format!("prior scale must be positive and finite, got {s}")));
        }
        Ok(())
    }

    pub fn density(&self, x: f64) -> f64 {
        match *self {
            SymmetricPrior::Normal { scale } => (std_normal_ln_pdf(x / scale)).exp() / scale,
            SymmetricPrior::Laplace { scale } => (-x.abs() / scale).exp() / (2.0 * scale),
            SymmetricPrior::Uniform { scale } => {
                if x.abs() <= scale {
                    0.5 / scale
                } else {
                    0.0
                }
            }
        }
    }

    /// Points where the density is not smooth.
    fn kinks(&self) -> Vec<f64> {
        match *self {
            SymmetricPrior::Normal { .. } => vec![],
            SymmetricPrior::Laplace { .. } => vec![0.0],
            SymmetricPrior::Uniform { scale } => vec![-scale, scale],
        }
    }

    /// Checks symmetry and that the density is nonincreasing on [0, ∞),
    /// on a grid reaching `reach` either side of zero.
    pub fn check_shape(&self, reach: f64, points: usize) -> bool {
        let step = reach / points as f64;
        let mut previous = f64::INFINITY;
        for i in 0..=points {
            let x = step * i as f64;
            let d = self.density(x);
            if d != self.density(-x) || d > previous {
                return false;
            }
            previous = d;
        }
        true
    }
}

/// P(sgn β = sgn B | B = b) when β has prior `prior` and B | β ~ N(β, se²),
/// by adaptive quadrature of the unnormalized posterior.
pub fn sign_agreement_under_prior(prior: &SymmetricPrior, est: &Estimate) -> Result<f64> {
    prior.validate()?;
    let (b, se) = (est.b(), est.se());
    if b == 0.0 {
        return Err(Error::domain("sign agreement is undefined at b = 0"));
    }
    let cfg = QuadratureConfig { abs_tol: 1e-13, rel_tol: 1e-12, ..Default::default() };
    let reach = b.abs() + 12.0 * se * (1.0 + prior.scale() / se);

    // The likelihood kernel is scaled to 1 at its peak so that the integrals
    // are of order prior density × se regardless of b.
    let integrand = |beta: f64| {
        let u = (b - beta) / se;
        prior.density(beta) * (-0.5 * u * u).exp()
    };
    let mut breaks = prior.kinks();
    breaks.extend([b, b - 12.0 * se, b + 12.0 * se]);

    let positive = integrate(integrand, 0.0, reach, &breaks, &cfg)?.value;
    let negative = integrate(integrand, -reach, 0.0, &breaks, &cfg)?.value;
    let total = positive + negative;
    if !(total > 0.0) {
        return Err(Error::Numerical(format!(
            "posterior under {prior:?} has no mass near b = {b}"
        )));
    }
    let agree = if b > 0.0 { positive } else { negative };
    Ok(agree / total)
}
