use default_prior::jeffreys::{curve_quadrature, fisher_information, jeffreys_curve, mixture_density, score_theta};
use default_prior::quadrature::{integrate, QuadratureConfig};

#[test]
fn information_matches_high_precision_values() {
    // mpmath, 30 digits
    let cases = [
        (0.5, 1.0, 0.343_263_952_972_340_85),
        (1.0, 1.0, 0.733_911_672_395_443_3),
        (2.0, 1.0, 0.978_344_517_544_967_5),
        (1.0, 0.5, 3.913_378_070_179_870_4),
        (2.0, 2.0, 0.183_477_918_098_860_8),
    ];
    let quad = curve_quadrature();
    for (theta, se, want) in cases {
        let got = fisher_information(theta, se, &quad).unwrap();
        assert!((got - want).abs() < 1e-11, "I({theta}; {se}) = {got}");
    }
}

#[test]
fn doubling_initial_panels_changes_little() {
    let quad = curve_quadrature();
    for theta in [0.01, 0.3, 1.0, 2.2, 5.0, 15.0] {
        let a = fisher_information(theta, 1.0, &quad).unwrap();
        let b = fisher_information(theta, 1.0, &quad.doubled()).unwrap();
        assert!((a - b).abs() < 1e-8, "theta = {theta}: {a} vs {b}");
    }
}

#[test]
fn mixture_integrates_to_one() {
    let cfg = QuadratureConfig::default();
    for (theta, se) in [(0.0, 1.0), (1.5, 0.4), (6.0, 2.0)] {
        let reach = theta + 15.0 * se;
        let total = integrate(|b| mixture_density(b, theta, se).unwrap(), -reach, reach, &[-theta, theta], &cfg)
            .unwrap()
            .value;
        assert!((total - 1.0).abs() < 1e-10);
    }
}

#[test]
fn score_has_zero_mean() {
    let cfg = QuadratureConfig::default();
    for theta in [0.2, 1.0, 3.0] {
        let reach = theta + 15.0;
        let m = integrate(
            |b| score_theta(b, theta, 1.0).unwrap() * mixture_density(b, theta, 1.0).unwrap(),
            -reach,
            reach,
            &[-theta, theta],
            &cfg,
        )
        .unwrap()
        .value;
        assert!(m.abs() < 1e-10, "theta = {theta}: {m}");
    }
}

#[test]
fn information_is_quadratic_near_zero() {
    // score ≈ θ(b² − se²)/se⁴ for small θ, so I(θ)/θ² → 2/se⁴
    let quad = curve_quadrature();
    for se in [0.5, 1.0, 2.0] {
        let t = 1e-3 * se;
        let ratio = fisher_information(t, se, &quad).unwrap() / (t * t);
        assert!((ratio * se.powi(4) - 2.0).abs() < 1e-4, "se = {se}: {ratio}");
    }
}

#[test]
fn curves_rise_to_inverse_se() {
    for se in [0.5, 1.0, 2.0] {
        let c = jeffreys_curve(se, 20.0 * se, 81).unwrap();
        assert_eq!(c.density_values[0], 0.0);
        assert!(c.is_nondecreasing(1e-10));
        let last = *c.density_values.last().unwrap();
        assert!((last * se - 1.0).abs() < 1e-4);
    }
}

#[test]
fn smaller_se_curve_lies_above_on_shared_grid() {
    let a = jeffreys_curve(0.5, 4.0, 41).unwrap();
    let b = jeffreys_curve(1.0, 4.0, 41).unwrap();
    let c = jeffreys_curve(2.0, 4.0, 41).unwrap();
    for i in 1..41 {
        assert!(a.density_values[i] > b.density_values[i]);
        assert!(b.density_values[i] > c.density_values[i]);
    }
}

#[test]
fn curve_rejects_bad_arguments() {
    assert!(jeffreys_curve(0.0, 1.0, 10).is_err());
    assert!(jeffreys_curve(1.0, -1.0, 10).is_err());
    assert!(jeffreys_curve(1.0, 1.0, 1).is_err());
    assert!(fisher_information(-0.1, 1.0, &curve_quadrature()).is_err());
}
