use ebspline::credible::{
    coverage_experiment, credible_ball, norm, radius, radius_rate, sample_posterior,
    CoverageConfig, PosteriorSampler, Quantiles, RadiusSpec,
};
use ebspline::ebcore::{fit, FitOptions, FitResult, ModelFamily, QGrid};
use ebspline::oracle::kappa;
use ebspline::rng::substream;
use ebspline::simlab::{Generator, NoiseModel};
use ebspline::spectral::{eigenvalues, smoother_weights, DesignGrid};
use ebspline::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{ChiSquared, StandardNormal};
use statrs::distribution::{ChiSquared as ChiSquaredLaw, ContinuousCDF};

fn f1_fit(n: usize, seed: u64) -> FitResult {
    let grid = DesignGrid::right(n).unwrap();
    let f = Generator::f1().generate(&grid).unwrap();
    let y = NoiseModel::default().observe(&f, &mut substream(seed, 0));
    let family = ModelFamily::analytic(grid);
    fit(
        &family,
        &y,
        &QGrid::default_integer(),
        &FitOptions::default(),
    )
    .unwrap()
}

/// Independent MC quantile of ZᵀSZ/N on a different generator.
fn mc_quantile(weights: &[f64], p: f64, draws: usize) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let chi = ChiSquared::new(weights.len() as f64).unwrap();
    let mut v: Vec<f64> = (0..draws)
        .map(|_| {
            let s: f64 = weights
                .iter()
                .map(|w| {
                    let z: f64 = rng.sample(StandardNormal);
                    w * z * z
                })
                .sum();
            s / rng.sample(chi)
        })
        .collect();
    v.sort_by(f64::total_cmp);
    v[(p * draws as f64) as usize]
}

#[test]
fn norm_is_root_mean_square() {
    assert!((norm(&[3.0; 10]) - 3.0).abs() < 1e-15);
    assert!((norm(&[3.0, 4.0]) - (12.5f64).sqrt()).abs() < 1e-15);
}

#[test]
fn radius_matches_independent_monte_carlo() {
    let n = 400;
    let e = eigenvalues(2.0, n).unwrap();
    let lambda = 1e-7;
    let w = smoother_weights(&e, lambda).unwrap();
    let oracle = mc_quantile(&w, 0.95, 40_000).sqrt();
    let r = radius(&e, lambda, &RadiusSpec::default()).unwrap();
    assert!((r / oracle - 1.0).abs() < 0.02, "{r} vs {oracle}");
}

#[test]
fn radius_null_space_limit() {
    // Only the ⌊q⌋ unit weights survive: r² ≈ χ²_{⌊q⌋}(1 − α)/n.
    let n = 2000;
    for q in [1.0, 2.0, 3.0] {
        let e = eigenvalues(q, n).unwrap();
        let r = radius(&e, f64::INFINITY, &RadiusSpec::default()).unwrap();
        let chi = ChiSquaredLaw::new(q).unwrap().inverse_cdf(0.95);
        let got = r * r * n as f64;
        assert!((got / chi - 1.0).abs() < 0.05, "q={q}: {got} vs {chi}");
    }
}

#[test]
fn radius_approaches_asymptotic_law() {
    let n = 2000;
    let e = eigenvalues(2.0, n).unwrap();
    let k = kappa(2.0, 0, 1).unwrap();
    let ratio = |lambda: f64, alpha: f64| {
        let r = radius(
            &e,
            lambda,
            &RadiusSpec {
                alpha,
                ..RadiusSpec::default()
            },
        )
        .unwrap();
        r * r * n as f64 / (k * lambda.powf(-0.25))
    };
    let lambdas = [1e-5, 1e-7, 1e-9, 1e-11, 1e-13];
    let tail: Vec<f64> = lambdas.iter().map(|&l| ratio(l, 0.05)).collect();
    assert!(tail.windows(2).all(|w| w[1] < w[0]), "{tail:?}");
    assert!((tail[4] - 1.0).abs() < 0.15, "{tail:?}");
    for &l in &lambdas[2..] {
        assert!((ratio(l, 0.5) - 1.0).abs() < 0.03, "median at λ={l}");
    }
}

#[test]
fn radius_monotone_in_lambda() {
    let e = eigenvalues(3.0, 500).unwrap();
    let spec = RadiusSpec {
        mc_draws: 2000,
        ..RadiusSpec::default()
    };
    let r: Vec<f64> = (0..12)
        .map(|k| radius(&e, 10f64.powf(-14.0 + k as f64), &spec).unwrap())
        .collect();
    assert!(r.windows(2).all(|w| w[1] <= w[0]), "{r:?}");
}

#[test]
fn radius_is_deterministic_given_seed() {
    let e = eigenvalues(2.0, 300).unwrap();
    let spec = RadiusSpec::default();
    let a = radius(&e, 1e-6, &spec).unwrap();
    assert_eq!(a.to_bits(), radius(&e, 1e-6, &spec).unwrap().to_bits());
    let b = radius(&e, 1e-6, &RadiusSpec { seed: 7, ..spec }).unwrap();
    assert_ne!(a, b);
    assert!((a / b - 1.0).abs() < 0.05);
}

#[test]
fn radius_rejects_bad_settings() {
    let e = eigenvalues(2.0, 100).unwrap();
    let bad = [
        RadiusSpec {
            mc_draws: 999,
            ..RadiusSpec::default()
        },
        RadiusSpec {
            alpha: 0.0,
            ..RadiusSpec::default()
        },
        RadiusSpec {
            alpha: 1.0,
            ..RadiusSpec::default()
        },
    ];
    for spec in bad {
        assert!(matches!(
            radius(&e, 1e-4, &spec),
            Err(Error::InvalidArgument(_))
        ));
    }
    assert!(radius(&e, 0.0, &RadiusSpec::default()).is_err());
}

#[test]
fn ball_contains_center_and_scales_with_inflation() {
    let fit = f1_fit(256, 3);
    let ball = credible_ball(&fit, 1.0, &RadiusSpec::default()).unwrap();
    assert!(ball.radius > 0.0);
    assert!(ball.contains(&ball.center).unwrap());
    assert_eq!(ball.center, fit.fitted);
    let wide = ball.with_inflation(2.0).unwrap();
    assert!((wide.radius - 2.0 * ball.radius).abs() < 1e-15 * ball.radius);
    assert_eq!(wide.center, ball.center);
    let direct = credible_ball(&fit, 2.0, &RadiusSpec::default()).unwrap();
    assert_eq!(direct.radius, wide.radius);
    assert!(credible_ball(&fit, 0.9, &RadiusSpec::default()).is_err());
    assert!(ball.contains(&[0.0; 3]).is_err());
}

#[test]
fn posterior_collapses_without_noise() {
    let mut fit = f1_fit(128, 4);
    fit.sigma2_hat = 0.0;
    for draw in sample_posterior(&fit, 20, 9).unwrap() {
        for (a, b) in draw.iter().zip(&fit.fitted) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn posterior_mean_tracks_center() {
    let fit = f1_fit(64, 5);
    let m = 10_000;
    let draws = sample_posterior(&fit, m, 11).unwrap();
    let n = fit.fitted.len();
    let mut within3 = 0;
    for i in 0..n {
        let mean = draws.iter().map(|d| d[i]).sum::<f64>() / m as f64;
        let var = draws.iter().map(|d| (d[i] - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        let z = (mean - fit.fitted[i]).abs() / (var / m as f64).sqrt();
        assert!(z < 4.0, "component {i}: z = {z}");
        if z < 3.0 {
            within3 += 1;
        }
    }
    assert!(within3 as f64 >= 0.95 * n as f64);
}

#[test]
fn posterior_mass_of_unit_ball_is_calibrated() {
    let fit = f1_fit(200, 6);
    let ball = credible_ball(&fit, 1.0, &RadiusSpec::default()).unwrap();
    let draws = sample_posterior(&fit, 10_000, 12).unwrap();
    let frac = |b: &ebspline::credible::CredibleBall| {
        draws.iter().filter(|d| b.contains(d).unwrap()).count() as f64 / draws.len() as f64
    };
    let p1 = frac(&ball);
    assert!((p1 - 0.95).abs() < 0.02, "{p1}");
    for l in [1.5, 2.0] {
        assert!(frac(&ball.with_inflation(l).unwrap()) >= p1);
    }
}

#[test]
fn posterior_draws_replay() {
    let fit = f1_fit(100, 7);
    let a = sample_posterior(&fit, 5, 1).unwrap();
    assert_eq!(a, sample_posterior(&fit, 5, 1).unwrap());
    assert_ne!(a, sample_posterior(&fit, 5, 2).unwrap());
    let s = PosteriorSampler::new(&fit).unwrap();
    assert_eq!(s.dof(), 100.0);
    assert_eq!(s.draw(1, 3).unwrap(), a[3]);
    assert!(sample_posterior(&fit, 0, 1).is_err());
}

#[test]
fn quantiles_of_known_sample() {
    let v: Vec<f64> = (1..=100).map(f64::from).collect();
    let q = Quantiles::of(&v);
    assert_eq!((q.q05, q.median, q.q95), (5.0, 50.0, 95.0));
}

fn small_coverage() -> CoverageConfig {
    let mut cfg = CoverageConfig::new(Generator::f1(), 200, 50);
    cfg.radius.mc_draws = 1000;
    cfg
}

#[test]
fn coverage_replays_and_reports() {
    let cfg = small_coverage();
    let a = coverage_experiment(&cfg).unwrap();
    assert_eq!(a, coverage_experiment(&cfg).unwrap());
    assert_eq!(a.radii.len(), 50);
    assert_eq!(a.covered.len(), 50);
    assert_eq!(a.q_hat.len(), 50);
    let hits = a.covered.iter().filter(|&&c| c).count() as f64;
    assert_eq!(a.coverage, hits / 50.0);
    assert!(a.radius_quantiles.q05 <= a.radius_quantiles.median);
    let json = serde_json::to_value(&a).unwrap();
    for key in [
        "generator",
        "n",
        "replicates",
        "L",
        "alpha",
        "coverage",
        "radius_quantiles",
    ] {
        assert!(json.get(key).is_some(), "{key}");
    }
}

#[test]
fn coverage_rejects_small_experiments() {
    let mut cfg = small_coverage();
    cfg.replicates = 49;
    assert!(coverage_experiment(&cfg).is_err());
    cfg.replicates = 50;
    cfg.l = 0.5;
    assert!(coverage_experiment(&cfg).is_err());
    assert!(radius_rate(&small_coverage(), &[200]).is_err());
}

#[test]
fn radius_rate_reports_target() {
    let (rate, reports) = radius_rate(&small_coverage(), &[100, 200, 400]).unwrap();
    assert_eq!(reports.len(), 3);
    assert!((rate.target_slope.unwrap() + 3.0 / 7.0).abs() < 1e-15);
    assert!(
        rate.median_radius.windows(2).all(|w| w[1] < w[0]),
        "{:?}",
        rate.median_radius
    );
    assert!(rate.slope < 0.0);
}
