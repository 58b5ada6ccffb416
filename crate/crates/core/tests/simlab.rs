use std::f64::consts::PI;

use ebspline::ebcore::{fit, fit_fixed_q, FitOptions, LambdaSearch, ModelFamily, QGrid};
use ebspline::freq::{gcv_fit, GcvOptions};
use ebspline::rng::{derive_seed, substream};
use ebspline::simlab::{run_study, Generator, GeneratorKind, Method, NoiseModel, StudyConfig};
use ebspline::spectral::{make_basis, BasisKind, DesignGrid};
use ebspline::Error;

#[test]
fn f2_has_exact_zero_at_tenth() {
    let grid = DesignGrid::right(10).unwrap();
    let f = Generator::f2().unscaled().generate(&grid).unwrap();
    assert!((grid.points()[0] - 0.1).abs() < 1e-15);
    assert!(f[0].abs() < 1e-15);
    for (x, v) in grid.points().iter().zip(&f) {
        assert!((v - (5.0 * PI * x).cos()).abs() < 1e-15);
    }
}

#[test]
fn range_scaling_gives_unit_span() {
    let grid = DesignGrid::right(500).unwrap();
    for g in [Generator::f1(), Generator::f2()] {
        let f = g.generate(&grid).unwrap();
        let hi = f.iter().cloned().fold(f64::MIN, f64::max);
        let lo = f.iter().cloned().fold(f64::MAX, f64::min);
        assert!((hi - lo - 1.0).abs() < 1e-12, "{}", g.name());
    }
    let constant = Generator {
        kind: GeneratorKind::Polynomial {
            coefficients: vec![2.0],
        },
        scale_by_range: true,
    };
    assert!(matches!(
        constant.generate(&grid),
        Err(Error::DegenerateInput(_))
    ));
}

#[test]
fn linear_polynomial_lies_in_null_space() {
    for conv in [
        DesignGrid::right(300).unwrap(),
        DesignGrid::midpoint(301).unwrap(),
    ] {
        let f = Generator::polynomial(2).generate(&conv).unwrap();
        for (x, v) in conv.points().iter().zip(&f) {
            assert!((v - (1.0 + x)).abs() < 1e-14);
        }
        let b = make_basis(&conv, 2.0, BasisKind::AnalyticSurrogate)
            .unwrap()
            .forward(&f)
            .unwrap();
        assert!(b[2..].iter().all(|c| c.abs() <= 1e-10));
    }
}

#[test]
fn f1_spectrum_recovers_construction() {
    let grid = DesignGrid::right(400).unwrap();
    let g = Generator::f1().unscaled();
    let sp = g.spectrum(&grid, 3.0).unwrap();
    assert_eq!(sp.beta_nominal, Some(3.0));
    for i in 1..=400usize {
        let want = if i <= 3 {
            0.0
        } else {
            ((i + 1) as f64).powi(-3) * (2.0 * i as f64).cos()
        };
        assert!((sp.b[i - 1] - want).abs() < 1e-12, "i={i}");
    }
}

#[test]
fn f1_energy_is_stable_in_n() {
    let e: Vec<f64> = [500, 1000, 2000]
        .iter()
        .map(|&n| {
            let grid = DesignGrid::right(n).unwrap();
            Generator::f1()
                .spectrum(&grid, 3.0)
                .unwrap()
                .sobolev_energy(2.0)
                .unwrap()
        })
        .collect();
    for v in &e[1..] {
        assert!((v / e[0] - 1.0).abs() < 0.1, "{e:?}");
    }
}

#[test]
fn noise_model_validates_and_replays() {
    assert!(NoiseModel::new(0.0).is_err());
    assert!(NoiseModel::new(f64::NAN).is_err());
    let nm = NoiseModel::new(0.5).unwrap();
    let f = vec![1.0; 20_000];
    let y = nm.observe(&f, &mut substream(3, 0));
    assert_eq!(y, nm.observe(&f, &mut substream(3, 0)));
    let m = y.iter().sum::<f64>() / y.len() as f64;
    let v = y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (y.len() - 1) as f64;
    assert!((m - 1.0).abs() < 4.0 * 0.5 / (20_000f64).sqrt());
    assert!((v.sqrt() / 0.5 - 1.0).abs() < 0.02);
}

#[test]
fn generator_json_round_trip() {
    for g in [
        Generator::f1(),
        Generator::f2(),
        Generator::polynomial(3),
        Generator::custom(2, vec![0.0; 8]),
    ] {
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<Generator>(&s).unwrap(), g);
    }
    let g: Generator = serde_json::from_str(r#"{"kind":"f2-cosine"}"#).unwrap();
    assert!(!g.scale_by_range);
}

fn small_study(g: Generator, m: usize) -> StudyConfig {
    let mut cfg = StudyConfig::new(g, 200);
    cfg.replicates = m;
    cfg
}

#[test]
fn single_replicate_report_equals_single_fit() {
    let cfg = small_study(Generator::f1(), 1);
    let rep = run_study(&cfg).unwrap();
    let grid = DesignGrid::right(200).unwrap();
    let f = Generator::f1().generate(&grid).unwrap();
    let y = NoiseModel::default().observe(&f, &mut substream(derive_seed(cfg.seed, 1), 0));
    let family = ModelFamily::analytic(grid);
    let eb = fit(
        &family,
        &y,
        &QGrid::default_integer(),
        &FitOptions::default(),
    )
    .unwrap();
    let sq = |fit: &[f64]| {
        fit.iter()
            .zip(&f)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / 200.0
    };

    let row = rep.row(Method::Eb).unwrap();
    assert_eq!(row.mean_lambda, eb.lambda_hat);
    assert_eq!(row.var_lambda, 0.0);
    assert_eq!(row.amse, sq(&eb.fitted));
    assert_eq!(row.ratio, Some(1.0));
    let (g, fitted) = gcv_fit(&family, &y, 4.0, &GcvOptions::default()).unwrap();
    let row = rep.row(Method::Gcv { q: 4.0 }).unwrap();
    assert_eq!(row.mean_lambda, g.lambda_f_hat);
    assert_eq!(row.amse, sq(&fitted));
    assert_eq!(row.ratio, Some(sq(&fitted) / sq(&eb.fitted)));
    let fixed = fit_fixed_q(&family, &y, 2.0, &LambdaSearch::default()).unwrap();
    assert_eq!(
        rep.row(Method::EbFixed { q: 2.0 }).unwrap().mean_lambda,
        fixed.lambda_hat
    );
    assert_eq!(rep.q_hat_fraction(eb.q_hat), 1.0);
}

#[test]
fn study_aggregates_are_consistent() {
    let rep = run_study(&small_study(Generator::f2(), 30)).unwrap();
    assert_eq!(
        rep.q_hat_histogram.iter().map(|b| b.count).sum::<usize>(),
        30
    );
    assert_eq!(rep.rows.len(), 11);
    for (row, l) in rep.rows.iter().zip(&rep.lambdas) {
        assert_eq!(l.len(), 30);
        let mean = l.iter().sum::<f64>() / 30.0;
        let var = l.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 29.0;
        assert!((row.mean_lambda / mean - 1.0).abs() < 1e-12);
        assert!((row.var_lambda / var - 1.0).abs() < 1e-9);
    }
}

#[test]
fn study_replays_bit_identically() {
    let cfg = small_study(Generator::f1(), 12);
    let a = run_study(&cfg).unwrap();
    let b = run_study(&cfg).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    let mut other = cfg.clone();
    other.seed = 99;
    assert_ne!(run_study(&other).unwrap().lambdas, a.lambdas);
}

#[test]
fn aggregates_ignore_method_order() {
    let cfg = small_study(Generator::f1(), 10);
    let a = run_study(&cfg).unwrap();
    let mut rev = cfg.clone();
    rev.methods.reverse();
    let b = run_study(&rev).unwrap();
    for row in &a.rows {
        assert_eq!(b.row(row.method).unwrap(), row);
    }
}

#[test]
fn table_csv_follows_layout() {
    let rep = run_study(&small_study(Generator::f2(), 5)).unwrap();
    let csv = rep.table_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "function,statistic,EB,GCV q=2,GCV q=3,GCV q=4,GCV q=5,GCV q=6"
    );
    let stats: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(stats, ["mean(lambda)", "var(lambda)", "A(lambda)", "R"]);
    assert!(lines[4].starts_with("f2,R,,"));
    for l in &lines[1..] {
        assert_eq!(l.split(',').count(), 8);
    }
}

#[test]
fn study_config_json_keys() {
    let cfg = StudyConfig::new(Generator::f1(), 1000);
    let v = serde_json::to_value(&cfg).unwrap();
    for key in [
        "generator",
        "n",
        "M",
        "sigma",
        "q_grid",
        "methods",
        "seed",
        "design_convention",
    ] {
        assert!(v.get(key).is_some(), "{key}");
    }
    let text = r#"{"generator":{"kind":"f2-cosine","scale_by_range":true},"n":100,"M":3,
        "sigma":0.01,"q_grid":[1,2,3],"methods":[{"kind":"eb"},{"kind":"gcv","q":2}],
        "seed":5,"design_convention":"midpoint"}"#;
    let parsed: StudyConfig = serde_json::from_str(text).unwrap();
    assert_eq!(parsed.replicates, 3);
    assert_eq!(run_study(&parsed).unwrap().rows.len(), 2);
}

#[test]
fn study_rejects_empty_configs() {
    let mut cfg = small_study(Generator::f1(), 0);
    assert!(run_study(&cfg).is_err());
    cfg.replicates = 2;
    cfg.methods.clear();
    assert!(run_study(&cfg).is_err());
    cfg.methods = vec![Method::Gcv { q: 2.0 }];
    let rep = run_study(&cfg).unwrap();
    assert!(rep.q_hat_histogram.is_empty());
    assert_eq!(rep.rows[0].ratio, None);
}
