use std::f64::consts::PI;

use ebspline::ebcore::{solve_lambda, t_q, LambdaSearch};
use ebspline::oracle::{
    asymptotic_variances, expected_t_lambda, expected_t_q, expected_t_q_with_noise, kappa,
    kappa_reflection, oracle_lambda, oracle_path, polished_tail_check, trace_approx_check,
    trace_exact, trace_log_check, KappaTable, OracleMethod, SignalSpectrum,
};
use ebspline::spectral::{eigenvalues, make_basis, BasisKind, DesignGrid};
use ebspline::Error;

const SIGMA2: f64 = 1e-4;

/// f1 spectral coefficients on the degree-3 surrogate basis, scaled by the range of f.
fn f1_spectrum(n: usize) -> Vec<f64> {
    let grid = DesignGrid::right(n).unwrap();
    let basis = make_basis(&grid, 3.0, BasisKind::AnalyticSurrogate).unwrap();
    let c: Vec<f64> = (1..=n)
        .map(|i| {
            if i <= 3 {
                0.0
            } else {
                ((i + 1) as f64).powi(-3) * (2.0 * i as f64).cos()
            }
        })
        .collect();
    let f = basis.inverse(&c).unwrap();
    let hi = f.iter().cloned().fold(f64::MIN, f64::max);
    let lo = f.iter().cloned().fold(f64::MAX, f64::min);
    c.iter().map(|v| v / (hi - lo)).collect()
}

fn gamma_half(k: u32) -> f64 {
    // Γ(k + 1/2) = (2k)! √π / (4^k k!)
    let mut g = PI.sqrt();
    for j in 0..k {
        g *= j as f64 + 0.5;
    }
    g
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

#[test]
fn kappa_closed_forms() {
    assert!((kappa(1.0, 0, 1).unwrap() - 0.5).abs() < 1e-8);
    assert!((kappa(1.0, 0, 2).unwrap() - 0.25).abs() < 1e-8);
    assert!((kappa(2.0, 0, 1).unwrap() - 0.353_553_39).abs() < 1e-8);
    assert!((kappa(2.0, 0, 1).unwrap() - 1.0 / (4.0 * (PI / 4.0).sin())).abs() < 1e-12);
}

#[test]
fn kappa_matches_half_integer_gammas_at_q1() {
    for m in 0..6 {
        for l in 1..6 {
            let direct = gamma_half(m) * gamma_half(l - 1) / (2.0 * PI * factorial(l + m - 1));
            let k = kappa(1.0, m, l).unwrap();
            assert!((k - direct).abs() < 1e-12 * direct, "κ_1({m},{l})");
        }
    }
}

#[test]
fn kappa_reflection_identity() {
    for k in 0..60 {
        let q = 0.55 + 0.1 * k as f64;
        let a = kappa(q, 0, 1).unwrap();
        let b = kappa_reflection(q).unwrap();
        assert!((a - b).abs() < 1e-12 * b, "q={q}");
    }
}

#[test]
fn kappa_domain_errors() {
    assert!(matches!(kappa(2.0, 0, 0), Err(Error::Domain(_))));
    assert!(matches!(kappa(0.5, 0, 1), Err(Error::Domain(_))));
    assert!(kappa(3.0, 40, 40).unwrap().is_finite());
    let table = KappaTable::new(2.0, 3, 3).unwrap();
    assert_eq!(table.entries.len(), 12);
    assert_eq!(table.get(0, 1), Some(kappa(2.0, 0, 1).unwrap()));
    assert_eq!(table.get(0, 0), None);
    assert!(table.entries.iter().all(|e| e.value > 0.0));
}

#[test]
fn trace_lemma_with_penalised_factor() {
    for (q, lambda) in [(1.0, 1e-4), (2.0, 1e-6), (3.0, 1e-8)] {
        for (m, l) in [(1, 2), (2, 2)] {
            let c = trace_approx_check(q, lambda, 100_000, m, l).unwrap();
            assert!(c.rel_err < 0.02, "q={q} ({m},{l}): {c:?}");
        }
    }
}

/// For m = 0 the sum over the integer lattice differs from the integral by the
/// Euler–Maclaurin boundary term: q null-space ones minus half the first value,
/// less the truncated integral tail.
#[test]
fn trace_lemma_offset_for_unpenalised_factor() {
    for (q, lambda) in [(1.0, 1e-4), (2.0, 1e-6), (3.0, 1e-8)] {
        for l in [1, 2] {
            let c = trace_approx_check(q, lambda, 100_000, 0, l).unwrap();
            let offset = c.exact - c.approx;
            // Mass of the integral beyond the last index.
            let cut = 100_000.0 - q;
            let tail = if l == 1 {
                cut.powf(1.0 - 2.0 * q) / (lambda * PI.powf(2.0 * q) * (2.0 * q - 1.0))
            } else {
                0.0
            };
            assert!(
                (offset + tail - (q - 0.5)).abs() < 1e-3,
                "q={q} l={l}: offset {offset}"
            );
        }
    }
}

#[test]
fn trace_error_shrinks_as_lambda_falls() {
    let errs: Vec<f64> = (1..8)
        .map(|k| {
            trace_approx_check(2.0, 10f64.powi(-k), 1_000_000, 0, 1)
                .unwrap()
                .rel_err
        })
        .collect();
    for w in errs.windows(2) {
        assert!(w[1] < w[0] * 1.1, "{errs:?}");
    }
    let e = eigenvalues(1.0, 1000).unwrap();
    let mut prev = f64::INFINITY;
    for k in 0..40 {
        let s = trace_exact(&e, 10f64.powf(k as f64 / 4.0 - 8.0), 0, 1);
        assert!(s <= prev);
        prev = s;
    }
}

#[test]
fn log_weighted_trace_is_reported() {
    let a = trace_log_check(2.0, 1e-6, 100_000, 1, 2, 1).unwrap();
    let b = trace_log_check(2.0, 1e-10, 1_000_000, 1, 2, 1).unwrap();
    assert!(a.exact > 0.0 && a.approx > 0.0);
    assert!(b.rel_err < a.rel_err);
}

#[test]
fn expected_t_lambda_signs() {
    let n = 500;
    let zero = SignalSpectrum::new(vec![0.0; n]);
    let b: Vec<f64> = (1..=n).map(|i| 5.0 / (i as f64).powi(2)).collect();
    let sig = SignalSpectrum::new(b.clone());
    for lambda in [1e-8, 1e-4, 1e-1, 1.0] {
        assert!(expected_t_lambda(&zero, 1.0, lambda, 2.0).unwrap() < 0.0);
        assert!(expected_t_lambda(&sig, 0.0, lambda, 2.0).unwrap() > 0.0);
        let lo = expected_t_lambda(&sig, 0.01, lambda, 2.0).unwrap();
        let hi_noise = expected_t_lambda(&sig, 0.02, lambda, 2.0).unwrap();
        let more = SignalSpectrum::new(b.iter().map(|v| 1.5 * v).collect());
        let hi_signal = expected_t_lambda(&more, 0.01, lambda, 2.0).unwrap();
        assert!(hi_noise < lo && hi_signal > lo);
    }
}

#[test]
fn oracle_root_matches_variance_corrected_solve() {
    let n = 1000;
    let b = f1_spectrum(n);
    let sp = SignalSpectrum::new(b.clone());
    let e = eigenvalues(3.0, n).unwrap();
    let oracle = oracle_lambda(&sp, SIGMA2, 3.0, OracleMethod::NumericRoot)
        .unwrap()
        .lambda_q;
    assert!(expected_t_lambda(&sp, SIGMA2, oracle, 3.0).unwrap().abs() < 1e-12);
    let x: Vec<f64> = b.iter().map(|v| (v * v + SIGMA2).sqrt()).collect();
    let sol = solve_lambda(&e, &x, &LambdaSearch::default()).unwrap();
    assert!(sol.boundary.is_none());
    assert!(
        (sol.lambda / oracle - 1.0).abs() < 0.05,
        "{} vs {oracle}",
        sol.lambda
    );
    assert!((sol.lambda / oracle).ln().abs() < 10f64.ln());
}

#[test]
fn closed_form_and_numeric_oracles_agree_on_log_scale() {
    let n = 1000;
    let sp = SignalSpectrum::new(f1_spectrum(n));
    for q in [2.0, 3.0] {
        let cf = oracle_lambda(&sp, SIGMA2, q, OracleMethod::ClosedForm)
            .unwrap()
            .lambda_q;
        let nr = oracle_lambda(&sp, SIGMA2, q, OracleMethod::NumericRoot)
            .unwrap()
            .lambda_q;
        assert!(
            ((cf.ln() - nr.ln()) / nr.ln()).abs() < 0.15,
            "q={q}: {cf} vs {nr}"
        );
    }
}

#[test]
fn closed_form_oracle_homogeneity() {
    let sp = SignalSpectrum::new(f1_spectrum(400));
    for q in [1.0, 2.0, 3.0] {
        let a = oracle_lambda(&sp, SIGMA2, q, OracleMethod::ClosedForm)
            .unwrap()
            .lambda_q;
        let b = oracle_lambda(&sp, 2.0 * SIGMA2, q, OracleMethod::ClosedForm)
            .unwrap()
            .lambda_q;
        assert!((b / a - 2f64.powf(2.0 * q / (2.0 * q + 1.0))).abs() < 1e-10);
    }
}

#[test]
fn polynomial_signal_has_infinite_oracle() {
    let mut b = vec![0.0; 100];
    b[0] = 3.0;
    b[1] = -1.0;
    let sp = SignalSpectrum::new(b);
    for method in [OracleMethod::ClosedForm, OracleMethod::NumericRoot] {
        assert_eq!(
            oracle_lambda(&sp, 1.0, 2.0, method).unwrap().lambda_q,
            f64::INFINITY
        );
    }
    let eq = expected_t_q(&SignalSpectrum::new(vec![0.0; 100]), 0.0, 0.01, 2.0).unwrap();
    assert_eq!(eq, 0.0);
    let mut b = vec![0.0; 100];
    b[0] = 3.0;
    b[1] = -1.0;
    assert_eq!(
        expected_t_q(&SignalSpectrum::new(b), 0.0, 0.01, 2.0).unwrap(),
        0.0
    );
}

#[test]
fn expected_t_q_reduces_to_quadratic_form_at_root() {
    let n = 1000;
    let b = f1_spectrum(n);
    let sp = SignalSpectrum::new(b.clone());
    let lambda = oracle_lambda(&sp, SIGMA2, 2.0, OracleMethod::NumericRoot)
        .unwrap()
        .lambda_q;
    let e = eigenvalues(2.0, n).unwrap();
    let qf: f64 = e.values()[2..]
        .iter()
        .zip(&b[2..])
        .map(|(&v, &b)| {
            let t = lambda * v;
            b * b * t * t.ln() / ((1.0 + t) * (1.0 + t))
        })
        .sum::<f64>()
        / n as f64;
    assert!((expected_t_q(&sp, SIGMA2, lambda, 2.0).unwrap() - qf).abs() < 1e-12);
}

#[test]
fn expected_t_q_sign_pattern_for_f1() {
    let sp = SignalSpectrum::new(f1_spectrum(1000));
    let at_root = |q: f64, noise: bool| {
        let l = oracle_lambda(&sp, SIGMA2, q, OracleMethod::NumericRoot)
            .unwrap()
            .lambda_q;
        if noise {
            expected_t_q_with_noise(&sp, SIGMA2, l, q).unwrap()
        } else {
            expected_t_q(&sp, SIGMA2, l, q).unwrap()
        }
    };
    assert!(at_root(2.0, false) < 0.0);
    assert!(at_root(2.0, true) < 0.0);
    // The displayed form stays negative beyond β; the noise term supplies the sign change.
    assert!(at_root(5.0, false) < 0.0);
    assert!(at_root(5.0, true) > 0.0);
}

#[test]
fn oracle_path_locates_smoothness_of_power_law_spectra() {
    let n = 100_000;
    let qs = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0, 6.0];
    let b: Vec<f64> = (1..=n)
        .map(|i| (n as f64).sqrt() * (i as f64).powf(-3.0))
        .collect();
    let path = oracle_path(&SignalSpectrum::new(b), SIGMA2, &qs).unwrap();
    assert!(path.beta_bar.is_none());
    assert!(path.orders.iter().all(|o| o.t_q < 0.0));
    let bb = path.beta_bar_noise.unwrap();
    assert!(bb > 2.0 && bb < 3.0, "{bb}");
    let neg = path
        .orders
        .iter()
        .filter(|o| o.q < 2.0)
        .all(|o| o.t_q_noise < 0.0);
    let pos = path
        .orders
        .iter()
        .filter(|o| o.q >= 3.0)
        .all(|o| o.t_q_noise > 0.0);
    assert!(neg && pos);
}

#[test]
fn empirical_t_q_on_variance_corrected_f1() {
    let n = 1000;
    let b = f1_spectrum(n);
    let x: Vec<f64> = b.iter().map(|v| (v * v + SIGMA2).sqrt()).collect();
    let value = |q: f64| {
        let e = eigenvalues(q, n).unwrap();
        let sol = solve_lambda(&e, &x, &LambdaSearch::default()).unwrap();
        t_q(&e, &x, sol.lambda).unwrap()
    };
    assert!(value(2.0) < 0.0);
    assert!(value(3.0) > 0.0);
    assert!(value(5.0) > 0.0);
}

#[test]
fn polished_tail_examples() {
    let n = 1024;
    let mut b = vec![0.0; n];
    for (i, v) in b.iter_mut().enumerate().take(10) {
        *v = 1.0 / (i + 1) as f64;
    }
    let r = polished_tail_check(&b, 2.0, 10, 2.0).unwrap();
    assert!(r.holds);

    let b: Vec<f64> = (1..=n).map(|i| (i as f64).powi(-2)).collect();
    let r = polished_tail_check(&b, 2.0, 10, 2.0).unwrap();
    assert!(r.worst_ratio.is_finite() && r.worst_ratio > 1.0);
    let r8 = polished_tail_check(&b, 1.05, 10, 2.0).unwrap();
    assert_eq!(r8.holds, r.worst_ratio <= 1.05);

    let mut spike = vec![0.0; n];
    spike[n - 1] = 1.0;
    let r = polished_tail_check(&spike, 1e12, 10, 2.0).unwrap();
    assert!(!r.holds && r.worst_ratio.is_infinite());

    assert!(polished_tail_check(&b, 2.0, 10, 1.5).is_err());
    assert!(polished_tail_check(&b, 2.0, 600, 2.0).is_err());
}

#[test]
fn polished_tail_is_scale_invariant() {
    let b: Vec<f64> = (1..=2000)
        .map(|i| (i as f64).powf(-1.7) * (i as f64).sin())
        .collect();
    let base = polished_tail_check(&b, 2.0, 10, 2.0).unwrap();
    for c in [1e-6, 3.0, 1e5] {
        let s: Vec<f64> = b.iter().map(|v| c * v).collect();
        let r = polished_tail_check(&s, 2.0, 10, 2.0).unwrap();
        assert_eq!(r.worst_j, base.worst_j);
        assert_eq!(r.holds, base.holds);
        assert!((r.worst_ratio - base.worst_ratio).abs() < 1e-9 * base.worst_ratio);
    }
}

#[test]
fn asymptotic_variance_constants() {
    let v1 = asymptotic_variances(1.0).unwrap();
    assert!((v1.eb - 4.0 / 9.0).abs() < 1e-12);
    // κ_1(4,2) = Γ(9/2)Γ(3/2)/(2π·5!), κ_1(1,2) = Γ(3/2)²/(2π·2), κ_1(1,3) = Γ(3/2)Γ(5/2)/(2π·3!)
    let k42 = gamma_half(4) * gamma_half(1) / (2.0 * PI * 120.0);
    let k12 = gamma_half(1) * gamma_half(1) / (2.0 * PI * 2.0);
    let k13 = gamma_half(1) * gamma_half(2) / (2.0 * PI * 6.0);
    let gcv = 2.0 * k42 / (4.0 * k12 - 3.0 * k13).powi(2);
    assert!((v1.gcv - gcv).abs() < 1e-12 * gcv);
    assert!(asymptotic_variances(2.0).unwrap().ratio > 1.0);
    let v3 = asymptotic_variances(3.0).unwrap();
    assert!(v3.eb.is_finite() && v3.eb > 0.0 && v3.gcv.is_finite() && v3.gcv > 0.0);
    let ratios: Vec<f64> = (0..=500)
        .map(|k| asymptotic_variances(1.0 + 0.01 * k as f64).unwrap().ratio)
        .collect();
    for w in ratios.windows(2) {
        assert!(w[1] > w[0] && w[1] / w[0] < 1.03);
    }
}

#[test]
fn sobolev_energy_and_radius() {
    let b = f1_spectrum(1000);
    let sp = SignalSpectrum::new(b).with_beta(2.0).with_radius(1.0);
    let e2 = sp.sobolev_energy(2.0).unwrap();
    assert!(e2 > 0.0 && e2.is_finite());
    assert_eq!(sp.within_radius().unwrap(), Some(e2 <= 1.0));
    assert_eq!(
        SignalSpectrum::new(vec![1.0; 10]).within_radius().unwrap(),
        None
    );
}
