use fbmlab::kernel::*;
use fbmlab::sampler::{cameron_martin_inner, Increment};
use proptest::prelude::*;
use statrs::function::beta::{beta_reg, ln_beta};

fn hp(v: f64) -> HurstParameter {
    HurstParameter::new(v).unwrap()
}

fn q() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Trapezoid rule on `∫_s^t (u-s)^{H-3/2} u^{H-1/2} du` after `u = s + x^4`,
/// which is smooth for `H = 3/4`.
fn trapezoid_kernel_075(t: f64, s: f64, mesh: usize) -> f64 {
    let h = 0.75;
    let c = (h * (2.0 * h - 1.0) / ln_beta(2.0 - 2.0 * h, h - 0.5).exp()).sqrt();
    let top = (t - s).powf(0.25);
    let f = |x: f64| 4.0 * (s + x.powi(4)).powf(0.25);
    let dx = top / mesh as f64;
    let mut acc = 0.5 * (f(0.0) + f(top));
    for i in 1..mesh {
        acc += f(i as f64 * dx);
    }
    c * s.powf(0.5 - h) * acc * dx
}

/// Closed form for `H < 1/2` through the regularized incomplete beta function.
fn incomplete_beta_kernel(h: f64, t: f64, s: f64) -> f64 {
    let (a, b) = (1.0 - 2.0 * h, h + 0.5);
    let lb = ln_beta(a, b);
    let c = (2.0 * h / ((1.0 - 2.0 * h) * lb.exp())).sqrt();
    let j = s.powf(2.0 * h - 1.0) * lb.exp() * (1.0 - beta_reg(a, b, s / t));
    c * ((t / s).powf(h - 0.5) * (t - s).powf(h - 0.5) - (h - 0.5) * s.powf(0.5 - h) * j)
}

#[test]
fn kernel_matches_high_precision_values() {
    let cases = [
        (0.75, 1.0, 0.5, 0.937_591_963_698_057_2),
        (0.25, 1.0, 0.5, 0.820_322_623_764_752_8),
        (0.3, 2.0, 0.7, 0.739_284_880_075_663_9),
        (0.1, 1.0, 0.01, 1.792_521_420_303_301_3),
    ];
    for (h, t, s, v) in cases {
        let k = kernel_eval(hp(h), t, s, &q()).unwrap();
        assert!(rel(k, v) < 1e-7, "H={h} t={t} s={s}: {k} vs {v}");
    }
}

#[test]
fn kernel_matches_fine_trapezoid_oracle() {
    let oracle = trapezoid_kernel_075(1.0, 0.5, 1_000_000);
    let k = kernel_eval(hp(0.75), 1.0, 0.5, &q()).unwrap();
    assert!(rel(k, oracle) < 1e-7, "{k} vs {oracle}");
}

#[test]
fn brownian_kernel_is_one() {
    assert_eq!(kernel_eval(hp(0.5), 1.0, 0.3, &q()).unwrap(), 1.0);
}

#[test]
fn kernel_rejects_points_off_support() {
    for h in [0.3, 0.5, 0.7] {
        assert!(kernel_eval(hp(h), 1.0, 1.0, &q()).is_err());
        assert!(kernel_eval(hp(h), 1.0, 1.5, &q()).is_err());
        assert!(kernel_eval(hp(h), 1.0, 0.0, &q()).is_err());
    }
}

#[test]
fn upper_bound_golden_values() {
    assert_eq!(kernel_upper_bound(hp(0.5), 2.0, 0.7, 3.5).unwrap(), 3.5);
    let v = kernel_upper_bound(hp(0.75), 1.0, 0.25, 1.0).unwrap();
    assert!((v - std::f64::consts::SQRT_2).abs() < 1e-12);
    let v = kernel_upper_bound(hp(0.25), 1.0, 0.5, 1.0).unwrap();
    assert!((v - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn covariance_golden_values() {
    let v = covariance(hp(0.75), 2.0, 1.0).unwrap();
    assert!((v - 2f64.sqrt()).abs() < 1e-14);
    assert_eq!(covariance(hp(0.5), 2.0, 0.7).unwrap(), 0.7);
    assert!(covariance(hp(0.3), -1.0, 0.5).is_err());
}

#[test]
fn l2_inner_product_examples() {
    assert_eq!(kernel_l2_inner(hp(0.5), 2.0, 3.0, &q()).unwrap(), 2.0);
    for h in [0.2, 0.35, 0.65, 0.9] {
        let v = kernel_l2_inner(hp(h), 1.0, 1.0, &q()).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "H={h}: {v}");
    }
    let v = kernel_l2_inner(hp(0.25), 1.0, 0.5, &q()).unwrap();
    assert!(rel(v, covariance(hp(0.25), 1.0, 0.5).unwrap()) < 1e-6);
}

#[test]
fn fgn_golden_value_and_bound() {
    let v = fgn_autocov(hp(0.3), 1.0).unwrap();
    assert!((v - 0.5 * (2f64.powf(0.6) - 2.0)).abs() < 1e-15);
    assert!((v + 0.242_142).abs() < 1e-6);
    assert!(fgn_autocov(hp(0.3), 0.5).is_err());
    for h in [0.05, 0.3, 0.5, 0.7, 0.95] {
        for lag in 1..=200 {
            let g = fgn_autocov(hp(h), lag as f64).unwrap();
            assert!(g.abs() <= fgn_autocov_bound(hp(h)) + 1e-15);
        }
    }
}

#[test]
fn increment_covariance_matches_covariance_combination() {
    let h = hp(0.25);
    let r = |a, b| covariance(h, a, b).unwrap();
    let (u, rr, s, t) = (0.0, 1.0, 2.0, 3.0);
    let brute =
        (r(t, rr) - r(t, u) - r(s, rr) + r(s, u)) / ((t - s).powf(0.25) * (rr - u).powf(0.25));
    let v = increment_covariance(h, u, rr, s, t).unwrap();
    assert!((v - brute).abs() < 1e-14);
    assert!(v < 0.0);
    assert_eq!(increment_covariance(hp(0.5), u, rr, s, t).unwrap(), 0.0);
    assert!(increment_covariance(h, 1.0, 0.5, 2.0, 3.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_agrees_with_incomplete_beta_form(h in 0.05f64..0.49, t in 0.1f64..4.0, f in 0.01f64..0.99) {
        let s = t * f;
        let k = kernel_eval(hp(h), t, s, &q()).unwrap();
        let oracle = incomplete_beta_kernel(h, t, s);
        prop_assert!(rel(k, oracle) < 1e-7, "H={} t={} s={}: {} vs {}", h, t, s, k, oracle);
    }

    #[test]
    fn kernel_is_positive(h in 0.02f64..0.98, t in 0.01f64..10.0, f in 0.001f64..0.999) {
        let k = kernel_eval(hp(h), t, t * f, &q()).unwrap();
        prop_assert!(k.is_finite() && k > 0.0);
    }

    #[test]
    fn covariance_is_symmetric(h in 0.01f64..0.99, t in 0.0f64..10.0, s in 0.0f64..10.0) {
        prop_assert_eq!(covariance(hp(h), t, s).unwrap(), covariance(hp(h), s, t).unwrap());
    }

    #[test]
    fn fgn_sign_follows_regime(h in 0.01f64..0.99, lag in 1usize..=64) {
        let g = fgn_autocov(hp(h), lag as f64).unwrap();
        if h < 0.5 {
            prop_assert!(g <= 0.0);
        } else {
            prop_assert!(g >= 0.0);
        }
    }

    #[test]
    fn increment_covariance_is_a_correlation(
        h in 0.01f64..0.99,
        u in 0.0f64..1.0,
        gaps in prop::array::uniform3(0.01f64..2.0),
    ) {
        let (r, s, t) = (u + gaps[0], u + gaps[0] + gaps[1], u + gaps[0] + gaps[1] + gaps[2]);
        let v = increment_covariance(hp(h), u, r, s, t).unwrap();
        prop_assert!((-1.0..=1.0).contains(&v));
        if h < 0.5 { prop_assert!(v <= 0.0) } else { prop_assert!(v >= 0.0) }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn increment_covariance_equals_normalized_inner_product(
        hi in 0usize..4,
        u in 0.0f64..1.0,
        gaps in prop::array::uniform3(0.05f64..1.5),
    ) {
        let h = hp([0.2, 0.4, 0.6, 0.8][hi]);
        let (r, s, t) = (u + gaps[0], u + gaps[0] + gaps[1], u + gaps[0] + gaps[1] + gaps[2]);
        let ip = cameron_martin_inner(h, Increment::new(s, t).unwrap(), Increment::new(u, r).unwrap(), &q()).unwrap();
        let norm = ((t - s) * (r - u)).powf(h.value());
        let v = increment_covariance(h, u, r, s, t).unwrap();
        prop_assert!((ip / norm - v).abs() < 1e-6, "{} vs {}", ip / norm, v);
    }
}

#[test]
fn kernel_stays_below_scanned_upper_bound() {
    for h in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let c = estimate_bound_constant(hp(h), 2.0, 16, &q()).unwrap();
        assert!(c.is_finite() && c > 0.0);
        let mut x = 0.123_456_789f64;
        for _ in 0..200 {
            // Deterministic low-discrepancy points in 0 < s < t <= 2.
            x = (x + 0.618_033_988_749_895) % 1.0;
            let t = 2.0 * (0.05 + 0.95 * x);
            let f = ((x * 7.0) % 1.0).clamp(1e-6, 1.0 - 1e-6);
            let s = t * f;
            let k = kernel_eval(hp(h), t, s, &q()).unwrap();
            let b = kernel_upper_bound(hp(h), t, s, c).unwrap();
            assert!(k <= b * (1.0 + 1e-9), "H={h} t={t} s={s}: {k} > {b}");
        }
    }
}
