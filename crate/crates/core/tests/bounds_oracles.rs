use fbmlab::bounds::*;
use fbmlab::kernel::HurstParameter;
use proptest::prelude::*;
use statrs::function::erf::erfc;

fn hp(v: f64) -> HurstParameter {
    HurstParameter::new(v).unwrap()
}

fn params(p: f64, r: u32) -> CapacityParams {
    CapacityParams::new(p, r, 1.0, 1.0).unwrap()
}

#[test]
fn increment_bound_golden_values() {
    let v = increment_capacity_bound(hp(0.5), &params(2.0, 1), 0.0, 1.0, 2.0).unwrap();
    assert!((v - 2.0 * (-1f64).exp()).abs() < 1e-12);
    assert!((v - 0.735_759).abs() < 1e-6);
    // r = 0 keeps only the l = 0 term.
    let (h, p, s, t, eta) = (0.3, 3.0, 0.2, 1.7, 0.9);
    let v = increment_capacity_bound(hp(h), &params(p, 0), s, t, eta).unwrap();
    let expect = 2f64.powf(1.0 / p) * (-eta * eta / (2.0 * p * (t - s).powf(2.0 * h))).exp();
    assert!((v - expect).abs() < 1e-14);
    let v = increment_capacity_bound(hp(0.5), &params(2.0, 3), 0.0, 1.0, 50.0).unwrap();
    assert!(v >= 0.0 && v < 1e-100);
}

#[test]
fn gamma_factor_values() {
    assert_eq!(gamma_factor(hp(0.3)), 1.0);
    assert_eq!(gamma_factor(hp(0.5)), 1.0);
    assert_eq!(gamma_factor(hp(0.7)), 1.5);
}

#[test]
fn sup_bound_golden_values() {
    let v = sup_capacity_bound(hp(0.5), 0.0, 1.0, 2.0, SupVariant::OneSided).unwrap();
    assert!((v - 0.959_009_177_708_225).abs() < 1e-12);
    let small = sup_capacity_bound(hp(0.7), 0.0, 1.0, 1e-9, SupVariant::OneSided).unwrap();
    assert!((small - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn cap_prob_factor_values() {
    for h in [0.01, 0.2, 0.5, 0.8, 0.99] {
        assert_eq!(ch_constant(hp(h), ChMode::Literal), 1.0);
        let v = cap_prob_factor(7, &params(2.5, 0), hp(h), ChMode::Literal).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }
    let v = cap_prob_factor(2, &params(2.0, 1), hp(0.3), ChMode::Literal).unwrap();
    assert!((v - 5f64.sqrt()).abs() < 1e-14);
    let d = ch_constant(hp(0.75), ChMode::Derived);
    assert!((d - (2f64.sqrt() - 1.0)).abs() < 1e-15);
    assert_eq!(ch_constant(hp(0.5), ChMode::Derived), 0.0);
    assert!(cap_prob_factor(0, &params(2.0, 1), hp(0.3), ChMode::Literal).is_err());
}

#[test]
fn mgf_bound_values() {
    let v = mgf_sup_bound(hp(0.5), 1.0, 0.0, 1.0).unwrap();
    assert!((v - 2.0 * 1f64.exp()).abs() < 1e-12);
    assert!((mgf_sup_bound(hp(0.3), 1e-9, 0.0, 1.0).unwrap() - 2.0).abs() < 1e-12);
    assert!(mgf_sup_bound(hp(0.3), 0.0, 0.0, 1.0).is_err());
}

#[test]
fn envelope_values() {
    let v = modulus_envelope(hp(0.5), (-1f64).exp()).unwrap();
    assert!((v - 0.857_763_884_960_706_8).abs() < 1e-13);
    assert!(modulus_envelope(hp(0.5), 1.0).is_err());
    assert!(modulus_envelope(hp(0.5), 0.0).is_err());
    let mut prev = 0.0;
    for k in 1..=30 {
        let d = 0.5f64.powi(k);
        let r = modulus_envelope(hp(0.3), d).unwrap() / d.powf(0.3);
        assert!(r > prev);
        prev = r;
    }
    let t = (-1f64.exp()).exp();
    let v = lil_envelope(hp(0.3), t).unwrap();
    assert!((v - 2f64.sqrt() * t.powf(0.3)).abs() < 1e-14);
    let ratio = lil_envelope(hp(0.3), 1e-6).unwrap() / lil_envelope(hp(0.3), 1e-3).unwrap();
    assert!((ratio - 0.146_741_900_510_114_1).abs() < 1e-13);
    assert!(lil_envelope(hp(0.3), 0.5).is_err());
}

#[test]
fn gaussian_tail_sandwich() {
    for a in [0.5, 1.0, 2.0, 4.0] {
        let tail = 0.5 * erfc(a / 2f64.sqrt());
        assert!(gaussian_tail_lower(a).unwrap() <= tail);
        assert!(tail <= gaussian_tail_upper(a).unwrap());
    }
    assert!(gaussian_tail_lower(8.0).unwrap() / gaussian_tail_upper(8.0).unwrap() > 0.98);
    assert!((gaussian_tail_lower(1.0).unwrap() - 0.120_985_362_259_571_7).abs() < 1e-15);
    assert!(gaussian_tail_lower(0.0).is_err());
    assert!(gaussian_tail_upper(-1.0).is_err());
}

proptest! {
    #[test]
    fn two_sided_is_sqrt2_times_one_sided(h in 0.01f64..0.99, s in 0.0f64..3.0, len in 0.001f64..5.0, eta in 0.001f64..20.0) {
        let one = sup_capacity_bound(hp(h), s, s + len, eta, SupVariant::OneSided).unwrap();
        let two = sup_capacity_bound(hp(h), s, s + len, eta, SupVariant::TwoSided).unwrap();
        let term = sup_capacity_bound(hp(h), s, s + len, eta, SupVariant::Terminal).unwrap();
        prop_assert_eq!(two, std::f64::consts::SQRT_2 * one);
        prop_assert_eq!(term, two);
        prop_assert!(one.is_finite() && one >= 0.0);
    }

    #[test]
    fn increment_bound_shrinks_with_eta(h in 0.01f64..0.99, p in 1.01f64..6.0, r in 0u32..5, s in 0.0f64..2.0, len in 0.01f64..3.0) {
        let prm = params(p, r);
        let scale = len.powf(h);
        let near = increment_capacity_bound(hp(h), &prm, s, s + len, scale).unwrap();
        let far = increment_capacity_bound(hp(h), &prm, s, s + len, 10.0 * scale).unwrap();
        prop_assert!(far < near);
        prop_assert!(near.is_finite() && far >= 0.0);
    }

    #[test]
    fn mgf_bound_is_monotone(h in 0.01f64..0.99, alpha in 0.01f64..5.0, len in 0.01f64..3.0) {
        let base = mgf_sup_bound(hp(h), alpha, 0.0, len).unwrap();
        prop_assert!(mgf_sup_bound(hp(h), alpha * 1.1, 0.0, len).unwrap() > base);
        prop_assert!(mgf_sup_bound(hp(h), alpha, 0.0, len * 1.1).unwrap() > base);
    }

    #[test]
    fn bounds_are_finite_and_nonnegative(h in 0.01f64..0.99, delta in 1e-12f64..0.999, n in 1u64..1000) {
        prop_assert!(modulus_envelope(hp(h), delta).unwrap() >= 0.0);
        let v = cap_prob_factor(n, &params(2.0, 2), hp(h), ChMode::Derived).unwrap();
        prop_assert!(v.is_finite() && v >= 1.0);
    }
}

#[test]
fn brownian_increment_bound_matches_closed_form() {
    // At H = 1/2, (t-s)^H = sqrt(t-s); the bound depends on the kernel only through H.
    for (s, t, eta) in [(0.0, 1.0, 2.0), (0.3, 2.2, 0.7), (1.0, 1.5, 3.0)] {
        let len: f64 = t - s;
        let x = eta / (2.0 * len.sqrt());
        let expect = (2.0 * (1.0 + x * x)).sqrt() * (-eta * eta / (4.0 * len)).exp();
        let v = increment_capacity_bound(hp(0.5), &params(2.0, 1), s, t, eta).unwrap();
        assert!((v - expect).abs() < 1e-14 * expect.max(1.0));
    }
}
