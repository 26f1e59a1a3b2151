//! Shift-constant tests: the asymmetry series, the critical point, the
//! weak-asymmetry expansion, the G identity and the per-model scaling table.

use proptest::prelude::*;

use kpz_core::shifts::{
    a_pq, g_forms, height_shift, p_critical, scaling_constants, wasep_expansion, Model,
};
use kpz_core::specfun::QContext;
use kpz_core::Error;

#[test]
fn critical_asymmetry_to_ten_digits() {
    let pc = p_critical();
    assert!((pc - 0.7822787862).abs() < 1e-9, "p_c = {pc}");
    assert!((a_pq(pc).unwrap() - 0.5).abs() < 1e-11);
    assert!(height_shift(pc).unwrap().abs() < 1e-9);
}

#[test]
fn asymmetry_series_values() {
    assert_eq!(a_pq(1.0).unwrap(), 0.0);
    assert!((a_pq(0.7822787862).unwrap() - 0.5).abs() < 1e-9);
    assert!(a_pq(0.999).unwrap() < 2e-3);
}

#[test]
fn asymmetry_series_boundary_behavior() {
    for p in [0.5, 0.3, 0.5 + 1e-6, 1.1] {
        let err = a_pq(p).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)), "p = {p}: {err:?}");
    }
}

#[test]
fn asymmetry_series_is_positive_and_decreasing() {
    let mut prev = f64::INFINITY;
    let mut p = 0.55;
    while p < 1.0 {
        let v = a_pq(p).unwrap();
        assert!(v > 0.0 && v < prev, "a_pq not decreasing at p = {p}");
        prev = v;
        p += 0.05;
    }
}

#[test]
fn height_shift_endpoints_and_monotonicity() {
    assert_eq!(height_shift(1.0).unwrap(), -1.0);
    let mut prev = f64::INFINITY;
    for k in 0..9 {
        let p = 0.55 + 0.05 * k as f64;
        let v = height_shift(p).unwrap();
        assert!(v < prev);
        prev = v;
    }
}

#[test]
fn weak_asymmetry_residual_halves_with_beta() {
    // the remainder is O(beta): halving beta halves the residual
    let resid = |beta: f64| {
        let exact = a_pq((1.0 + beta) / 2.0).unwrap();
        (exact - wasep_expansion(beta).unwrap()).abs()
    };
    let r1 = resid(0.1);
    let r2 = resid(0.05);
    let ratio = r1 / r2;
    assert!(
        (ratio - 2.0).abs() <= 0.6,
        "residual ratio {ratio} (residuals {r1:.3e}, {r2:.3e})"
    );
    // at the domain edge the two-term form is still within 10% relative
    let exact = a_pq(0.6).unwrap();
    assert!((wasep_expansion(0.2).unwrap() / exact - 1.0).abs() < 0.1);
}

#[test]
fn weak_asymmetry_domain() {
    assert!(wasep_expansion(0.0).is_err());
    assert!(wasep_expansion(-0.1).is_err());
    assert!(wasep_expansion(0.25).is_err());
    assert!(wasep_expansion(0.2).is_ok());
}

#[test]
fn g_identity_on_coarse_grid() {
    for &tau in &[0.1, 0.3, 0.5, 0.7, 0.9] {
        let ctx = QContext::for_tau(tau).unwrap();
        let (g_poch, g_simple) = g_forms(tau, &ctx).unwrap();
        assert!(
            (g_poch - g_simple).abs() <= 1e-11,
            "G forms disagree at tau = {tau}: {g_poch} vs {g_simple}"
        );
    }
}

#[test]
fn g_identity_on_fine_grid() {
    for k in 1..20 {
        let tau = 0.05 * k as f64;
        let ctx = QContext::for_tau(tau).unwrap();
        let (g_poch, g_simple) = g_forms(tau, &ctx).unwrap();
        assert!((g_poch - g_simple).abs() <= 1e-11, "tau = {tau}");
    }
}

#[test]
fn g_simple_reference_value() {
    // at tau = 1/2 the simple form is sum 1/(2^l - 1)
    let ctx = QContext::for_tau(0.5).unwrap();
    let (_, g_simple) = g_forms(0.5, &ctx).unwrap();
    assert!((g_simple - 1.6066951524).abs() < 1e-9);
}

#[test]
fn g_simple_equals_asymmetry_series() {
    for &p in &[0.6, 0.8, 0.95] {
        let tau = (1.0 - p) / p;
        let ctx = QContext::for_tau(tau).unwrap();
        let (_, g_simple) = g_forms(tau, &ctx).unwrap();
        let direct = a_pq(p).unwrap();
        assert!(
            (g_simple - direct).abs() <= 1e-12 * (1.0 + direct),
            "p = {p}: {g_simple} vs {direct}"
        );
    }
}

#[test]
fn scaling_table_matches_closed_forms() {
    let step = scaling_constants(Model::TasepStep, Some(0.25), None).unwrap();
    assert_eq!(step.c1, 0.0);
    assert!((step.c2 - 0.5f64.cbrt()).abs() < 1e-15);
    assert!((step.delta_t(2.0) - 1.0).abs() < 1e-15);
    assert_eq!(step.a, 0.5);

    let flat = scaling_constants(Model::TasepFlat, None, None).unwrap();
    assert_eq!(flat.a, 0.5);
    assert_eq!(flat.c2, 1.0);
    assert!((flat.delta_t(8.0) - 0.5).abs() < 1e-15);
    assert!((flat.c1 - 0.5).abs() < 1e-15);

    let png = scaling_constants(Model::FlatPng, None, None).unwrap();
    assert_eq!(png.a, 0.0);
    assert_eq!(png.eta, -0.5);
    // delta_t = (2t)^{-1/3}
    assert!((png.delta_t(4.0) - 0.5).abs() < 1e-15);

    let droplet = scaling_constants(Model::DropletPng, None, None).unwrap();
    assert_eq!(droplet.c1, 2.0);
    assert_eq!(droplet.a, 0.5);
    assert!((droplet.delta_t(8.0) - 0.5).abs() < 1e-15);
}

#[test]
fn pasep_at_full_asymmetry_reduces_to_step_tasep() {
    let pasep = scaling_constants(Model::Pasep, Some(0.25), Some(1.0)).unwrap();
    let step = scaling_constants(Model::TasepStep, Some(0.25), None).unwrap();
    assert_eq!(pasep.c1, step.c1);
    assert_eq!(pasep.c2, step.c2);
    assert_eq!(pasep.a, step.a);
    assert_eq!(pasep.eta, step.eta);
    assert_eq!(pasep.sigma, step.sigma);
}

#[test]
fn pasep_shift_absorbs_asymmetry_series() {
    let p = 0.7;
    let sc = scaling_constants(Model::Pasep, Some(0.25), Some(p)).unwrap();
    let expected = 0.5 - a_pq(p).unwrap() / 0.5;
    assert!((sc.a - expected).abs() < 1e-15);
}

#[test]
fn shift_invariant_holds_for_every_model() {
    let all = [
        scaling_constants(Model::FlatPng, None, None).unwrap(),
        scaling_constants(Model::DropletPng, None, None).unwrap(),
        scaling_constants(Model::TasepFlat, None, None).unwrap(),
        scaling_constants(Model::TasepStep, Some(0.1), None).unwrap(),
        scaling_constants(Model::TasepStep, Some(0.25), None).unwrap(),
        scaling_constants(Model::Pasep, Some(0.25), Some(0.7)).unwrap(),
        scaling_constants(Model::Pasep, Some(0.5), Some(0.9)).unwrap(),
    ];
    for sc in all {
        assert!(
            (sc.a - (sc.eta + 0.5)).abs() < 1e-15,
            "a = eta + 1/2 violated for {:?}",
            sc.model
        );
        assert!(sc.c2 > 0.0);
    }
}

#[test]
fn scaling_constants_domain_errors() {
    assert!(scaling_constants(Model::TasepStep, None, None).is_err());
    assert!(scaling_constants(Model::TasepStep, Some(1.5), None).is_err());
    assert!(scaling_constants(Model::Pasep, Some(0.25), None).is_err());
    assert!(scaling_constants(Model::Pasep, Some(0.25), Some(0.4)).is_err());
    assert!(scaling_constants(Model::Pasep, None, Some(0.7)).is_err());
}

proptest! {
    #[test]
    fn step_constants_satisfy_closed_forms(sigma in 0.01f64..0.99) {
        let sc = scaling_constants(Model::TasepStep, Some(sigma), None).unwrap();
        let root = sigma.sqrt();
        prop_assert!((sc.c1 - (1.0 - 2.0 * root)).abs() < 1e-14);
        prop_assert!((sc.c2 - sigma.powf(-1.0/6.0) * (1.0 - root).powf(2.0/3.0)).abs() < 1e-14);
        // delta_t(t) * c2 * t^{1/3} = 1
        prop_assert!((sc.delta_t(123.0) * sc.c2 * 123.0f64.cbrt() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn asymmetry_series_dominates_height_shift(p in 0.55f64..0.999) {
        let shift = height_shift(p).unwrap();
        let series = a_pq(p).unwrap();
        prop_assert!((shift - (2.0 * series - 1.0)).abs() < 1e-14);
        prop_assert!(series > 0.0);
    }
}
