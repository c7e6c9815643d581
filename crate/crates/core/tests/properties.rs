use std::f64::consts::PI;
use std::sync::Arc;

use hcma_core::ivp::GeodesicSeries;
use hcma_core::oracle::RotationRay;
use hcma_core::ray::{length, mabuchi_inner, PathInH};
use hcma_core::surface::{
    differentiate, integrate, metric_from_potential, DerivativeMode, KahlerMetric, ModelSurface, ScalarField,
};
use proptest::prelude::*;

fn torus() -> (ModelSurface, KahlerMetric) {
    let m = ModelSurface::unit_torus(32).unwrap();
    let g = KahlerMetric::flat(&m).unwrap();
    (m, g)
}

/// A low-mode trigonometric field with the given coefficients.
fn trig(m: &ModelSurface, c: &[f64; 5]) -> ScalarField {
    ScalarField::from_torus_fn(m, |x, y| {
        let (u, v) = (2.0 * PI * x, 2.0 * PI * y);
        c[0] + c[1] * u.cos() + c[2] * v.sin() + c[3] * (u + v).cos() + c[4] * (u - v).sin()
    })
    .unwrap()
}

fn coeffs(scale: f64) -> impl Strategy<Value = [f64; 5]> {
    prop::array::uniform5(-scale..scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dz_and_dzbar_are_conjugate(c in coeffs(1.0)) {
        let (m, _) = torus();
        let f = trig(&m, &c);
        let dz = differentiate(&f, DerivativeMode::Dz).unwrap();
        let dzbar = differentiate(&f, DerivativeMode::Dzbar).unwrap();
        prop_assert!((&dz - &dzbar.conj()).sup_norm() < 1e-12);
    }

    #[test]
    fn radial_dz_and_dzbar_are_conjugate(a in -1.0..1.0f64, b in -1.0..1.0f64) {
        let m = ModelSurface::radial_cp1(64, 50.0).unwrap();
        let f = ScalarField::from_radial_s_fn(&m, |s| a * s + b * s * s).unwrap();
        let dz = differentiate(&f, DerivativeMode::Dz).unwrap();
        let dzbar = differentiate(&f, DerivativeMode::Dzbar).unwrap();
        prop_assert!((&dz - &dzbar.conj()).sup_norm() < 1e-12);
    }

    #[test]
    fn laplacian_integrates_to_zero(c in coeffs(1.0)) {
        let (m, g) = torus();
        let f = trig(&m, &c).map(f64::exp);
        prop_assert!(integrate(&f.dzdzbar(), &g).unwrap().abs() < 1e-12);
    }

    #[test]
    fn zero_potential_returns_the_base(c in coeffs(1.0), shift in 1.5..3.0f64) {
        let (m, _) = torus();
        let g = KahlerMetric::from_coefficient(trig(&m, &c).map(|v| v.abs() + shift)).unwrap();
        let same = metric_from_potential(&g, &ScalarField::zeros(&m)).unwrap();
        prop_assert_eq!(same.coefficient().values(), g.coefficient().values());
    }

    #[test]
    fn time_reversal_flips_odd_coefficients(c in coeffs(0.01)) {
        let (m, g) = torus();
        let psi = trig(&m, &c);
        let forward = GeodesicSeries::solve(&g, &psi, 6).unwrap();
        let backward = GeodesicSeries::solve(&g, &(&psi * -1.0), 6).unwrap();
        for k in 1..=6 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let a = forward.theta(k).unwrap();
            let b = backward.theta(k).unwrap();
            prop_assert!((&(a * sign) - b).sup_norm() <= 1e-12 * a.sup_norm().max(1e-300));
        }
    }

    #[test]
    fn constant_shift_changes_only_the_velocity(c in coeffs(0.01), shift in -2.0..2.0f64) {
        let (m, g) = torus();
        let psi = trig(&m, &c);
        let plain = GeodesicSeries::solve(&g, &psi, 5).unwrap();
        let shifted = GeodesicSeries::solve(&g, &psi.map(|v| v + shift), 5).unwrap();
        let d1 = (shifted.theta(1).unwrap() - plain.theta(1).unwrap()).map(|v| v - shift);
        prop_assert!(d1.sup_norm() < 1e-14);
        for k in 2..=5 {
            let (a, b) = (plain.theta(k).unwrap(), shifted.theta(k).unwrap());
            prop_assert!((a - b).sup_norm() <= 1e-12 * a.sup_norm().max(1e-300));
        }
    }

    #[test]
    fn inner_product_is_symmetric_and_linear(
        p in coeffs(1.0), q in coeffs(1.0), r in coeffs(1.0), phi in coeffs(0.01), a in -3.0..3.0f64,
    ) {
        let (m, g) = torus();
        let (p, q, r, phi) = (trig(&m, &p), trig(&m, &q), trig(&m, &r), trig(&m, &phi));
        let pq = mabuchi_inner(&p, &q, &phi, &g).unwrap();
        let qp = mabuchi_inner(&q, &p, &phi, &g).unwrap();
        prop_assert!((pq - qp).abs() <= 1e-13 * (1.0 + pq.abs()));
        let combo = &(&p * a) + &r;
        let lhs = mabuchi_inner(&combo, &q, &phi, &g).unwrap();
        let rhs = a * pq + mabuchi_inner(&r, &q, &phi, &g).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        let pp = mabuchi_inner(&p, &p, &phi, &g).unwrap();
        prop_assert!(pp >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn length_is_additive(t1 in 0.1..0.9f64) {
        let m = ModelSurface::radial_cp1(128, 50.0).unwrap();
        let path = PathInH::from_family(Arc::new(RotationRay::new(&m).unwrap()));
        let whole = length(&path, 0.0, 1.0).unwrap();
        let parts = length(&path, 0.0, t1).unwrap() + length(&path, t1, 1.0).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-9 * whole);
    }

    #[test]
    fn series_length_is_additive(c in coeffs(0.01), t1 in 0.02..0.08f64) {
        let (m, g) = torus();
        let path = PathInH::from_series(GeodesicSeries::solve(&g, &trig(&m, &c), 6).unwrap());
        let whole = length(&path, 0.0, 0.1).unwrap();
        let parts = length(&path, 0.0, t1).unwrap() + length(&path, t1, 0.1).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-9 * whole.max(1e-12));
    }
}
