mod common;

use common::*;
use lftnav_core::cr3bp::{ParameterBox, Rho, PSI, SIGMA};
use lftnav_core::lft::{DeltaAssignment, LftError, LftModel, UncertainReal};
use lftnav_core::numkernel::{inverse, Matrix};
use lftnav_core::plant::PlantLft;
use lftnav_core::sensing::{NoiseSpec, NoiseWeights};
use proptest::prelude::*;

fn delta1(label: &str, d: f64) -> DeltaAssignment<f64> {
    DeltaAssignment::from_pairs([(label, d)]).unwrap()
}

fn bounds() -> impl Strategy<Value = (f64, f64)> {
    (0.05f64..5.0, 0.0f64..3.0).prop_map(|(lo, w)| (lo, lo + w))
}

proptest! {
    #[test]
    fn normalize_round_trips((lo, hi) in bounds(), u in 0.0f64..=1.0) {
        let p = UncertainReal::new(lo, hi, "p").unwrap();
        let v = lo + u * (hi - lo);
        prop_assert!((p.value(p.normalize(v)) - v).abs() <= 1e-14 * hi);
        prop_assert_eq!(p.value(-1.0), lo);
        prop_assert_eq!(p.value(1.0), hi);
    }

    #[test]
    fn parameter_and_reciprocal_are_exact((lo, hi) in bounds(), d in -1.0f64..=1.0) {
        let p = UncertainReal::new(lo, hi, "p").unwrap();
        let v = p.value(d);
        let m = p.to_lft().eval(&delta1("p", d)).unwrap();
        prop_assert!(rel_err(m[(0, 0)], v) < 1e-14);
        let r = p.reciprocal_lft().eval(&delta1("p", d)).unwrap();
        prop_assert!(rel_err(r[(0, 0)], 1.0 / v) < 1e-13);
    }

    #[test]
    fn algebra_commutes_with_evaluation(
        (lo, hi) in bounds(),
        (lo2, hi2) in bounds(),
        d1 in -1.0f64..=1.0,
        d2 in -1.0f64..=1.0,
        c in -3.0f64..3.0,
    ) {
        let p = UncertainReal::new(lo, hi, "p").unwrap();
        let q = UncertainReal::new(lo2, hi2, "q").unwrap();
        let (pv, qv) = (p.value(d1), q.value(d2));
        let delta = DeltaAssignment::from_pairs([("p", d1), ("q", d2)]).unwrap();
        let ev = |m: &LftModel<f64>| m.eval(&delta).unwrap()[(0, 0)];
        let sum = p.to_lft().add(&q.reciprocal_lft()).unwrap();
        prop_assert!((ev(&sum) - (pv + 1.0 / qv)).abs() <= 1e-12 * (pv + 1.0 / qv).abs());
        let prod = p.to_lft().mul(&q.to_lft()).unwrap().scale(c);
        prop_assert!((ev(&prod) - c * pv * qv).abs() <= 1e-12 * (c * pv * qv).abs().max(1e-12));
        let cube = p.reciprocal_lft().mul(&p.reciprocal_lft()).unwrap().mul(&p.reciprocal_lft()).unwrap();
        prop_assert!(rel_err(ev(&cube), pv.powi(-3)) < 1e-12);
        prop_assert_eq!(cube.repetitions("p"), 3);
    }

    #[test]
    fn inverse_matches_pointwise_inverse((lo, hi) in bounds(), d in -1.0f64..=1.0) {
        // [[p, 1], [0, 2]] has inverse [[1/p, −1/(2p)], [0, 1/2]]
        let p = UncertainReal::new(lo, hi, "p").unwrap();
        let one = |r, c| {
            let mut m = Matrix::zeros(2, 2);
            m[(r, c)] = 1.0;
            LftModel::constant(m)
        };
        let m = one(0, 0).mul(&p.to_lft().kron_identity(2)).unwrap().mul(&one(0, 0)).unwrap()
            .add(&one(0, 1)).unwrap()
            .add(&one(1, 1).scale(2.0)).unwrap();
        let inv = m.inverse().unwrap();
        let got = inv.eval(&delta1("p", d)).unwrap();
        let want = inverse(&m.eval(&delta1("p", d)).unwrap()).unwrap();
        prop_assert!((&got - &want).max_abs() <= 1e-12 * want.max_abs());
    }

    #[test]
    fn plant_lft_matches_rational_formulas(u in 0.0f64..=1.0, v in 0.0f64..=1.0) {
        let bx = scenario_box();
        let spec = NoiseSpec::earth_moon();
        let plant = PlantLft::new(&bx, PI2, &NoiseWeights::new(&bx, &spec).unwrap()).unwrap();
        let rho = lerp(&bx, u, v);
        let got = plant.eval(rho).unwrap();
        let want = direct(rho, PI2, &bx, (50.0 * ARCSEC, 500.0 * ARCSEC));
        prop_assert!(mat_rel_err(&got.a, &want.a) <= 1e-10);
        prop_assert!(mat_rel_err(&got.cy, &want.cy) <= 1e-10);
        prop_assert!(vec_rel_err(&got.b, &want.b) <= 1e-10);
        prop_assert!(vec_rel_err(&got.d, &want.d) <= 1e-10);
        for i in 0..4 {
            prop_assert!(rel_err(got.dw[(i, 2 + i)], want.w[i]) <= 1e-10);
        }
    }
}

#[test]
fn plant_channel_structure() {
    let bx = scenario_box();
    let plant = PlantLft::new(&bx, PI2, &NoiseWeights::new(&bx, &NoiseSpec::earth_moon()).unwrap()).unwrap();
    let s = plant.model.structure();
    assert_eq!(s, vec![(SIGMA.to_string(), 13), (PSI.to_string(), 13)]);
    assert_eq!(plant.model.shape(), (8, 11));
    assert!(plant.model.well_posed(1).well_posed);
}

#[test]
fn corners_are_exact() {
    let bx = scenario_box();
    let plant = PlantLft::new(&bx, PI2, &NoiseWeights::new(&bx, &NoiseSpec::earth_moon()).unwrap()).unwrap();
    for rho in [
        Rho::new(bx.sigma_min, bx.psi_min),
        Rho::new(bx.sigma_max, bx.psi_max),
        Rho::new(bx.sigma_min, bx.psi_max),
    ] {
        let got = plant.eval(rho).unwrap();
        let want = direct(rho, PI2, &bx, (50.0 * ARCSEC, 500.0 * ARCSEC));
        assert!(mat_rel_err(&got.a, &want.a) < 1e-12);
        assert!((got.dw[(0, 2)] - want.w[0]).abs() < 1e-12 * want.w[0]);
    }
}

#[test]
fn invalid_and_singular_inputs() {
    assert!(matches!(UncertainReal::new(0.0, 1.0, "p"), Err(LftError::InvalidBounds { .. })));
    assert!(matches!(UncertainReal::new(2.0, 1.0, "p"), Err(LftError::InvalidBounds { .. })));
    // p spans [-1, 1] through zero: 1/p is not realizable
    let m = LftModel::from_parts(
        Matrix::zeros(1, 1),
        Matrix::scalar(1.0),
        Matrix::scalar(1.0),
        Matrix::scalar(0.0),
        vec!["p".into()],
    );
    assert!(m.inverse().is_err());
    let pt = ParameterBox::point(Rho::new(0.5, 0.7));
    let w = NoiseWeights::new(&scenario_box(), &NoiseSpec::earth_moon()).unwrap();
    let plant = PlantLft::new(&pt, PI2, &w).unwrap();
    let got = plant.eval(Rho::new(0.5, 0.7)).unwrap();
    let want = direct(Rho::new(0.5, 0.7), PI2, &scenario_box(), (50.0 * ARCSEC, 500.0 * ARCSEC));
    assert!(mat_rel_err(&got.a, &want.a) < 1e-12);
}
