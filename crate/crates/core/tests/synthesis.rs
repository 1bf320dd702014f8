mod common;

use std::sync::OnceLock;

use common::*;
use lftnav_core::artifact::GainArtifact;
use lftnav_core::cr3bp::{ParameterBox, Rho};
use lftnav_core::numkernel::Matrix;
use lftnav_core::sensing::NoiseSpec;
use lftnav_core::synthesis::{
    brl_max_eig, certify_random, dk_iterate, hinf_norm_grid, hurwitz, structured_gain_lower_bound, synthesize_hinf,
    synthesize_on_points, DkResult, Method, ObserverGain, SynthesisOptions, SynthesisProblem,
};

fn problem() -> SynthesisProblem<f64> {
    SynthesisProblem::new(&scenario_box(), PI2, &NoiseSpec::earth_moon(), &scenario_box()).unwrap()
}

fn hinf() -> &'static ObserverGain<f64> {
    static G: OnceLock<ObserverGain<f64>> = OnceLock::new();
    G.get_or_init(|| synthesize_hinf(&problem(), &SynthesisOptions::default()).unwrap())
}

fn dk() -> &'static DkResult<f64> {
    static D: OnceLock<DkResult<f64>> = OnceLock::new();
    D.get_or_init(|| dk_iterate(&problem(), &SynthesisOptions::default()).unwrap())
}

#[test]
fn hinf_gain_certifies_on_grid() {
    let g = hinf();
    let p = problem();
    assert_eq!(g.method, Method::Hinf);
    assert_eq!(g.grid.len(), 9);
    assert!(g.gamma.is_finite() && g.gamma > 0.0);
    assert!(g.lambda.iter().all(|&l| (l - g.gamma * g.gamma).abs() <= 1e-12 * l));
    for &rho in &g.grid {
        let sys = p.error_system(rho, &g.l).unwrap();
        assert!(hurwitz(&sys.acl));
        assert!(brl_max_eig(&sys, &g.p, &g.lambda).unwrap() < 0.0);
        assert!(hinf_norm_grid(&sys, 400).unwrap().norm <= g.gamma * (1.0 + 1e-6));
    }
    assert!(g.gamma_lo <= g.gamma);
    assert!((g.gamma - g.gamma_lo) / g.gamma <= 1e-3 + 1e-12);
}

#[test]
fn random_certification_of_hinf_gain() {
    let r = certify_random(hinf(), &problem(), 200, 9).unwrap();
    assert!(r.grid_ok());
    assert!(r.random_pass_rate() >= 0.999, "{:?}", r.violations.first());
}

#[test]
fn corrupted_gains_fail_certification() {
    let mut flipped = hinf().clone();
    flipped.l = flipped.l.scale(-1.0);
    let r = certify_random(&flipped, &problem(), 20, 1).unwrap();
    assert!(!r.grid_ok());
    assert!(r.violations.iter().any(|v| !v.hurwitz));

    let mut zero = hinf().clone();
    zero.l = Matrix::zeros(4, 4);
    let r = certify_random(&zero, &problem(), 20, 1).unwrap();
    assert!(!r.grid_ok() && r.random_passed == 0);
}

#[test]
fn point_box_level_is_the_closed_loop_norm() {
    let rho = Rho::new(0.5, 0.7);
    let p = SynthesisProblem::new(&ParameterBox::point(rho), PI2, &NoiseSpec::earth_moon(), &scenario_box()).unwrap();
    let g = synthesize_hinf(&p, &SynthesisOptions::default()).unwrap();
    let norm = hinf_norm_grid(&p.error_system(rho, &g.l).unwrap(), 2000).unwrap().norm;
    assert!(norm <= g.gamma * (1.0 + 1e-6));
    assert!((g.gamma - norm) / norm <= 0.05, "gamma {} norm {}", g.gamma, norm);
    // a single point is easier than the whole box
    assert!(g.gamma < hinf().gamma);
}

#[test]
fn more_points_never_lower_the_synthesis_level() {
    let p = problem();
    let opts = SynthesisOptions::default();
    let a = vec![Rho::new(0.3, 0.5)];
    let b = vec![Rho::new(0.3, 0.5), Rho::new(0.8, 1.5)];
    let ga = synthesize_on_points(&p, &a, &opts).unwrap();
    let gb = synthesize_on_points(&p, &b, &opts).unwrap();
    assert!(gb.synthesis_gamma >= ga.synthesis_gamma * (1.0 - 2e-3), "{} < {}", gb.synthesis_gamma, ga.synthesis_gamma);
}

#[test]
fn invalid_options_are_rejected() {
    let p = problem();
    let opts = SynthesisOptions { grid: 1, ..SynthesisOptions::default() };
    assert!(synthesize_hinf(&p, &opts).is_err());
    let opts = SynthesisOptions { gamma_lo: 2.0, gamma_hi: 1.0, ..SynthesisOptions::default() };
    assert!(synthesize_hinf(&p, &opts).is_err());
}

#[test]
fn dk_history_is_monotone_and_scales_are_structured() {
    let d = dk();
    assert_eq!(d.gain.method, Method::DkScaled);
    assert!((d.history[0] - hinf().gamma).abs() <= 1e-9 * hinf().gamma);
    assert_eq!(d.history[0], d.unscaled_gamma);
    assert!(d.history.windows(2).all(|w| w[1] <= w[0]));
    assert!(*d.history.last().unwrap() <= d.unscaled_gamma + 1e-6);
    assert!((d.gain.gamma - d.gain.certificate_level()).abs() <= 1e-12 * d.gain.gamma);

    let col = d.blocks.column_block();
    for (j, &g) in col.iter().enumerate() {
        for (k, &h) in col.iter().enumerate() {
            if g == h {
                assert_eq!(d.gain.lambda[j], d.gain.lambda[k]);
            }
        }
    }
    assert_eq!(d.scales[d.blocks.fixed_block().unwrap()], 1.0);
    assert!(d.scales.iter().all(|&s| s > 0.0 && s.is_finite()));
}

#[test]
fn dk_certificate_holds_and_bounds_the_structured_gain() {
    let d = dk();
    let p = problem();
    for &rho in &d.gain.grid {
        let sys = p.error_system(rho, &d.gain.l).unwrap();
        assert!(hurwitz(&sys.acl));
        assert!(brl_max_eig(&sys, &d.gain.p, &d.gain.lambda).unwrap() < 0.0);
        let lb = structured_gain_lower_bound(&sys, &d.blocks, 60).unwrap();
        assert!(lb <= d.gain.gamma * (1.0 + 1e-6), "lower bound {lb} above {}", d.gain.gamma);
    }
    let r = certify_random(&d.gain, &p, 100, 4).unwrap();
    assert!(r.grid_ok() && r.random_pass_rate() >= 0.999);
}

#[test]
fn artifact_round_trips_real_gains() {
    for gain in [hinf().clone(), dk().gain.clone()] {
        let a = GainArtifact { gain, bounds: scenario_box(), config_hash: "abc".into() };
        let json = a.to_json();
        let back = GainArtifact::from_json(&json).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.to_json(), json);
    }
}
