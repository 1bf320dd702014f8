mod common;

use common::*;
use lftnav_core::cr3bp::{lpv_deriv, sigma_psi, truth_deriv, ParameterBox, Rho, State};
use lftnav_core::numkernel::Matrix;
use lftnav_core::ode::{integrate, OdeOptions};
use lftnav_core::runtime::{metrics, observer_deriv, run_closed_loop, write_result_csv, RhoSchedule, SimConfig, SimResult};
use lftnav_core::sensing::{measure, NoiseSpec, NoiseWeights};
use lftnav_core::synthesis::error_dynamics;
use proptest::prelude::*;

/// Box wide enough that the reference trajectory never touches the clamp.
fn wide() -> ParameterBox<f64> {
    ParameterBox::new(0.02, 2.5, 0.02, 2.5).unwrap()
}

fn config(l: Matrix<f64>, noise: NoiseSpec<f64>, t_end: f64) -> SimConfig<f64> {
    SimConfig {
        pi2: PI2,
        x0: x0(),
        xhat0: xhat0(),
        bounds: wide(),
        noise,
        gain: plain_gain(l),
        t_end,
        sample_dt: 0.01,
        schedule: RhoSchedule::ContinuousTrue,
        ode: OdeOptions::default(),
    }
}

fn state(x: f64, y: f64, vx: f64, vy: f64) -> State<f64> {
    State::new(x, y, vx, vy)
}

proptest! {
    #[test]
    fn zero_gain_is_open_loop(x in -1.0f64..1.2, y in 0.1f64..1.0, vx in -1.0f64..1.0, vy in -1.0f64..1.0, m in prop::array::uniform4(-1.0f64..1.0)) {
        let s = state(x, y, vx, vy);
        let rho = sigma_psi(&s, PI2).unwrap();
        let got = observer_deriv(&s, &m, rho, &Matrix::zeros(4, 4), PI2);
        let want = lpv_deriv(&s, PI2, [0.0, 0.0]).unwrap();
        for i in 0..4 {
            prop_assert!((got[i] - want[i]).abs() <= 1e-12 * want[i].abs().max(1.0));
        }
    }

    #[test]
    fn exact_estimate_follows_truth(x in -1.0f64..1.2, y in 0.1f64..1.0, vx in -1.0f64..1.0, vy in -1.0f64..1.0, k in 0.0f64..5.0) {
        let s = state(x, y, vx, vy);
        let rho = sigma_psi(&s, PI2).unwrap();
        let ym = measure(&s, PI2).unwrap();
        let got = observer_deriv(&s, &ym, rho, &injection_gain(k), PI2);
        let want = truth_deriv(&s, PI2, [0.0, 0.0]).unwrap();
        for i in 0..4 {
            prop_assert!((got[i] - want[i]).abs() <= 1e-12 * want[i].abs().max(1.0));
        }
    }

    #[test]
    fn error_derivative_is_linear_in_error(
        x in -1.0f64..1.2, y in 0.1f64..1.0, vx in -1.0f64..1.0, vy in -1.0f64..1.0,
        e in prop::array::uniform4(-0.2f64..0.2),
        w in prop::array::uniform6(-1.0f64..1.0),
        k in 0.0f64..5.0,
    ) {
        let s = state(x, y, vx, vy);
        let sh = state(x - e[0], y - e[1], vx - e[2], vy - e[3]);
        let rho = sigma_psi(&s, PI2).unwrap();
        let bx = scenario_box();
        let spec = NoiseSpec::earth_moon();
        let weights = NoiseWeights::new(&bx, &spec).unwrap();
        let l = injection_gain(k);
        let wt = weights.at(rho);
        let mut ym = measure(&s, PI2).unwrap();
        for i in 0..4 {
            ym[i] += wt[i] * w[2 + i];
        }
        let dx = truth_deriv(&s, PI2, [w[0], w[1]]).unwrap();
        let dxh = observer_deriv(&sh, &ym, rho, &l, PI2);
        let sys = error_dynamics(rho, &l, PI2, &weights);
        let lin: Vec<f64> = {
            let a = sys.acl.mul_vec(&e);
            let b = sys.bcl.mul_vec(&w);
            (0..4).map(|i| a[i] + b[i]).collect()
        };
        for i in 0..4 {
            let got = dx[i] - dxh[i];
            prop_assert!((got - lin[i]).abs() <= 1e-10 * lin[i].abs().max(1.0), "{i}: {got} vs {}", lin[i]);
        }
    }
}

#[test]
fn closed_loop_error_matches_error_dynamics() {
    let l = injection_gain(1.0);
    let cfg = config(l.clone(), NoiseSpec::earth_moon().noiseless(), 5.0);
    let r = run_closed_loop(&cfg).unwrap();
    assert!(r.rho_true.iter().all(|p| wide().contains(*p)));

    // truth and error co-integrated, ė = (A(ρ) + L C_y(ρ)) e
    let e0: Vec<f64> = (0..4).map(|i| x0().to_array()[i] - xhat0().to_array()[i]).collect();
    let y0: Vec<f64> = x0().to_array().into_iter().chain(e0).collect();
    let traj = integrate(
        |_, s, ds| {
            let x = [s[0], s[1], s[2], s[3]];
            let rho = sigma_psi(&State::from_slice(&x), PI2).map_err(|e| e.to_string())?;
            let d = direct(rho, PI2, &wide(), (0.0, 0.0));
            let f = newton_rhs(&x, PI2);
            ds[..4].copy_from_slice(&f);
            for i in 0..4 {
                let mut v = 0.0;
                for j in 0..4 {
                    let mut acl = d.a[i][j];
                    for k in 0..4 {
                        acl += l[(i, k)] * d.cy[k][j];
                    }
                    v += acl * s[4 + j];
                }
                ds[4 + i] = v;
            }
            Ok(())
        },
        0.0,
        &y0,
        5.0,
        &r.times,
        &OdeOptions::with_tol(1e-12),
    )
    .unwrap();
    let mut worst = 0.0f64;
    for (k, s) in traj.states.iter().enumerate() {
        let scale = s[4..].iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for i in 0..4 {
            let e = r.truth[k][i] - r.estimate[k][i];
            worst = worst.max((e - s[4 + i]).abs() / scale);
        }
    }
    assert!(worst < 1e-8, "worst {worst:e}");
}

#[test]
fn exact_start_without_noise_stays_exact() {
    let mut cfg = config(injection_gain(2.0), NoiseSpec::earth_moon().noiseless(), 2.0);
    cfg.xhat0 = cfg.x0;
    let r = run_closed_loop(&cfg).unwrap();
    assert!(r.error_norms().iter().all(|&v| v == 0.0 || v < 1e-13));
}

fn csv_bytes(r: &SimResult<f64>) -> Vec<u8> {
    let mut buf = Vec::new();
    write_result_csv(r, &mut buf).unwrap();
    buf
}

#[test]
fn seeded_runs_are_byte_identical() {
    let mut spec = NoiseSpec::earth_moon();
    spec.seed = 42;
    let cfg = config(injection_gain(1.0), spec, 1.0);
    let a = csv_bytes(&run_closed_loop(&cfg).unwrap());
    let b = csv_bytes(&run_closed_loop(&cfg).unwrap());
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.noise.seed = 43;
    assert_ne!(a, csv_bytes(&run_closed_loop(&other).unwrap()));
    let header = String::from_utf8(a).unwrap();
    assert!(header.starts_with("t,x,y,vx,vy,x_hat,y_hat,vx_hat,vy_hat,z_err_x,z_err_y,y_m1,y_m2,y_m3,y_m4,sigma_hat,psi_hat,z_err_norm\n"));
}

#[test]
fn sampling_grid() {
    let cfg = config(injection_gain(1.0), NoiseSpec::earth_moon().noiseless(), 0.5);
    let r = run_closed_loop(&cfg).unwrap();
    assert_eq!(r.len(), 51);
    assert_eq!(r.times[0], 0.0);
    assert!((r.times[50] - 0.5).abs() < 1e-12);
    assert!(r.times.windows(2).all(|w| (w[1] - w[0] - 0.01).abs() < 1e-9));
}

#[test]
fn measured_schedule_runs() {
    let mut cfg = config(injection_gain(1.0), NoiseSpec::earth_moon(), 0.5);
    cfg.bounds = scenario_box();
    cfg.schedule = RhoSchedule::MeasuredHeld;
    let r = run_closed_loop(&cfg).unwrap();
    assert_eq!(r.len(), 51);
    assert!(r.rho_hat.iter().all(|p| scenario_box().contains(*p)));
    assert!(r.rho_hat.iter().zip(&r.rho_true).any(|(h, t)| h != t));
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = config(injection_gain(1.0), NoiseSpec::earth_moon(), 1.0);
    cfg.t_end = -1.0;
    assert!(run_closed_loop(&cfg).is_err());
    let mut cfg = config(Matrix::zeros(4, 2), NoiseSpec::earth_moon(), 1.0);
    assert!(run_closed_loop(&cfg).is_err());
    cfg.gain.l = Matrix::zeros(4, 4);
    cfg.x0 = State::new(-PI2, 0.0, 0.0, 0.0);
    assert!(run_closed_loop(&cfg).is_err());
}

fn synthetic(errors: &[[f64; 2]]) -> SimResult<f64> {
    let n = errors.len();
    SimResult {
        times: (0..n).map(|i| i as f64).collect(),
        truth: vec![[0.0; 4]; n],
        estimate: vec![[0.0; 4]; n],
        z_hat: vec![[0.0; 2]; n],
        z_err: errors.to_vec(),
        measurements: vec![[0.0; 4]; n],
        noise: vec![[0.0; 6]; n],
        rho_hat: vec![Rho::new(0.5, 0.5); n],
        rho_true: (0..n).map(|i| Rho::new(0.5 + i as f64, 0.5)).collect(),
    }
}

#[test]
fn metrics_examples() {
    let m = metrics(&synthetic(&[[0.0, 0.0]; 5]));
    assert_eq!((m.rms, m.max), (0.0, 0.0));
    assert_eq!(m.settling_time, Some(0.0));
    assert_eq!(m.range_correlation, None);

    let m = metrics(&synthetic(&[[-3.0, 0.0]; 5]));
    assert!((m.rms - 3.0).abs() < 1e-15 && (m.max - 3.0).abs() < 1e-15);

    // 3-4-5 decays below 1% at t = 3; errors grow with range in the window
    let m = metrics(&synthetic(&[[3.0, 4.0], [1.0, 0.0], [0.1, 0.0], [0.01, 0.0], [0.02, 0.0], [0.03, 0.0]]));
    assert_eq!(m.initial_error, 5.0);
    assert_eq!(m.settling_time, Some(3.0));
    assert!(m.range_correlation.unwrap() > 0.99);

    let m = metrics(&synthetic(&[[1.0, 0.0], [0.0, 0.0], [1.0, 0.0]]));
    assert_eq!(m.settling_time, None);
}
