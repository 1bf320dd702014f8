//! Dormand–Prince 5(4) integrator with dense output.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("step limit {max_steps} reached at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },
    #[error("derivative failed at t = {t}: {message}")]
    Derivative { t: f64, message: String },
    #[error("invalid integration request: {0}")]
    Invalid(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<T>,
    pub max_steps: usize,
}

impl<T: Real> Default for OdeOptions<T> {
    fn default() -> Self {
        Self { abs_tol: T::lit(1e-12), rel_tol: T::lit(1e-12), h_init: None, max_steps: 5_000_000 }
    }
}

impl<T: Real> OdeOptions<T> {
    pub fn with_tol(tol: T) -> Self {
        Self { abs_tol: tol, rel_tol: tol, ..Self::default() }
    }
}

/// States at the requested sample times plus the end state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub final_state: Vec<T>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Last accepted step, useful to warm-start a following segment.
    pub last_step: T,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy<T: Real>(out: &mut [T], y: &[T], h: T, terms: &[(f64, &[T])]) {
    for i in 0..out.len() {
        let mut s = T::zero();
        for &(c, k) in terms {
            s += T::lit(c) * k[i];
        }
        out[i] = y[i] + h * s;
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` and samples the solution at
/// `samples` (ascending, inside `[t0, t1]`) by dense output.
///
/// `f` writes the derivative into its third argument and may fail, in which
/// case integration stops with [`OdeError::Derivative`].
pub fn integrate<T, F>(
    mut f: F,
    t0: T,
    y0: &[T],
    t1: T,
    samples: &[T],
    opts: &OdeOptions<T>,
) -> Result<Trajectory<T>, OdeError>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]) -> Result<(), String>,
{
    if !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(OdeError::Invalid("t_span must be finite and ascending"));
    }
    if !(opts.abs_tol > T::zero() && opts.rel_tol > T::zero()) {
        return Err(OdeError::Invalid("tolerances must be positive"));
    }
    if samples.windows(2).any(|w| w[1] < w[0]) || samples.iter().any(|&s| s < t0 || s > t1) {
        return Err(OdeError::Invalid("sample times must be ascending within t_span"));
    }
    let n = y0.len();
    let mut eval = |t: T, y: &[T], out: &mut [T]| {
        f(t, y, out).map_err(|message| OdeError::Derivative { t: t.to_f64_lossy(), message })
    };

    let mut traj = Trajectory {
        times: Vec::with_capacity(samples.len()),
        states: Vec::with_capacity(samples.len()),
        final_state: y0.to_vec(),
        accepted_steps: 0,
        rejected_steps: 0,
        last_step: T::zero(),
    };
    let mut next = 0;
    while next < samples.len() && samples[next] == t0 {
        traj.times.push(t0);
        traj.states.push(y0.to_vec());
        next += 1;
    }
    if t1 == t0 {
        return Ok(traj);
    }

    let mut y = y0.to_vec();
    let mut k1 = vec![T::zero(); n];
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (k1.clone(), k1.clone(), k1.clone(), k1.clone(), k1.clone(), k1.clone());
    let mut tmp = vec![T::zero(); n];
    let mut ynew = vec![T::zero(); n];
    eval(t0, &y, &mut k1)?;

    let span = t1 - t0;
    let sc = |a: T, b: T| opts.abs_tol + opts.rel_tol * a.abs().max(b.abs());
    let rms = |v: &[T]| -> T {
        if v.is_empty() {
            return T::zero();
        }
        (v.iter().map(|&x| x * x).sum::<T>() / T::from_usize_lossy(v.len())).sqrt()
    };

    let mut h = match opts.h_init {
        Some(h) => h.min(span),
        None => {
            let d0 = rms(&y.iter().map(|&v| v / sc(v, v)).collect::<Vec<_>>());
            let d1 = rms(&k1.iter().zip(&y).map(|(&k, &v)| k / sc(v, v)).collect::<Vec<_>>());
            let mut h0 = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) { T::lit(1e-6) } else { T::lit(0.01) * d0 / d1 };
            h0 = h0.min(span);
            axpy(&mut tmp, &y, h0, &[(1.0, &k1)]);
            eval(t0 + h0, &tmp, &mut k2)?;
            let d2 = rms(&k2.iter().zip(&k1).zip(&y).map(|((&a, &b), &v)| (a - b) / sc(v, v)).collect::<Vec<_>>()) / h0;
            let m = d1.max(d2);
            let h1 = if m <= T::lit(1e-15) {
                (h0 * T::lit(1e-3)).max(T::lit(1e-6))
            } else {
                (T::lit(0.01) / m).powf(T::lit(0.2))
            };
            (T::lit(100.0) * h0).min(h1).min(span)
        }
    };

    let mut t = t0;
    let safety = T::lit(0.9);
    let fac_min = T::lit(0.2);
    let fac_max = T::lit(10.0);
    let mut steps = 0usize;
    let mut last_rejected = false;
    while t < t1 {
        if steps >= opts.max_steps {
            return Err(OdeError::TooManySteps { t: t.to_f64_lossy(), max_steps: opts.max_steps });
        }
        steps += 1;
        let mut last = false;
        if t + h >= t1 || (t1 - (t + h)) < T::epsilon() * t1.abs().max(T::one()) * T::lit(16.0) {
            h = t1 - t;
            last = true;
        }
        if h <= T::epsilon() * t.abs().max(T::one()) * T::lit(16.0) {
            return Err(OdeError::StepUnderflow { t: t.to_f64_lossy() });
        }

        axpy(&mut tmp, &y, h, &[(A21, &k1)]);
        eval(t + T::lit(C2) * h, &tmp, &mut k2)?;
        axpy(&mut tmp, &y, h, &[(A31, &k1), (A32, &k2)]);
        eval(t + T::lit(C3) * h, &tmp, &mut k3)?;
        axpy(&mut tmp, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        eval(t + T::lit(C4) * h, &tmp, &mut k4)?;
        axpy(&mut tmp, &y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        eval(t + T::lit(C5) * h, &tmp, &mut k5)?;
        axpy(&mut tmp, &y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        eval(t + h, &tmp, &mut k6)?;
        axpy(&mut ynew, &y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let tn = if last { t1 } else { t + h };
        eval(tn, &ynew, &mut k7)?;

        let mut err = T::zero();
        for i in 0..n {
            let e = h
                * (T::lit(E1) * k1[i] + T::lit(E3) * k3[i] + T::lit(E4) * k4[i] + T::lit(E5) * k5[i]
                    + T::lit(E6) * k6[i]
                    + T::lit(E7) * k7[i]);
            let s = sc(y[i], ynew[i]);
            err += (e / s) * (e / s);
        }
        err = if n > 0 { (err / T::from_usize_lossy(n)).sqrt() } else { T::zero() };
        if !err.is_finite() {
            traj.rejected_steps += 1;
            h *= fac_min;
            last_rejected = true;
            continue;
        }

        if err <= T::one() {
            // dense output on (t, tn]
            if next < samples.len() && samples[next] <= tn {
                let mut rc = vec![[T::zero(); 5]; n];
                for i in 0..n {
                    let d = ynew[i] - y[i];
                    let b = h * k1[i] - d;
                    rc[i] = [
                        y[i],
                        d,
                        b,
                        d - h * k7[i] - b,
                        h * (T::lit(D1) * k1[i] + T::lit(D3) * k3[i] + T::lit(D4) * k4[i] + T::lit(D5) * k5[i]
                            + T::lit(D6) * k6[i]
                            + T::lit(D7) * k7[i]),
                    ];
                }
                while next < samples.len() && samples[next] <= tn {
                    let ts = samples[next];
                    let state = if ts == tn {
                        ynew.clone()
                    } else {
                        let th = (ts - t) / h;
                        let th1 = T::one() - th;
                        rc.iter().map(|r| r[0] + th * (r[1] + th1 * (r[2] + th * (r[3] + th1 * r[4])))).collect()
                    };
                    traj.times.push(ts);
                    traj.states.push(state);
                    next += 1;
                }
            }
            t = tn;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            traj.accepted_steps += 1;
            traj.last_step = h;
            let mut fac = if err == T::zero() { fac_max } else { safety * err.powf(T::lit(-0.2)) };
            fac = fac.min(if last_rejected { T::one() } else { fac_max }).max(fac_min);
            h *= fac;
            last_rejected = false;
        } else {
            traj.rejected_steps += 1;
            h *= (safety * err.powf(T::lit(-0.2))).max(fac_min);
            last_rejected = true;
        }
    }
    traj.final_state = y;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_dynamics_constant() {
        let tr = integrate(
            |_, _, d: &mut [f64]| {
                d.iter_mut().for_each(|v| *v = 0.0);
                Ok(())
            },
            0.0,
            &[1.0, -2.0],
            3.0,
            &[0.0, 1.0, 3.0],
            &OdeOptions::default(),
        )
        .unwrap();
        assert!(tr.states.iter().all(|s| s == &vec![1.0, -2.0]));
        assert_eq!(tr.final_state, vec![1.0, -2.0]);
    }

    #[test]
    fn exponential_decay_dense_output() {
        let samples: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1).collect();
        let tr = integrate(
            |_, y: &[f64], d: &mut [f64]| {
                d[0] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            5.0,
            &samples,
            &OdeOptions::with_tol(1e-12),
        )
        .unwrap();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            assert!((s[0] - (-t).exp()).abs() < 1e-11, "{t}");
        }
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let samples: Vec<f64> = (0..=97).map(|i| i as f64 * 0.0713).collect();
        let tr = integrate(
            |_, y: &[f64], d: &mut [f64]| {
                d[0] = y[1];
                d[1] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0, 0.0],
            7.0,
            &samples,
            &OdeOptions::with_tol(1e-10),
        )
        .unwrap();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            assert!((s[0] - t.cos()).abs() < 1e-8 && (s[1] + t.sin()).abs() < 1e-8, "{t}");
        }
    }

    #[test]
    fn derivative_failure_reported() {
        let r = integrate(
            |t, _, d: &mut [f64]| {
                if t > 0.5 {
                    return Err("boom".into());
                }
                d[0] = 1.0;
                Ok(())
            },
            0.0,
            &[0.0],
            1.0,
            &[],
            &OdeOptions::default(),
        );
        assert!(matches!(r, Err(OdeError::Derivative { .. })));
    }

    #[test]
    fn underflow_near_singularity() {
        // y' = 1/(1−t) blows up at t = 1
        let r = integrate(
            |t, _, d: &mut [f64]| {
                d[0] = 1.0 / (1.0 - t).powi(2);
                Ok(())
            },
            0.0,
            &[0.0],
            2.0,
            &[],
            &OdeOptions::default(),
        );
        match r {
            Err(OdeError::StepUnderflow { t }) => assert!((t - 1.0).abs() < 1e-3, "{t}"),
            Err(OdeError::Derivative { .. }) | Err(OdeError::TooManySteps { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let f = |_: f64, _: &[f64], _: &mut [f64]| Ok(());
        assert!(integrate(f, 1.0, &[0.0], 0.0, &[], &OdeOptions::default()).is_err());
        assert!(integrate(f, 0.0, &[0.0], 1.0, &[2.0], &OdeOptions::default()).is_err());
        assert!(integrate(f, 0.0, &[0.0], 1.0, &[], &OdeOptions::with_tol(0.0)).is_err());
    }
}
