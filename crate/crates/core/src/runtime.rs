//! Closed-loop simulation of the truth model and the fixed-gain observer.

use std::io::Write;
use std::str::FromStr;

use thiserror::Error;

use crate::cr3bp::{lpv_matrices, sigma_psi, truth_deriv, Cr3bpError, ParameterBox, Rho, State};
use crate::numkernel::Matrix;
use crate::ode::{integrate, OdeError, OdeOptions};
use crate::scalar::Real;
use crate::sensing::{measure, measurement_matrices, range_measure, NoiseGenerator, NoiseSpec, NoiseWeights, SensingError};
use crate::synthesis::ObserverGain;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error("invalid simulation config: {0}")]
    Invalid(String),
    #[error("integration failed at t = {t}, state {state:?}: {source}")]
    Integration { t: f64, state: Vec<f64>, source: OdeError },
    #[error(transparent)]
    Geometry(#[from] Cr3bpError),
    #[error(transparent)]
    Sensing(#[from] SensingError),
}

/// Where the observer takes its scheduling parameter from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoSchedule {
    /// True ranges, evaluated continuously and clamped to the box.
    ContinuousTrue,
    /// Noisy range measurements, held over each noise period.
    MeasuredHeld,
}

impl RhoSchedule {
    pub fn as_str(&self) -> &'static str {
        match self {
            RhoSchedule::ContinuousTrue => "continuous-true",
            RhoSchedule::MeasuredHeld => "measured-held",
        }
    }
}

impl FromStr for RhoSchedule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "continuous-true" => Ok(RhoSchedule::ContinuousTrue),
            "measured-held" => Ok(RhoSchedule::MeasuredHeld),
            other => Err(format!("unknown rho schedule {other:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig<T> {
    pub pi2: T,
    pub x0: State<T>,
    pub xhat0: State<T>,
    pub bounds: ParameterBox<T>,
    pub noise: NoiseSpec<T>,
    pub gain: ObserverGain<T>,
    pub t_end: T,
    /// Output period, rounded to a whole number of noise periods.
    pub sample_dt: T,
    pub schedule: RhoSchedule,
    pub ode: OdeOptions<T>,
}

impl<T: Real> SimConfig<T> {
    pub fn validate(&self) -> Result<(), RuntimeError> {
        let bad = |m: &str| Err(RuntimeError::Invalid(m.into()));
        if !(self.t_end > T::zero() && self.t_end.is_finite()) {
            return bad("t_end must be positive");
        }
        if !(self.sample_dt > T::zero()) {
            return bad("sample_dt must be positive");
        }
        if !self.x0.is_finite() || !self.xhat0.is_finite() {
            return bad("initial states must be finite");
        }
        if self.gain.l.shape() != (4, 4) {
            return bad("observer gain must be 4×4");
        }
        self.noise.validate()?;
        sigma_psi(&self.x0, self.pi2)?;
        sigma_psi(&self.xhat0, self.pi2)?;
        Ok(())
    }
}

/// Sampled closed-loop run. Every series shares `times`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult<T> {
    pub times: Vec<T>,
    pub truth: Vec<[T; 4]>,
    pub estimate: Vec<[T; 4]>,
    /// `ẑ = C_z x̂`.
    pub z_hat: Vec<[T; 2]>,
    /// `z̃ = C_z (x − x̂)`.
    pub z_err: Vec<[T; 2]>,
    pub measurements: Vec<[T; 4]>,
    /// Exogenous input `w` applied over the period starting at each sample.
    pub noise: Vec<[T; 6]>,
    pub rho_hat: Vec<Rho<T>>,
    pub rho_true: Vec<Rho<T>>,
}

impl<T: Real> SimResult<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `‖z̃‖` per sample.
    pub fn error_norms(&self) -> Vec<T> {
        self.z_err.iter().map(|z| z[0].hypot(z[1])).collect()
    }
}

/// `x̂̇ = (A(ρ̂) + L C_y(ρ̂)) x̂ − L (y_m − d(ρ̂)) + b(ρ̂)`.
pub fn observer_deriv<T: Real>(xhat: &State<T>, y_m: &[T; 4], rho_hat: Rho<T>, l: &Matrix<T>, pi2: T) -> [T; 4] {
    let (a, b) = lpv_matrices(rho_hat, pi2);
    let (c, d) = measurement_matrices(rho_hat, pi2);
    let acl = &a + &l.matmul(&c);
    let xv = xhat.to_array();
    let innov: Vec<T> = (0..4).map(|i| y_m[i] - d[i]).collect();
    let ax = acl.mul_vec(&xv);
    let li = l.mul_vec(&innov);
    [ax[0] - li[0] + b[0], ax[1] - li[1] + b[1], ax[2] - li[2] + b[2], ax[3] - li[3] + b[3]]
}

fn noisy_measurement<T: Real>(x: &State<T>, pi2: T, weights: &NoiseWeights<T>, w: &[T; 6]) -> Result<([T; 4], Rho<T>), Cr3bpError> {
    let rho = sigma_psi(x, pi2)?;
    let mut y = measure(x, pi2)?;
    let wt = weights.at(rho);
    for i in 0..4 {
        y[i] += wt[i] * w[2 + i];
    }
    Ok((y, rho))
}

/// Co-integrates truth and observer. Exogenous samples and (for
/// [`RhoSchedule::MeasuredHeld`]) the range measurement are held over each
/// noise period; bearings are formed continuously from the true state.
pub fn run_closed_loop<T: Real>(cfg: &SimConfig<T>) -> Result<SimResult<T>, RuntimeError> {
    cfg.validate()?;
    let pi2 = cfg.pi2;
    let hold = cfg.noise.hold_period;
    let weights = NoiseWeights::new(&cfg.bounds, &cfg.noise)?;
    let mut gen = NoiseGenerator::new(&cfg.noise);
    let periods = (cfg.t_end / hold).ceil().to_f64_lossy().max(1.0) as usize;
    let every = ((cfg.sample_dt / hold).round().to_f64_lossy() as usize).max(1);
    let cz = crate::plant::cz::<T>();

    let mut y: Vec<T> = cfg.x0.to_array().into_iter().chain(cfg.xhat0.to_array()).collect();
    let mut out = SimResult {
        times: Vec::new(),
        truth: Vec::new(),
        estimate: Vec::new(),
        z_hat: Vec::new(),
        z_err: Vec::new(),
        measurements: Vec::new(),
        noise: Vec::new(),
        rho_hat: Vec::new(),
        rho_true: Vec::new(),
    };
    let mut record = |t: T, y: &[T], w: &[T; 6], rho_hat: Rho<T>| -> Result<(), RuntimeError> {
        let x = State::from_slice(&y[..4]);
        let xh = State::from_slice(&y[4..]);
        let (ym, rho) = noisy_measurement(&x, pi2, &weights, w)?;
        let e: Vec<T> = (0..4).map(|i| y[i] - y[4 + i]).collect();
        let ze = cz.mul_vec(&e);
        let zh = cz.mul_vec(&y[4..]);
        out.times.push(t);
        out.truth.push(x.to_array());
        out.estimate.push(xh.to_array());
        out.z_hat.push([zh[0], zh[1]]);
        out.z_err.push([ze[0], ze[1]]);
        out.measurements.push(ym);
        out.noise.push(*w);
        out.rho_hat.push(rho_hat);
        out.rho_true.push(rho);
        Ok(())
    };

    let mut opts = cfg.ode;
    let mut last = (T::zero(), [T::zero(); 6], cfg.bounds.center());
    for k in 0..periods {
        let t0 = hold * T::from_usize_lossy(k);
        let t1 = (hold * T::from_usize_lossy(k + 1)).min(cfg.t_end);
        let sample = gen.next_sample();
        let w = sample.w;
        let x = State::from_slice(&y[..4]);
        let held = match cfg.schedule {
            RhoSchedule::ContinuousTrue => cfg.bounds.clamp(sigma_psi(&x, pi2)?),
            RhoSchedule::MeasuredHeld => range_measure(&x, pi2, &cfg.noise, &cfg.bounds, sample.range_unit)?,
        };
        if k % every == 0 {
            record(t0, &y, &w, held)?;
        }
        let l = &cfg.gain.l;
        let f = |_t: T, s: &[T], ds: &mut [T]| -> Result<(), String> {
            let x = State::from_slice(&s[..4]);
            let xh = State::from_slice(&s[4..]);
            let dx = truth_deriv(&x, pi2, [w[0], w[1]]).map_err(|e| e.to_string())?;
            let (ym, rho) = noisy_measurement(&x, pi2, &weights, &w).map_err(|e| e.to_string())?;
            let rho_hat = match cfg.schedule {
                RhoSchedule::ContinuousTrue => cfg.bounds.clamp(rho),
                RhoSchedule::MeasuredHeld => held,
            };
            let dxh = observer_deriv(&xh, &ym, rho_hat, l, pi2);
            ds[..4].copy_from_slice(&dx);
            ds[4..].copy_from_slice(&dxh);
            Ok(())
        };
        let traj = integrate(f, t0, &y, t1, &[], &opts).map_err(|source| RuntimeError::Integration {
            t: t0.to_f64_lossy(),
            state: y.iter().map(|v| v.to_f64_lossy()).collect(),
            source,
        })?;
        y = traj.final_state;
        opts.h_init = Some(traj.last_step);
        let x = State::from_slice(&y[..4]);
        let rho_end = match cfg.schedule {
            RhoSchedule::ContinuousTrue => cfg.bounds.clamp(sigma_psi(&x, pi2)?),
            RhoSchedule::MeasuredHeld => held,
        };
        last = (t1, w, rho_end);
    }
    record(last.0, &y, &last.1, last.2)?;
    Ok(out)
}

/// Summary over the steady-state window `[t_end/2, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics<T> {
    pub rms: T,
    pub max: T,
    /// Time after which `‖z̃‖` stays below 1% of its initial value.
    pub settling_time: Option<T>,
    /// Pearson correlation of `‖z̃‖` with `σ + ψ`; `None` for a constant series.
    pub range_correlation: Option<T>,
    pub initial_error: T,
}

fn pearson<T: Real>(a: &[T], b: &[T]) -> Option<T> {
    let n = T::from_usize_lossy(a.len());
    let ma = a.iter().copied().sum::<T>() / n;
    let mb = b.iter().copied().sum::<T>() / n;
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa > T::zero() && sbb > T::zero() {
        Some(sab / (saa * sbb).sqrt())
    } else {
        None
    }
}

pub fn metrics<T: Real>(r: &SimResult<T>) -> Metrics<T> {
    assert!(!r.is_empty(), "metrics of an empty result");
    let norms = r.error_norms();
    let t_end = *r.times.last().unwrap();
    let start = r.times.iter().position(|&t| t >= t_end / T::lit(2.0)).unwrap_or(0);
    let win = &norms[start..];
    let n = T::from_usize_lossy(win.len());
    let rms = (win.iter().map(|v| *v * *v).sum::<T>() / n).sqrt();
    let max = win.iter().copied().fold(T::zero(), T::max);
    let initial = norms[0];
    let threshold = initial * T::lit(0.01);
    let settling_time = match norms.iter().rposition(|&v| v > threshold) {
        None => Some(r.times[0]),
        Some(i) if i + 1 < norms.len() => Some(r.times[i + 1]),
        Some(_) => None,
    };
    let ranges: Vec<T> = r.rho_true[start..].iter().map(|p| p.sigma + p.psi).collect();
    Metrics { rms, max, settling_time, range_correlation: pearson(win, &ranges), initial_error: initial }
}

/// `t, x, y, vx, vy, x̂, ŷ, v̂x, v̂y, z̃x, z̃y, y_m1..4, σ̂, ψ̂, ‖z̃‖`.
pub fn write_result_csv<T: Real, W: Write>(r: &SimResult<T>, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t", "x", "y", "vx", "vy", "x_hat", "y_hat", "vx_hat", "vy_hat", "z_err_x", "z_err_y", "y_m1", "y_m2", "y_m3",
        "y_m4", "sigma_hat", "psi_hat", "z_err_norm",
    ])?;
    let norms = r.error_norms();
    for i in 0..r.len() {
        let mut row: Vec<String> = Vec::with_capacity(18);
        row.push(format!("{:e}", r.times[i]));
        row.extend(r.truth[i].iter().chain(&r.estimate[i]).chain(&r.z_err[i]).chain(&r.measurements[i]).map(|v| format!("{v:e}")));
        row.push(format!("{:e}", r.rho_hat[i].sigma));
        row.push(format!("{:e}", r.rho_hat[i].psi));
        row.push(format!("{:e}", norms[i]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
