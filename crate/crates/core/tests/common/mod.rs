#![allow(dead_code)]

use lftnav_core::cr3bp::{ParameterBox, Rho, State};
use lftnav_core::numkernel::Matrix;

pub const PI2: f64 = 0.012151355442736387;
pub const ARCSEC: f64 = std::f64::consts::PI / 648000.0;

pub fn x0() -> State<f64> {
    State::new(0.87, 0.0, 0.0, -1.48270)
}

pub fn xhat0() -> State<f64> {
    State::new(0.65, -0.1, -2.0, -2.0)
}

pub fn scenario_box() -> ParameterBox<f64> {
    ParameterBox::new(0.1289, 0.9005, 0.1218, 1.9005).unwrap()
}

/// Frozen plant written out from the rational formulas.
pub struct Direct {
    pub a: [[f64; 4]; 4],
    pub b: [f64; 4],
    pub cy: [[f64; 4]; 4],
    pub d: [f64; 4],
    pub w: [f64; 4],
}

pub fn direct(rho: Rho<f64>, pi2: f64, bx: &ParameterBox<f64>, eta: (f64, f64)) -> Direct {
    let (s, p) = (rho.sigma, rho.psi);
    let a31 = 1.0 - (1.0 - pi2) / s.powi(3) - pi2 / p.powi(3);
    let b3 = pi2 * (1.0 - pi2) * (1.0 / p.powi(3) - 1.0 / s.powi(3));
    let lin = |v: f64, lo: f64, hi: f64| eta.0 + (v - lo) / (hi - lo) * (eta.1 - eta.0);
    let ws = lin(s.clamp(bx.sigma_min, bx.sigma_max), bx.sigma_min, bx.sigma_max);
    let wp = lin(p.clamp(bx.psi_min, bx.psi_max), bx.psi_min, bx.psi_max);
    Direct {
        a: [[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0], [a31, 0.0, 0.0, 2.0], [0.0, a31, -2.0, 0.0]],
        b: [0.0, 0.0, b3, 0.0],
        cy: [[0.0, 1.0 / s, 0.0, 0.0], [1.0 / s, 0.0, 0.0, 0.0], [0.0, 1.0 / p, 0.0, 0.0], [1.0 / p, 0.0, 0.0, 0.0]],
        d: [0.0, pi2 / s, 0.0, (pi2 - 1.0) / p],
        w: [ws, ws, wp, wp],
    }
}

/// Planar CR3BP acceleration from Newton's law in the rotating frame.
pub fn newton_rhs(s: &[f64; 4], pi2: f64) -> [f64; 4] {
    let (x, y, vx, vy) = (s[0], s[1], s[2], s[3]);
    let r1 = ((x + pi2).powi(2) + y * y).sqrt();
    let r2 = ((x - 1.0 + pi2).powi(2) + y * y).sqrt();
    let g1 = (1.0 - pi2) / r1.powi(3);
    let g2 = pi2 / r2.powi(3);
    [vx, vy, x + 2.0 * vy - g1 * (x + pi2) - g2 * (x - 1.0 + pi2), y - 2.0 * vx - g1 * y - g2 * y]
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Entrywise error relative to the largest entry of the reference.
pub fn mat_rel_err(m: &Matrix<f64>, r: &[[f64; 4]; 4]) -> f64 {
    let scale = r.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let mut e = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            e = e.max((m[(i, j)] - r[i][j]).abs());
        }
    }
    e / scale
}

pub fn vec_rel_err(v: &[f64], r: &[f64]) -> f64 {
    let scale = r.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-300);
    v.iter().zip(r).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / scale
}

/// Uniform point of the box from two unit draws.
pub fn lerp(bx: &ParameterBox<f64>, u: f64, v: f64) -> Rho<f64> {
    Rho::new(bx.sigma_min + u * (bx.sigma_max - bx.sigma_min), bx.psi_min + v * (bx.psi_max - bx.psi_min))
}

/// Gain with a placeholder certificate, for exercising the runtime.
pub fn plain_gain(l: lftnav_core::Matrix) -> lftnav_core::synthesis::ObserverGain<f64> {
    lftnav_core::synthesis::ObserverGain {
        l,
        gamma: 1.0,
        gamma_lo: 0.5,
        gamma_lo_certified: false,
        p: Matrix::identity(4),
        lambda: vec![1.0; 6],
        grid: vec![],
        method: lftnav_core::synthesis::Method::Hinf,
        synthesis_gamma: 1.0,
    }
}

/// Output-injection gain, `L = −k C_y(ρ₀)ᵀ`.
pub fn injection_gain(k: f64) -> lftnav_core::Matrix {
    let d = direct(Rho::new(0.5, 0.5), PI2, &scenario_box(), (0.0, 0.0));
    Matrix::from_fn(4, 4, |i, j| -k * d.cy[j][i])
}
