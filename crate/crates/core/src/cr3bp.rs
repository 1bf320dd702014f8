//! Planar circular restricted three-body problem in normalized rotating
//! coordinates, with the range parameters σ, ψ as scheduling variables.

use std::io::Write;

use thiserror::Error;

use crate::lft::{LftError, UncertainReal};
use crate::numkernel::Matrix;
use crate::scalar::Real;

/// Distances below this are treated as a collision with a primary.
pub const SINGULARITY_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Cr3bpError {
    #[error("invalid constants: {0}")]
    InvalidConstants(&'static str),
    #[error("state too close to a primary (σ = {sigma:e}, ψ = {psi:e})")]
    Singular { sigma: f64, psi: f64 },
    #[error("invalid parameter box: {0}")]
    InvalidBox(String),
}

/// Physical constants of the primary pair and the derived normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants<T> {
    pub m1: T,
    pub m2: T,
    pub g: T,
    pub r12: T,
    pub pi1: T,
    pub pi2: T,
    pub mu1: T,
    pub mu2: T,
    pub mu: T,
    /// Angular rate of the primaries.
    pub omega: T,
    /// Orbital period of the primaries.
    pub period: T,
    /// Characteristic time `sqrt(r12³/μ)`.
    pub t_c: T,
}

impl<T: Real> Constants<T> {
    pub fn new(m1: T, m2: T, g: T, r12: T) -> Result<Self, Cr3bpError> {
        if !(m1 > T::zero() && m2 > T::zero() && g > T::zero() && r12 > T::zero()) {
            return Err(Cr3bpError::InvalidConstants("masses, G and r12 must be positive"));
        }
        if m1 < m2 {
            return Err(Cr3bpError::InvalidConstants("m1 must be the larger primary"));
        }
        let m = m1 + m2;
        let mu = g * m;
        let r3 = r12 * r12 * r12;
        let omega = (mu / r3).sqrt();
        Ok(Self {
            m1,
            m2,
            g,
            r12,
            pi1: m1 / m,
            pi2: m2 / m,
            mu1: g * m1,
            mu2: g * m2,
            mu,
            omega,
            period: T::lit(2.0) * T::PI() / omega,
            t_c: (r3 / mu).sqrt(),
        })
    }

    /// Earth–Moon pair, SI units.
    pub fn earth_moon() -> Self {
        Self::new(T::lit(5.9722e24), T::lit(7.3463e22), T::lit(6.6743e-11), T::lit(3.844e8))
            .expect("Earth–Moon constants are valid")
    }
}

/// Normalized rotating-frame state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State<T> {
    pub x: T,
    pub y: T,
    pub vx: T,
    pub vy: T,
}

impl<T: Real> State<T> {
    pub fn new(x: T, y: T, vx: T, vy: T) -> Self {
        Self { x, y, vx, vy }
    }

    pub fn from_slice(s: &[T]) -> Self {
        Self { x: s[0], y: s[1], vx: s[2], vy: s[3] }
    }

    pub fn to_array(self) -> [T; 4] {
        [self.x, self.y, self.vx, self.vy]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Scheduling parameters: distances to the first and second primary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rho<T> {
    pub sigma: T,
    pub psi: T,
}

impl<T: Real> Rho<T> {
    pub fn new(sigma: T, psi: T) -> Self {
        Self { sigma, psi }
    }
}

/// Admissible intervals for σ and ψ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterBox<T> {
    pub sigma_min: T,
    pub sigma_max: T,
    pub psi_min: T,
    pub psi_max: T,
}

impl<T: Real> ParameterBox<T> {
    /// A degenerate interval (`min == max`) is allowed and describes a single point.
    pub fn new(sigma_min: T, sigma_max: T, psi_min: T, psi_max: T) -> Result<Self, Cr3bpError> {
        let ok = |lo: T, hi: T| lo > T::zero() && hi >= lo && hi.is_finite();
        if !ok(sigma_min, sigma_max) || !ok(psi_min, psi_max) {
            return Err(Cr3bpError::InvalidBox(format!(
                "σ ∈ [{sigma_min}, {sigma_max}], ψ ∈ [{psi_min}, {psi_max}]"
            )));
        }
        Ok(Self { sigma_min, sigma_max, psi_min, psi_max })
    }

    /// Earth–Moon scenario bounds.
    pub fn scenario_box() -> Self {
        Self {
            sigma_min: T::lit(0.1289),
            sigma_max: T::lit(0.9005),
            psi_min: T::lit(0.1218),
            psi_max: T::lit(1.9005),
        }
    }

    pub fn point(rho: Rho<T>) -> Self {
        Self { sigma_min: rho.sigma, sigma_max: rho.sigma, psi_min: rho.psi, psi_max: rho.psi }
    }

    pub fn contains(&self, rho: Rho<T>) -> bool {
        rho.sigma >= self.sigma_min && rho.sigma <= self.sigma_max && rho.psi >= self.psi_min && rho.psi <= self.psi_max
    }

    pub fn contains_box(&self, other: &Self) -> bool {
        other.sigma_min >= self.sigma_min
            && other.sigma_max <= self.sigma_max
            && other.psi_min >= self.psi_min
            && other.psi_max <= self.psi_max
    }

    pub fn clamp(&self, rho: Rho<T>) -> Rho<T> {
        Rho {
            sigma: rho.sigma.max(self.sigma_min).min(self.sigma_max),
            psi: rho.psi.max(self.psi_min).min(self.psi_max),
        }
    }

    pub fn center(&self) -> Rho<T> {
        let h = T::lit(0.5);
        Rho { sigma: h * (self.sigma_min + self.sigma_max), psi: h * (self.psi_min + self.psi_max) }
    }

    pub fn is_point(&self) -> bool {
        self.sigma_min == self.sigma_max && self.psi_min == self.psi_max
    }

    /// Point at normalized coordinates `(u, v) ∈ [0, 1]²`.
    pub fn lerp(&self, u: T, v: T) -> Rho<T> {
        Rho {
            sigma: self.sigma_min + u * (self.sigma_max - self.sigma_min),
            psi: self.psi_min + v * (self.psi_max - self.psi_min),
        }
    }

    /// `n × n` tensor grid including the corners. A degenerate axis yields one value.
    pub fn grid(&self, n: usize) -> Vec<Rho<T>> {
        let axis = |lo: T, hi: T| -> Vec<T> {
            if lo == hi || n < 2 {
                return vec![if n < 2 { T::lit(0.5) * (lo + hi) } else { lo }];
            }
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(n - 1) })
                .collect()
        };
        let s = axis(self.sigma_min, self.sigma_max);
        let p = axis(self.psi_min, self.psi_max);
        let mut out = Vec::with_capacity(s.len() * p.len());
        for &sigma in &s {
            for &psi in &p {
                out.push(Rho { sigma, psi });
            }
        }
        out
    }

    pub fn sigma_param(&self) -> Result<UncertainReal<T>, LftError> {
        UncertainReal::new(self.sigma_min, self.sigma_max, SIGMA)
    }

    pub fn psi_param(&self) -> Result<UncertainReal<T>, LftError> {
        UncertainReal::new(self.psi_min, self.psi_max, PSI)
    }
}

/// Δ label for σ.
pub const SIGMA: &str = "sigma";
/// Δ label for ψ.
pub const PSI: &str = "psi";

fn guard<T: Real>(sigma: T, psi: T) -> Result<(), Cr3bpError> {
    let g = T::lit(SINGULARITY_GUARD);
    if !(sigma >= g && psi >= g) {
        return Err(Cr3bpError::Singular { sigma: sigma.to_f64_lossy(), psi: psi.to_f64_lossy() });
    }
    Ok(())
}

/// Distances to the primaries at `(−π2, 0)` and `(1 − π2, 0)`.
pub fn sigma_psi<T: Real>(s: &State<T>, pi2: T) -> Result<Rho<T>, Cr3bpError> {
    let sigma = (s.x + pi2).hypot(s.y);
    let psi = (s.x + pi2 - T::one()).hypot(s.y);
    guard(sigma, psi)?;
    Ok(Rho { sigma, psi })
}

/// Shared diagonal gravity/centrifugal coefficient of the LPV form.
pub fn a31<T: Real>(rho: Rho<T>, pi2: T) -> T {
    (pi2 - T::one()) / rho.sigma.powi(3) - pi2 / rho.psi.powi(3) + T::one()
}

/// Affine term `b3`.
pub fn b3<T: Real>(rho: Rho<T>, pi2: T) -> T {
    pi2 * (T::one() - pi2) * (T::one() / rho.psi.powi(3) - T::one() / rho.sigma.powi(3))
}

/// `ẋ = A(ρ) x + b(ρ)`.
pub fn lpv_matrices<T: Real>(rho: Rho<T>, pi2: T) -> (Matrix<T>, [T; 4]) {
    let a = a31(rho, pi2);
    let (z, o, two) = (T::zero(), T::one(), T::lit(2.0));
    let m = Matrix::from_rows(&[[z, z, o, z], [z, z, z, o], [a, z, z, two], [z, a, -two, z]]);
    (m, [z, z, b3(rho, pi2), z])
}

/// Nonlinear equations of motion with a disturbance acceleration `d`.
pub fn truth_deriv<T: Real>(s: &State<T>, pi2: T, d: [T; 2]) -> Result<[T; 4], Cr3bpError> {
    let rho = sigma_psi(s, pi2)?;
    let (s3, p3) = (rho.sigma.powi(3), rho.psi.powi(3));
    let pi1 = T::one() - pi2;
    let two = T::lit(2.0);
    let ax = two * s.vy + s.x - pi1 * (s.x + pi2) / s3 - pi2 * (s.x + pi2 - T::one()) / p3;
    let ay = -two * s.vx + s.y - pi1 * s.y / s3 - pi2 * s.y / p3;
    Ok([s.vx, s.vy, ax + d[0], ay + d[1]])
}

/// Same dynamics evaluated through [`lpv_matrices`].
pub fn lpv_deriv<T: Real>(s: &State<T>, pi2: T, d: [T; 2]) -> Result<[T; 4], Cr3bpError> {
    let rho = sigma_psi(s, pi2)?;
    let (a, b) = lpv_matrices(rho, pi2);
    let ax = a.mul_vec(&s.to_array());
    Ok([ax[0] + b[0], ax[1] + b[1], ax[2] + b[2] + d[0], ax[3] + b[3] + d[1]])
}

/// Dimensional acceleration in the rotating frame, SI units, origin at the barycenter.
///
/// Kept as a cross-check of the normalization; all other computation is normalized.
pub fn dimensional_accel<T: Real>(pos: [T; 2], vel: [T; 2], c: &Constants<T>) -> [T; 2] {
    let [x, y] = pos;
    let x1 = -c.pi2 * c.r12;
    let x2 = c.pi1 * c.r12;
    let r13 = (x - x1).hypot(y).powi(3);
    let r23 = (x - x2).hypot(y).powi(3);
    let w = c.omega;
    let two = T::lit(2.0);
    [
        two * w * vel[1] + w * w * x - c.mu1 * (x - x1) / r13 - c.mu2 * (x - x2) / r23,
        -two * w * vel[0] + w * w * y - c.mu1 * y / r13 - c.mu2 * y / r23,
    ]
}

/// `C = x² + y² + 2(1−π2)/σ + 2π2/ψ − v²`.
pub fn jacobi_constant<T: Real>(s: &State<T>, pi2: T) -> Result<T, Cr3bpError> {
    let rho = sigma_psi(s, pi2)?;
    let two = T::lit(2.0);
    Ok(s.x * s.x + s.y * s.y + two * (T::one() - pi2) / rho.sigma + two * pi2 / rho.psi
        - (s.vx * s.vx + s.vy * s.vy))
}

/// The five equilibrium points, `L1..L5`, as `(x, y)`.
pub fn lagrange_points<T: Real>(pi2: T) -> [(T, T); 5] {
    let pi1 = T::one() - pi2;
    let f = |x: T| {
        let r1 = x + pi2;
        let r2 = x - pi1;
        x - pi1 * r1 / r1.abs().powi(3) - pi2 * r2 / r2.abs().powi(3)
    };
    let df = |x: T| {
        let r1 = (x + pi2).abs();
        let r2 = (x - pi1).abs();
        T::one() + T::lit(2.0) * (pi1 / r1.powi(3) + pi2 / r2.powi(3))
    };
    // f is increasing on each interval between/outside the primaries, so
    // safeguarded Newton on a bracket converges.
    let root = |mut lo: T, mut hi: T| {
        let mut x = T::lit(0.5) * (lo + hi);
        for _ in 0..200 {
            let fx = f(x);
            if fx > T::zero() {
                hi = x;
            } else {
                lo = x;
            }
            let mut nx = x - fx / df(x);
            if !(nx > lo && nx < hi) {
                nx = T::lit(0.5) * (lo + hi);
            }
            if (nx - x).abs() <= T::epsilon() * T::lit(4.0) * x.abs().max(T::one()) {
                return nx;
            }
            x = nx;
        }
        x
    };
    let eps = T::lit(1e-9);
    let l1 = root(-pi2 + eps, pi1 - eps);
    let l2 = root(pi1 + eps, T::lit(2.0));
    let l3 = root(T::lit(-2.0), -pi2 - eps);
    let h = T::lit(0.5) - pi2;
    let k = T::lit(3.0).sqrt() / T::lit(2.0);
    [(l1, T::zero()), (l2, T::zero()), (l3, T::zero()), (h, k), (h, -k)]
}

/// Writes `t, x, y, vx, vy, sigma, psi, jacobi` rows.
pub fn write_trajectory_csv<W: Write>(out: W, times: &[f64], states: &[State<f64>], pi2: f64) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", "y", "vx", "vy", "sigma", "psi", "jacobi"])?;
    for (t, s) in times.iter().zip(states) {
        let (sig, psi, c) = match (sigma_psi(s, pi2), jacobi_constant(s, pi2)) {
            (Ok(r), Ok(c)) => (r.sigma, r.psi, c),
            _ => (f64::NAN, f64::NAN, f64::NAN),
        };
        w.write_record(
            [*t, s.x, s.y, s.vx, s.vy, sig, psi, c].iter().map(|v| format!("{v:.17e}")),
        )?;
    }
    w.flush()?;
    Ok(())
}
