//! Bearing measurements to both primaries, range-weighted noise and the
//! exogenous-signal generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cr3bp::{sigma_psi, Cr3bpError, ParameterBox, Rho, State};
use crate::numkernel::Matrix;
use crate::scalar::Real;

/// Radians per arcsecond.
pub const ARCSEC: f64 = std::f64::consts::PI / 648000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensingError {
    #[error("invalid noise spec: {0}")]
    InvalidSpec(String),
    #[error("degenerate range interval [{min}, {max}] for linear weights")]
    DegenerateBox { min: f64, max: f64 },
    #[error(transparent)]
    Geometry(#[from] Cr3bpError),
}

/// `(sin θ1, cos θ1, sin θ2, cos θ2)` of the bearings to both primaries.
pub fn measure<T: Real>(s: &State<T>, pi2: T) -> Result<[T; 4], Cr3bpError> {
    let r = sigma_psi(s, pi2)?;
    Ok([s.y / r.sigma, (s.x + pi2) / r.sigma, s.y / r.psi, (s.x + pi2 - T::one()) / r.psi])
}

/// `y = C_y(ρ) x + d(ρ)`.
pub fn measurement_matrices<T: Real>(rho: Rho<T>, pi2: T) -> (Matrix<T>, [T; 4]) {
    let (is, ip) = (T::one() / rho.sigma, T::one() / rho.psi);
    let z = T::zero();
    let c = Matrix::from_rows(&[[z, is, z, z], [is, z, z, z], [z, ip, z, z], [ip, z, z, z]]);
    (c, [z, pi2 * is, z, (pi2 - T::one()) * ip])
}

/// How the angular noise level scales with range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightModel<T> {
    /// `η_min` at the box minimum to `η_max` at the box maximum.
    Linear,
    /// `W = √α · r` per primary.
    Quadratic { alpha_sigma: T, alpha_psi: T },
}

/// Noise configuration in normalized units (angles in radians, ranges in units of r12).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec<T> {
    pub eta_min: T,
    pub eta_max: T,
    pub range_err_min: T,
    pub range_err_max: T,
    /// Low-pass cutoff for the sensor channels; `None` is white noise.
    pub band_limit: Option<T>,
    pub process_bound: T,
    /// Sample-and-hold period of every exogenous channel.
    pub hold_period: T,
    pub seed: u64,
    pub model: WeightModel<T>,
}

impl<T: Real> NoiseSpec<T> {
    /// Earth–Moon scenario: 50–500 arcsec, 400–4000 km over 384400 km,
    /// ±0.01 process noise, band limit 1.
    pub fn earth_moon() -> Self {
        Self::from_units(50.0, 500.0, 400.0, 4000.0, 3.844e5, Some(1.0), 0.01, 0.001, 0)
            .expect("scenario noise spec is valid")
    }

    /// Angles in arcsec, range errors and `r12` in km.
    #[allow(clippy::too_many_arguments)]
    pub fn from_units(
        eta_min_arcsec: f64,
        eta_max_arcsec: f64,
        range_err_min_km: f64,
        range_err_max_km: f64,
        r12_km: f64,
        band_limit: Option<f64>,
        process_bound: f64,
        hold_period: f64,
        seed: u64,
    ) -> Result<Self, SensingError> {
        if !(r12_km > 0.0) {
            return Err(SensingError::InvalidSpec("r12 must be positive".into()));
        }
        let spec = Self {
            eta_min: T::lit(eta_min_arcsec * ARCSEC),
            eta_max: T::lit(eta_max_arcsec * ARCSEC),
            range_err_min: T::lit(range_err_min_km / r12_km),
            range_err_max: T::lit(range_err_max_km / r12_km),
            band_limit: band_limit.map(T::lit),
            process_bound: T::lit(process_bound),
            hold_period: T::lit(hold_period),
            seed,
            model: WeightModel::Linear,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Same spec with every noise source switched off.
    pub fn noiseless(&self) -> Self {
        Self {
            eta_min: T::zero(),
            eta_max: T::zero(),
            range_err_min: T::zero(),
            range_err_max: T::zero(),
            process_bound: T::zero(),
            ..*self
        }
    }

    pub fn validate(&self) -> Result<(), SensingError> {
        let bad = |m: &str| Err(SensingError::InvalidSpec(m.into()));
        if !(self.eta_min >= T::zero() && self.eta_max >= self.eta_min) {
            return bad("need 0 ≤ eta_min ≤ eta_max");
        }
        if !(self.range_err_min >= T::zero() && self.range_err_max >= self.range_err_min) {
            return bad("need 0 ≤ range_err_min ≤ range_err_max");
        }
        if !(self.process_bound >= T::zero()) {
            return bad("process bound must be nonnegative");
        }
        if !(self.hold_period > T::zero()) {
            return bad("hold period must be positive");
        }
        if let Some(b) = self.band_limit {
            if !(b > T::zero()) {
                return bad("band limit must be positive");
            }
        }
        if let WeightModel::Quadratic { alpha_sigma, alpha_psi } = self.model {
            if !(alpha_sigma >= T::zero() && alpha_psi >= T::zero()) {
                return bad("alpha must be nonnegative");
            }
        }
        Ok(())
    }
}

/// Affine map `c0 + c1·r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine<T> {
    pub c0: T,
    pub c1: T,
}

impl<T: Real> Affine<T> {
    pub fn at(&self, r: T) -> T {
        self.c0 + self.c1 * r
    }
}

fn linear_through<T: Real>(lo: T, hi: T, v_lo: T, v_hi: T) -> Result<Affine<T>, SensingError> {
    if !(hi > lo) {
        return Err(SensingError::DegenerateBox { min: lo.to_f64_lossy(), max: hi.to_f64_lossy() });
    }
    let c1 = (v_hi - v_lo) / (hi - lo);
    Ok(Affine { c0: v_lo - c1 * lo, c1 })
}

/// Channel weights `W1 = W2` (σ) and `W3 = W4` (ψ) as affine functions of range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseWeights<T> {
    pub sigma: Affine<T>,
    pub psi: Affine<T>,
    /// Box the linear interpolation is anchored to.
    pub reference: ParameterBox<T>,
}

impl<T: Real> NoiseWeights<T> {
    pub fn new(reference: &ParameterBox<T>, spec: &NoiseSpec<T>) -> Result<Self, SensingError> {
        let (sigma, psi) = match spec.model {
            WeightModel::Linear => (
                linear_through(reference.sigma_min, reference.sigma_max, spec.eta_min, spec.eta_max)?,
                linear_through(reference.psi_min, reference.psi_max, spec.eta_min, spec.eta_max)?,
            ),
            WeightModel::Quadratic { alpha_sigma, alpha_psi } => (
                Affine { c0: T::zero(), c1: alpha_sigma.sqrt() },
                Affine { c0: T::zero(), c1: alpha_psi.sqrt() },
            ),
        };
        Ok(Self { sigma, psi, reference: *reference })
    }

    /// `(W1, W2, W3, W4)` at `ρ` clamped to the reference box.
    pub fn at(&self, rho: Rho<T>) -> [T; 4] {
        let r = self.reference.clamp(rho);
        let (ws, wp) = (self.sigma.at(r.sigma), self.psi.at(r.psi));
        [ws, ws, wp, wp]
    }

    /// `D_w(ρ) = [0 | blkdiag(W_σ I₂, W_ψ I₂)]`, 4×6.
    pub fn dw(&self, rho: Rho<T>) -> Matrix<T> {
        let w = self.at(rho);
        let mut m = Matrix::zeros(4, 6);
        for (i, wi) in w.iter().enumerate() {
            m[(i, 2 + i)] = *wi;
        }
        m
    }
}

/// `(W1..W4)` at `ρ`; the linear model is anchored to `reference`.
pub fn noise_weights<T: Real>(rho: Rho<T>, reference: &ParameterBox<T>, spec: &NoiseSpec<T>) -> Result<[T; 4], SensingError> {
    Ok(NoiseWeights::new(reference, spec)?.at(rho))
}

/// Range-error half-widths `(e_σ, e_ψ)` at `ρ`, linear in range over the box.
pub fn range_error_bounds<T: Real>(rho: Rho<T>, reference: &ParameterBox<T>, spec: &NoiseSpec<T>) -> [T; 2] {
    let r = reference.clamp(rho);
    let interp = |v: T, lo: T, hi: T| {
        if hi > lo {
            spec.range_err_min + (v - lo) / (hi - lo) * (spec.range_err_max - spec.range_err_min)
        } else {
            spec.range_err_min
        }
    };
    [
        interp(r.sigma, reference.sigma_min, reference.sigma_max),
        interp(r.psi, reference.psi_min, reference.psi_max),
    ]
}

/// Noisy range measurement clamped to the box. `unit` holds two draws in `[−1, 1]`.
pub fn range_measure<T: Real>(
    s: &State<T>,
    pi2: T,
    spec: &NoiseSpec<T>,
    reference: &ParameterBox<T>,
    unit: [T; 2],
) -> Result<Rho<T>, Cr3bpError> {
    let truth = sigma_psi(s, pi2)?;
    let e = range_error_bounds(truth, reference, spec);
    Ok(reference.clamp(Rho { sigma: truth.sigma + e[0] * unit[0], psi: truth.psi + e[1] * unit[1] }))
}

/// `w = (d_x, d_y, n1..n4)` plus the unit range-noise draws of one hold period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExogenousSample<T> {
    pub w: [T; 6],
    pub range_unit: [T; 2],
}

/// Seeded source of exogenous samples, one per hold period.
#[derive(Debug, Clone)]
pub struct NoiseGenerator<T> {
    spec: NoiseSpec<T>,
    rng: ChaCha8Rng,
    filtered: [T; 4],
    primed: bool,
}

impl<T: Real> NoiseGenerator<T> {
    pub fn new(spec: &NoiseSpec<T>) -> Self {
        Self { spec: *spec, rng: ChaCha8Rng::seed_from_u64(spec.seed), filtered: [T::zero(); 4], primed: false }
    }

    fn unit(&mut self) -> T {
        T::lit(self.rng.gen_range(-1.0..=1.0))
    }

    /// Next held sample. Every call consumes the same number of draws so
    /// streams stay aligned across configurations.
    pub fn next_sample(&mut self) -> ExogenousSample<T> {
        let pb = self.spec.process_bound;
        let d = [pb * self.unit(), pb * self.unit()];
        let raw = [self.unit(), self.unit(), self.unit(), self.unit()];
        let range_unit = [self.unit(), self.unit()];
        let n = match self.spec.band_limit {
            None => raw,
            Some(wc) => {
                let a = (-wc * self.spec.hold_period).exp();
                if !self.primed {
                    self.filtered = raw;
                } else {
                    for (f, r) in self.filtered.iter_mut().zip(raw) {
                        *f = a * *f + (T::one() - a) * r;
                    }
                }
                self.filtered
            }
        };
        self.primed = true;
        ExogenousSample { w: [d[0], d[1], n[0], n[1], n[2], n[3]], range_unit }
    }
}
