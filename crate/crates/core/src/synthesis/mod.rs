//! Observer-gain synthesis and validation.
//!
//! The gain `L` is common to every point of a ρ grid. Certification uses
//! the bounded real lemma with one Lyapunov matrix `P` for all grid points,
//! and is checked a posteriori at random interior points.

mod brl;
mod certify;
mod dk;
mod hinf;
mod norm;

pub use brl::{brl_certify, brl_matrix, brl_max_eig, BrlOutcome};
pub use certify::{certify_random, CertificationReport, Violation, NORM_SLACK};
pub use dk::{dk_iterate, structured_gain_lower_bound, DkResult};
pub use hinf::{synthesize_hinf, synthesize_on_points};
pub use norm::{hinf_norm_grid, hurwitz, NormEstimate, HURWITZ_MARGIN};

use thiserror::Error;

use crate::cr3bp::{ParameterBox, Rho};
use crate::lft::LftError;
use crate::lmi::{LmiError, LmiOptions};
use crate::numkernel::{LinalgError, Matrix};
use crate::plant::{cz, ExogenousBlocks, PlantLft, PlantMatrices, NW};
use crate::scalar::Real;
use crate::sensing::{NoiseSpec, NoiseWeights, SensingError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("BRL infeasible at γ = {gamma:e}; violating grid point σ = {sigma}, ψ = {psi}")]
    Infeasible { gamma: f64, sigma: f64, psi: f64 },
    #[error("closed loop is not Hurwitz (spectral abscissa {abscissa:e})")]
    NotHurwitz { abscissa: f64 },
    #[error("invalid synthesis options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Lmi(#[from] LmiError),
    #[error(transparent)]
    Lft(#[from] LftError),
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Error dynamics `ė = Acl e + Bcl w`, `z̃ = Cz e` at one ρ.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSystem<T> {
    pub acl: Matrix<T>,
    pub bcl: Matrix<T>,
    pub cz: Matrix<T>,
}

impl<T: Real> ErrorSystem<T> {
    pub fn new(plant: &PlantMatrices<T>, l: &Matrix<T>) -> Self {
        Self {
            acl: &plant.a + &l.matmul(&plant.cy),
            bcl: &plant.bw + &l.matmul(&plant.dw),
            cz: cz(),
        }
    }

    /// Inputs rescaled column-wise, `Bcl · diag(s)`.
    pub fn scale_inputs(&self, s: &[T]) -> Self {
        let b = Matrix::from_fn(self.bcl.nrows(), self.bcl.ncols(), |i, j| self.bcl[(i, j)] * s[j]);
        Self { acl: self.acl.clone(), bcl: b, cz: self.cz.clone() }
    }
}

/// Error dynamics at `ρ` from the direct plant formulas.
pub fn error_dynamics<T: Real>(rho: Rho<T>, l: &Matrix<T>, pi2: T, weights: &NoiseWeights<T>) -> ErrorSystem<T> {
    ErrorSystem::new(&PlantMatrices::direct(rho, pi2, weights), l)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Hinf,
    DkScaled,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Hinf => "hinf",
            Method::DkScaled => "dk-scaled",
        }
    }
}

/// Fixed observer gain with its certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverGain<T> {
    pub l: Matrix<T>,
    /// Certified performance level on the grid.
    pub gamma: T,
    /// Lower end of the bisection bracket; for a scaled gain, that of the last K-step.
    pub gamma_lo: T,
    /// Whether `gamma_lo` was certified infeasible.
    pub gamma_lo_certified: bool,
    pub p: Matrix<T>,
    /// Per-input weights `λ_i` of the certificate
    /// `[AclᵀP + PAcl + CzᵀCz, PBcl; BclᵀP, −diag(λ)] ≺ 0`; all `γ²` for the plain H∞ gain.
    pub lambda: Vec<T>,
    pub grid: Vec<Rho<T>>,
    pub method: Method,
    /// Optimal level of the regularized synthesis problem that produced `L`.
    pub synthesis_gamma: T,
}

impl<T: Real> ObserverGain<T> {
    /// `sqrt(Σ λ_i / n_w)`, equal to `γ` for the plain H∞ gain.
    pub fn certificate_level(&self) -> T {
        (self.lambda.iter().copied().sum::<T>() / T::from_usize_lossy(self.lambda.len())).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions<T> {
    /// Grid points per axis.
    pub grid: usize,
    pub gamma_lo: T,
    pub gamma_hi: T,
    /// Relative bisection gap.
    pub rel_gap: T,
    /// Lower bound on `P` in the synthesis LMI.
    pub p_floor: T,
    pub max_dk_rounds: usize,
    pub lmi: LmiOptions<T>,
}

impl<T: Real> Default for SynthesisOptions<T> {
    fn default() -> Self {
        Self {
            grid: 3,
            gamma_lo: T::lit(1e-6),
            gamma_hi: T::lit(1e4),
            rel_gap: T::lit(1e-3),
            p_floor: T::lit(1e-4),
            max_dk_rounds: 20,
            lmi: LmiOptions::default(),
        }
    }
}

impl<T: Real> SynthesisOptions<T> {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        let bad = |m: &str| Err(SynthesisError::InvalidOptions(m.into()));
        if self.grid < 2 {
            return bad("grid density must be at least 2 per axis");
        }
        if !(self.gamma_lo > T::zero() && self.gamma_hi > self.gamma_lo) {
            return bad("need 0 < gamma_lo < gamma_hi");
        }
        if !(self.rel_gap > T::zero()) {
            return bad("relative gap must be positive");
        }
        if !(self.p_floor >= T::zero()) {
            return bad("P floor must be nonnegative");
        }
        Ok(())
    }
}

/// Everything the synthesis needs about the plant over a box.
#[derive(Debug, Clone)]
pub struct SynthesisProblem<T> {
    pub bounds: ParameterBox<T>,
    pub pi2: T,
    pub weights: NoiseWeights<T>,
    pub plant: PlantLft<T>,
}

impl<T: Real> SynthesisProblem<T> {
    /// Noise weights are anchored to `weight_box` (normally the scenario box),
    /// so a sub-box or single point keeps the scenario's noise levels.
    pub fn new(
        bounds: &ParameterBox<T>,
        pi2: T,
        spec: &NoiseSpec<T>,
        weight_box: &ParameterBox<T>,
    ) -> Result<Self, SynthesisError> {
        let weights = NoiseWeights::new(weight_box, spec)?;
        let plant = PlantLft::new(bounds, pi2, &weights)?;
        Ok(Self { bounds: *bounds, pi2, weights, plant })
    }

    pub fn grid(&self, n: usize) -> Vec<Rho<T>> {
        self.bounds.grid(n)
    }

    /// Frozen plant at each point, evaluated through the LFT.
    pub fn plants(&self, points: &[Rho<T>]) -> Result<Vec<PlantMatrices<T>>, SynthesisError> {
        points.iter().map(|r| self.plant.eval(*r).map_err(SynthesisError::from)).collect()
    }

    pub fn error_system(&self, rho: Rho<T>, l: &Matrix<T>) -> Result<ErrorSystem<T>, SynthesisError> {
        Ok(ErrorSystem::new(&self.plant.eval(rho)?, l))
    }

    pub fn exogenous_blocks(&self) -> ExogenousBlocks {
        ExogenousBlocks::from_plant(&self.plant)
    }
}

pub(crate) fn identity_scale<T: Real>() -> Vec<T> {
    vec![T::one(); NW]
}
