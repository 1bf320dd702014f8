use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::brl::brl_max_eig;
use super::norm::{hinf_norm_grid, hurwitz};
use super::{ObserverGain, SynthesisError, SynthesisProblem};
use crate::cr3bp::Rho;
use crate::scalar::Real;

/// Frequencies per norm evaluation.
const NORM_POINTS: usize = 400;
/// Relative slack on the norm check.
pub const NORM_SLACK: f64 = 1e-6;

/// A ρ at which some part of the certificate fails.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation<T> {
    pub rho: Rho<T>,
    pub on_grid: bool,
    pub hurwitz: bool,
    pub brl_max_eig: T,
    /// Scaled closed-loop norm; `None` when not Hurwitz.
    pub norm: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificationReport<T> {
    pub gamma: T,
    pub grid_points: usize,
    pub random_samples: usize,
    pub grid_passed: usize,
    pub random_passed: usize,
    /// Largest BRL eigenvalue seen anywhere.
    pub worst_brl_eig: T,
    /// Largest `norm / γ` seen anywhere.
    pub worst_norm_ratio: T,
    pub violations: Vec<Violation<T>>,
}

impl<T: Real> CertificationReport<T> {
    pub fn grid_ok(&self) -> bool {
        self.grid_passed == self.grid_points
    }

    pub fn random_pass_rate(&self) -> f64 {
        if self.random_samples == 0 {
            1.0
        } else {
            self.random_passed as f64 / self.random_samples as f64
        }
    }
}

struct Check<T> {
    ok: bool,
    hurwitz: bool,
    eig: T,
    norm: Option<T>,
}

fn check_point<T: Real>(gain: &ObserverGain<T>, problem: &SynthesisProblem<T>, rho: Rho<T>) -> Result<Check<T>, SynthesisError> {
    let sys = problem.error_system(rho, &gain.l)?;
    let eig = brl_max_eig(&sys, &gain.p, &gain.lambda)?;
    if !hurwitz(&sys.acl) {
        return Ok(Check { ok: false, hurwitz: false, eig, norm: None });
    }
    // inputs weighted by γ/√λ_i, which is the identity for the plain H∞ gain
    let s: Vec<T> = gain.lambda.iter().map(|&l| gain.gamma / l.sqrt()).collect();
    let norm = hinf_norm_grid(&sys.scale_inputs(&s), NORM_POINTS)?.norm;
    let ok = eig < T::zero() && norm <= gain.gamma * (T::one() + T::lit(NORM_SLACK));
    Ok(Check { ok, hurwitz: true, eig, norm: Some(norm) })
}

/// A posteriori check of a gain at its grid and at `samples` uniform random
/// points of the problem's box: Hurwitz closed loop, negative BRL matrix with
/// the gain's own `P`, and frequency-grid norm within `γ(1 + 1e-6)`.
pub fn certify_random<T: Real>(
    gain: &ObserverGain<T>,
    problem: &SynthesisProblem<T>,
    samples: usize,
    seed: u64,
) -> Result<CertificationReport<T>, SynthesisError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = problem.bounds;
    let mut points: Vec<(Rho<T>, bool)> = gain.grid.iter().map(|&r| (r, true)).collect();
    points.extend((0..samples).map(|_| {
        let u: f64 = rng.gen();
        let v: f64 = rng.gen();
        (b.lerp(T::lit(u), T::lit(v)), false)
    }));
    let checks: Vec<Check<T>> = points
        .par_iter()
        .map(|&(rho, _)| check_point(gain, problem, rho))
        .collect::<Result<_, _>>()?;

    let mut report = CertificationReport {
        gamma: gain.gamma,
        grid_points: gain.grid.len(),
        random_samples: samples,
        grid_passed: 0,
        random_passed: 0,
        worst_brl_eig: T::neg_infinity(),
        worst_norm_ratio: T::zero(),
        violations: Vec::new(),
    };
    for (&(rho, on_grid), c) in points.iter().zip(checks) {
        report.worst_brl_eig = report.worst_brl_eig.max(c.eig);
        match c.norm {
            Some(n) => report.worst_norm_ratio = report.worst_norm_ratio.max(n / gain.gamma),
            None => report.worst_norm_ratio = T::infinity(),
        }
        if c.ok {
            if on_grid {
                report.grid_passed += 1;
            } else {
                report.random_passed += 1;
            }
        } else {
            report.violations.push(Violation { rho, on_grid, hurwitz: c.hurwitz, brl_max_eig: c.eig, norm: c.norm });
        }
    }
    Ok(report)
}
