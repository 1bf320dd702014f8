use log::debug;

use super::brl::{analysis_system, recover_gain, synthesis_system};
use super::{identity_scale, ErrorSystem, Method, ObserverGain, SynthesisError, SynthesisOptions, SynthesisProblem};
use crate::cr3bp::Rho;
use crate::lmi::{Feasibility, LmiError, LmiOptions, LmiSystem};
use crate::numkernel::Matrix;
use crate::plant::{cz, PlantMatrices};
use crate::scalar::Real;

/// Bisection bracket with the certified point at `hi`.
#[derive(Debug, Clone)]
pub(crate) struct Bracket<T> {
    pub hi: T,
    pub lo: T,
    pub lo_certified: bool,
    pub x: Vec<T>,
}

/// Log-space bisection on a monotone feasibility test. `None` if `hi` itself fails.
pub(crate) fn bisect<T: Real>(
    lo: T,
    hi: T,
    rel_gap: T,
    mut test: impl FnMut(T) -> Result<Feasibility<T>, LmiError>,
) -> Result<Option<Bracket<T>>, SynthesisError> {
    let x = match test(hi)? {
        Feasibility::Feasible { x, .. } => x,
        _ => return Ok(None),
    };
    let mut b = Bracket { hi, lo, lo_certified: false, x };
    match test(lo)? {
        Feasibility::Feasible { x, .. } => {
            b.hi = lo;
            b.x = x;
            return Ok(Some(b));
        }
        Feasibility::Infeasible { .. } => b.lo_certified = true,
        Feasibility::Inconclusive { .. } => {}
    }
    while b.hi / b.lo > T::one() + rel_gap {
        let mid = (b.hi * b.lo).sqrt();
        match test(mid)? {
            Feasibility::Feasible { x, .. } => {
                b.hi = mid;
                b.x = x;
            }
            Feasibility::Infeasible { .. } => {
                b.lo = mid;
                b.lo_certified = true;
            }
            Feasibility::Inconclusive { .. } => {
                b.lo = mid;
                b.lo_certified = false;
            }
        }
    }
    Ok(Some(b))
}

fn infeasible_point<T: Real>(
    plants: &[PlantMatrices<T>],
    points: &[Rho<T>],
    gamma: T,
    col_scale: &[T],
    opts: &SynthesisOptions<T>,
) -> SynthesisError {
    let c = cz();
    let idx = plants
        .iter()
        .position(|pl| {
            !synthesis_system(std::slice::from_ref(pl), &c, gamma, col_scale, opts.p_floor)
                .find_feasible(&opts.lmi)
                .map(|f| f.is_feasible())
                .unwrap_or(false)
        })
        .unwrap_or(0);
    SynthesisError::Infeasible {
        gamma: gamma.to_f64_lossy(),
        sigma: points[idx].sigma.to_f64_lossy(),
        psi: points[idx].psi.to_f64_lossy(),
    }
}

/// Bracket and central `P` of a fixed-gain analysis.
type Certified<T> = (Bracket<T>, Matrix<T>);

/// Best common certificate for a fixed gain: bisection on `γ` with `P ≻ 0`
/// free, then a margin-maximizing solve at the certified level.
pub(crate) fn analyse_fixed_gain<T: Real>(
    systems: &[ErrorSystem<T>],
    lo: T,
    hi: T,
    opts: &SynthesisOptions<T>,
) -> Result<Option<Certified<T>>, SynthesisError> {
    let n = systems[0].acl.nrows();
    let Some(b) = bisect(lo, hi, opts.rel_gap, |g| analysis_system(systems, g).find_feasible(&opts.lmi))? else {
        return Ok(None);
    };
    let central = LmiOptions { maximize_margin: true, ..opts.lmi };
    let x = match analysis_system(systems, b.hi).find_feasible(&central)? {
        Feasibility::Feasible { x, .. } => x,
        _ => b.x.clone(),
    };
    Ok(Some((b, Matrix::sym_from_packed(n, &x))))
}

/// Two-stage gridded synthesis with input scaling `col_scale`:
/// regularized `(P, Y)` bisection for `L`, then the tight fixed-gain certificate.
pub(crate) fn synthesize_scaled<T: Real>(
    problem: &SynthesisProblem<T>,
    points: &[Rho<T>],
    col_scale: &[T],
    opts: &SynthesisOptions<T>,
) -> Result<ObserverGain<T>, SynthesisError> {
    opts.validate()?;
    let plants = problem.plants(points)?;
    let c = cz();
    let build = |g: T| -> LmiSystem<T> { synthesis_system(&plants, &c, g, col_scale, opts.p_floor) };
    let stage1 = bisect(opts.gamma_lo, opts.gamma_hi, opts.rel_gap, |g| build(g).find_feasible(&opts.lmi))?
        .ok_or_else(|| infeasible_point(&plants, points, opts.gamma_hi, col_scale, opts))?;
    let n = plants[0].a.nrows();
    let ny = plants[0].cy.nrows();
    let (_, l) = recover_gain(&stage1.x, n, ny)?;
    debug!("stage 1: γ ∈ [{:e}, {:e}]", stage1.lo.to_f64_lossy(), stage1.hi.to_f64_lossy());

    let systems: Vec<ErrorSystem<T>> =
        plants.iter().map(|pl| ErrorSystem::new(pl, &l).scale_inputs(col_scale)).collect();
    // the stage-one certificate is feasible for the analysis problem at stage1.hi
    let (b, p) = analyse_fixed_gain(&systems, opts.gamma_lo, stage1.hi, opts)?.ok_or_else(|| {
        SynthesisError::Lmi(LmiError::Numerical("fixed-gain analysis failed at the synthesis level".into()))
    })?;
    debug!("stage 2: γ ∈ [{:e}, {:e}]", b.lo.to_f64_lossy(), b.hi.to_f64_lossy());
    Ok(ObserverGain {
        l,
        gamma: b.hi,
        gamma_lo: b.lo,
        gamma_lo_certified: b.lo_certified,
        p,
        lambda: col_scale.iter().map(|&s| b.hi * b.hi / (s * s)).collect(),
        grid: points.to_vec(),
        method: Method::Hinf,
        synthesis_gamma: stage1.hi,
    })
}

/// Common gain for an explicit list of ρ points.
pub fn synthesize_on_points<T: Real>(
    problem: &SynthesisProblem<T>,
    points: &[Rho<T>],
    opts: &SynthesisOptions<T>,
) -> Result<ObserverGain<T>, SynthesisError> {
    synthesize_scaled(problem, points, &identity_scale(), opts)
}

/// Common gain over the `grid × grid` points of the problem's box.
pub fn synthesize_hinf<T: Real>(problem: &SynthesisProblem<T>, opts: &SynthesisOptions<T>) -> Result<ObserverGain<T>, SynthesisError> {
    opts.validate()?;
    synthesize_on_points(problem, &problem.grid(opts.grid), opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_brackets_threshold() {
        let thr = 0.0123_f64;
        let b = bisect(1e-6, 1e4, 1e-3, |g| {
            Ok(if g >= thr {
                Feasibility::Feasible { x: vec![g], max_eig: -1.0 }
            } else {
                Feasibility::Infeasible { lower_bound: 1.0 }
            })
        })
        .unwrap()
        .unwrap();
        assert!(b.lo < thr && b.hi >= thr && b.hi / b.lo <= 1.001 && b.lo_certified);
        assert_eq!(b.x, vec![b.hi]);
        let none = bisect(1e-6, 1e4, 1e-3, |_| Ok(Feasibility::<f64>::Infeasible { lower_bound: 1.0 })).unwrap();
        assert!(none.is_none());
    }
}
