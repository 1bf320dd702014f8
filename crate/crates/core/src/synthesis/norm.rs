use super::{ErrorSystem, SynthesisError};
use crate::numkernel::{eigenvalues, max_sv_freq, spectral_abscissa, Matrix};
use crate::scalar::Real;

/// Eigenvalue real parts must lie below `−HURWITZ_MARGIN`.
pub const HURWITZ_MARGIN: f64 = 1e-9;

pub fn hurwitz<T: Real>(a: &Matrix<T>) -> bool {
    matches!(spectral_abscissa(a), Ok(s) if s < -T::lit(HURWITZ_MARGIN))
}

/// Peak gain and where it occurs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate<T> {
    pub norm: T,
    pub omega: T,
}

/// H∞ norm estimate: ω = 0, a log grid of `points` frequencies over
/// `[1e-3, max(1e3, 10·max|λ|)]`, and golden-section refinement around the peak.
pub fn hinf_norm_grid<T: Real>(sys: &ErrorSystem<T>, points: usize) -> Result<NormEstimate<T>, SynthesisError> {
    let a = &sys.acl;
    let abscissa = spectral_abscissa(a)?;
    if !(abscissa < -T::lit(HURWITZ_MARGIN)) {
        return Err(SynthesisError::NotHurwitz { abscissa: abscissa.to_f64_lossy() });
    }
    let gain = |w: T| max_sv_freq(a, &sys.bcl, &sys.cz, w);
    let radius = eigenvalues(a)?.iter().fold(T::zero(), |m, &(re, im)| m.max(re.hypot(im)));
    let lo = T::lit(-3.0);
    let hi = T::lit(3.0).max((T::lit(10.0) * radius).log10());
    let n = points.max(2);
    let mut best = NormEstimate { norm: gain(T::zero())?, omega: T::zero() };
    let mut grid = Vec::with_capacity(n);
    for i in 0..n {
        let e = lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(n - 1);
        grid.push(T::lit(10.0).powf(e));
    }
    let mut best_i = None;
    for (i, &w) in grid.iter().enumerate() {
        let g = gain(w)?;
        if g > best.norm {
            best = NormEstimate { norm: g, omega: w };
            best_i = Some(i);
        }
    }
    if let Some(i) = best_i {
        let mut l = if i > 0 { grid[i - 1].ln() } else { grid[0].ln() - T::one() };
        let mut r = if i + 1 < n { grid[i + 1].ln() } else { grid[n - 1].ln() + T::one() };
        let phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
        let mut x1 = r - phi * (r - l);
        let mut x2 = l + phi * (r - l);
        let mut f1 = gain(x1.exp())?;
        let mut f2 = gain(x2.exp())?;
        for _ in 0..80 {
            if f1 > f2 {
                r = x2;
                x2 = x1;
                f2 = f1;
                x1 = r - phi * (r - l);
                f1 = gain(x1.exp())?;
            } else {
                l = x1;
                x1 = x2;
                f1 = f2;
                x2 = l + phi * (r - l);
                f2 = gain(x2.exp())?;
            }
            if r - l < T::lit(1e-12) {
                break;
            }
        }
        for (x, f) in [(x1, f1), (x2, f2)] {
            if f > best.norm {
                best = NormEstimate { norm: f, omega: x.exp() };
            }
        }
    }
    Ok(best)
}
