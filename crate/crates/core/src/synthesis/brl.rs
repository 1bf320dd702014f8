use super::{ErrorSystem, SynthesisError};
use crate::lmi::{Feasibility, Lmi, LmiOptions, LmiSystem};
use crate::numkernel::{chol_posdef, sym_max_eig, Matrix};
use crate::plant::PlantMatrices;
use crate::scalar::Real;

/// `[AᵀP + PA + CᵀC, PB; BᵀP, −diag(λ)]`.
pub fn brl_matrix<T: Real>(sys: &ErrorSystem<T>, p: &Matrix<T>, lambda: &[T]) -> Matrix<T> {
    let at_p = sys.acl.transpose().matmul(p);
    let tl = &(&at_p + &at_p.transpose()) + &sys.cz.transpose().matmul(&sys.cz);
    let pb = p.matmul(&sys.bcl);
    let br = Matrix::from_diag(&lambda.iter().map(|&l| -l).collect::<Vec<_>>());
    Matrix::block2(&tl, &pb, &pb.transpose(), &br)
}

/// Largest eigenvalue of [`brl_matrix`]; negative means the certificate holds.
pub fn brl_max_eig<T: Real>(sys: &ErrorSystem<T>, p: &Matrix<T>, lambda: &[T]) -> Result<T, SynthesisError> {
    Ok(sym_max_eig(&brl_matrix(sys, p, lambda).symmetrize())?)
}

/// Outcome of a single-system BRL test.
#[derive(Debug, Clone, PartialEq)]
pub enum BrlOutcome<T> {
    Feasible { p: Matrix<T> },
    Infeasible,
    /// The solver could not decide at working precision.
    Inconclusive,
}

/// `P ≻ 0` with `[AᵀP + PA + CᵀC, PB; BᵀP, −γ²I] ≺ 0`.
pub fn brl_certify<T: Real>(acl: &Matrix<T>, bcl: &Matrix<T>, cz: &Matrix<T>, gamma: T) -> Result<BrlOutcome<T>, SynthesisError> {
    if !(gamma > T::zero()) {
        return Err(SynthesisError::InvalidOptions("γ must be positive".into()));
    }
    let sys = ErrorSystem { acl: acl.clone(), bcl: bcl.clone(), cz: cz.clone() };
    let n = acl.nrows();
    let lmis = analysis_system(std::slice::from_ref(&sys), gamma);
    Ok(match lmis.find_feasible(&LmiOptions::default())? {
        Feasibility::Feasible { x, .. } => {
            let p = Matrix::sym_from_packed(n, &x);
            let lambda = vec![gamma * gamma; bcl.ncols()];
            // re-check in the unscaled form
            let m = brl_matrix(&sys, &p, &lambda).symmetrize().scale(-T::one());
            if chol_posdef(&m, T::zero()).is_ok() && chol_posdef(&p, T::zero()).is_ok() {
                BrlOutcome::Feasible { p }
            } else {
                BrlOutcome::Inconclusive
            }
        }
        Feasibility::Infeasible { .. } => BrlOutcome::Infeasible,
        Feasibility::Inconclusive { .. } => BrlOutcome::Inconclusive,
    })
}

fn sym_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

/// BRL blocks in `P` alone for fixed closed loops, in the congruence-scaled
/// form `[AᵀP + PA + CᵀC, PB/γ; ·, −I] ≺ 0`, plus `P ≻ 0`.
pub(crate) fn analysis_system<T: Real>(systems: &[ErrorSystem<T>], gamma: T) -> LmiSystem<T> {
    let n = systems[0].acl.nrows();
    let nv = sym_dim(n);
    let basis: Vec<Matrix<T>> = (0..nv).map(|k| Matrix::sym_basis(n, k)).collect();
    let mut lmis = LmiSystem::new(nv);
    for s in systems {
        let m = s.bcl.ncols();
        let ctc = s.cz.transpose().matmul(&s.cz);
        let f0 = Matrix::block_diag(&[&ctc, &Matrix::identity(m).scale(-T::one())]);
        let b = s.bcl.scale(T::one() / gamma);
        let fk = basis
            .iter()
            .map(|e| {
                let ae = s.acl.transpose().matmul(e);
                let tl = &ae + &ae.transpose();
                let eb = e.matmul(&b);
                Matrix::block2(&tl, &eb, &eb.transpose(), &Matrix::zeros(m, m))
            })
            .collect();
        lmis.push(Lmi { f0, fk });
    }
    lmis.push(Lmi { f0: Matrix::zeros(n, n), fk: basis.iter().map(|e| e.scale(-T::one())).collect() });
    lmis
}

/// Joint synthesis blocks in `(P, Y = PL)` over several frozen plants:
/// `[AᵀP + PA + CᵀYᵀ + YC + CzᵀCz, (PB_w + YD_w)S/γ; ·, −I] ≺ 0` with input
/// scaling `S = diag(col_scale)`, plus `P ≻ p_floor·I`.
pub(crate) fn synthesis_system<T: Real>(
    plants: &[PlantMatrices<T>],
    cz: &Matrix<T>,
    gamma: T,
    col_scale: &[T],
    p_floor: T,
) -> LmiSystem<T> {
    let n = plants[0].a.nrows();
    let ny = plants[0].cy.nrows();
    let np = sym_dim(n);
    let nv = np + n * ny;
    let p_basis: Vec<Matrix<T>> = (0..np).map(|k| Matrix::sym_basis(n, k)).collect();
    let y_basis: Vec<Matrix<T>> = (0..n * ny)
        .map(|k| {
            let mut g = Matrix::zeros(n, ny);
            g[(k / ny, k % ny)] = T::one();
            g
        })
        .collect();
    let ctc = cz.transpose().matmul(cz);
    let mut lmis = LmiSystem::new(nv);
    for pl in plants {
        let m = pl.bw.ncols();
        let scale = |b: &Matrix<T>| Matrix::from_fn(b.nrows(), m, |i, j| b[(i, j)] * col_scale[j] / gamma);
        let bs = scale(&pl.bw);
        let ds = scale(&pl.dw);
        let f0 = Matrix::block_diag(&[&ctc, &Matrix::identity(m).scale(-T::one())]);
        let zero = Matrix::zeros(m, m);
        let mut fk = Vec::with_capacity(nv);
        for e in &p_basis {
            let ae = pl.a.transpose().matmul(e);
            let eb = e.matmul(&bs);
            fk.push(Matrix::block2(&(&ae + &ae.transpose()), &eb, &eb.transpose(), &zero));
        }
        for g in &y_basis {
            let gc = g.matmul(&pl.cy);
            let gd = g.matmul(&ds);
            fk.push(Matrix::block2(&(&gc + &gc.transpose()), &gd, &gd.transpose(), &zero));
        }
        lmis.push(Lmi { f0, fk });
    }
    let mut fk: Vec<Matrix<T>> = p_basis.iter().map(|e| e.scale(-T::one())).collect();
    fk.extend(std::iter::repeat_n(Matrix::zeros(n, n), n * ny));
    lmis.push(Lmi { f0: Matrix::identity(n).scale(p_floor), fk });
    lmis
}

/// Splits a synthesis solution into `(P, L = P⁻¹Y)`.
pub(crate) fn recover_gain<T: Real>(x: &[T], n: usize, ny: usize) -> Result<(Matrix<T>, Matrix<T>), SynthesisError> {
    let np = sym_dim(n);
    let p = Matrix::sym_from_packed(n, &x[..np]);
    let y = Matrix::from_row_slice(n, ny, &x[np..np + n * ny]);
    let l = crate::numkernel::solve(&p, &y)?;
    Ok((p, l))
}
