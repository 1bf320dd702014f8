//! Small dense LMI solver: log-det barrier with damped Newton steps.
//!
//! Every constraint has the form `F(x) = F0 + Σ x_k F_k ≺ 0`. Feasibility is
//! decided by the phase-one problem `min t  s.t.  F_j(x) ≼ t I`; a point with
//! `t < 0` is accepted only after a Cholesky test of `−F_j(x)`, and
//! infeasibility is declared when the central-path lower bound on `t`
//! is positive.

use thiserror::Error;

use crate::numkernel::{chol_posdef, forward_subst, sym_max_eig, Matrix};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LmiError {
    #[error("starting point is not strictly feasible")]
    InfeasibleStart,
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// `F0 + Σ x_k F_k ≺ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lmi<T> {
    pub f0: Matrix<T>,
    pub fk: Vec<Matrix<T>>,
}

impl<T: Real> Lmi<T> {
    pub fn dim(&self) -> usize {
        self.f0.nrows()
    }

    pub fn eval(&self, x: &[T]) -> Matrix<T> {
        let mut m = self.f0.clone();
        for (xk, fk) in x.iter().zip(&self.fk) {
            if *xk != T::zero() {
                m = &m + &fk.scale(*xk);
            }
        }
        m
    }
}

/// A set of strict LMIs in `nvars` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiSystem<T> {
    pub nvars: usize,
    pub lmis: Vec<Lmi<T>>,
    /// Variables are kept inside `‖x‖ < radius`, which keeps the barrier
    /// bounded when the constraints are homogeneous in some direction.
    pub radius: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmiOptions<T> {
    /// Feasible points must satisfy `F_j(x) ≼ −margin·I` (checked by Cholesky).
    pub margin: T,
    /// Relative barrier gap at which minimization stops.
    pub gap_tol: T,
    pub max_newton: usize,
    pub max_outer: usize,
    /// Keep optimizing `t` after the first certified point, maximizing the margin.
    pub maximize_margin: bool,
}

impl<T: Real> Default for LmiOptions<T> {
    fn default() -> Self {
        Self { margin: T::lit(1e-10), gap_tol: T::lit(1e-9), max_newton: 200, max_outer: 40, maximize_margin: false }
    }
}

/// Outcome of a feasibility test.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility<T> {
    /// Certified point and its largest constraint eigenvalue.
    Feasible { x: Vec<T>, max_eig: T },
    /// Lower bound on the optimal `t` is positive.
    Infeasible { lower_bound: T },
    /// Neither certificate could be produced.
    Inconclusive { best_t: T, lower_bound: T },
}

impl<T> Feasibility<T> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

/// Result of [`minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub objective: T,
    /// Duality-gap bound `m/τ` at termination.
    pub gap: T,
}

struct Eval<T> {
    value: T,
    grad: Vec<T>,
    hess: Matrix<T>,
}

impl<T: Real> LmiSystem<T> {
    pub fn new(nvars: usize) -> Self {
        Self { nvars, lmis: Vec::new(), radius: T::lit(1e6) }
    }

    pub fn push(&mut self, lmi: Lmi<T>) {
        assert_eq!(lmi.fk.len(), self.nvars, "one coefficient matrix per variable");
        for f in &lmi.fk {
            assert_eq!(f.shape(), lmi.f0.shape(), "coefficient shape");
        }
        self.lmis.push(lmi);
    }

    /// Total barrier degree `Σ dim F_j + 1`.
    fn degree(&self) -> usize {
        self.lmis.iter().map(|l| l.dim()).sum::<usize>() + 1
    }

    /// Largest eigenvalue over all constraints.
    pub fn max_eig(&self, x: &[T]) -> Result<T, LmiError> {
        let mut worst = T::neg_infinity();
        for l in &self.lmis {
            let e = sym_max_eig(&l.eval(x).symmetrize()).map_err(|e| LmiError::Numerical(e.to_string()))?;
            worst = worst.max(e);
        }
        Ok(worst)
    }

    /// Cholesky test of `−F_j(x) − margin·I ≻ 0` for every constraint.
    pub fn certify(&self, x: &[T], margin: T) -> bool {
        self.lmis.iter().all(|l| {
            let n = l.dim();
            let m = (&l.eval(x).symmetrize() + &Matrix::identity(n).scale(margin)).scale(-T::one());
            chol_posdef(&m, T::zero()).is_ok()
        })
    }

    /// Same constraints shifted by `−t I`, with `t` appended as the last variable.
    fn phase_one(&self) -> LmiSystem<T> {
        let lmis = self
            .lmis
            .iter()
            .map(|l| {
                let mut fk = l.fk.clone();
                fk.push(Matrix::identity(l.dim()).scale(-T::one()));
                Lmi { f0: l.f0.clone(), fk }
            })
            .collect();
        LmiSystem { nvars: self.nvars + 1, lmis, radius: self.radius }
    }

    /// Barrier value, gradient and Hessian of `τ cᵀx − Σ log det(−F_j) − log(r² − ‖x_b‖²)`,
    /// where `x_b` are the first `ball` variables. `None` outside the domain.
    fn barrier(&self, x: &[T], c: &[T], tau: T, ball: usize) -> Option<Eval<T>> {
        let nv = self.nvars;
        let mut value = T::zero();
        let mut grad: Vec<T> = c.iter().map(|&ci| tau * ci).collect();
        let mut hess = Matrix::zeros(nv, nv);
        for (ci, xi) in c.iter().zip(x) {
            value += tau * *ci * *xi;
        }
        for l in &self.lmis {
            let s = l.eval(x).symmetrize().scale(-T::one());
            let r = chol_posdef(&s, T::zero()).ok()?;
            for i in 0..r.nrows() {
                value -= T::lit(2.0) * r[(i, i)].ln();
            }
            // M_k = R⁻¹ F_k R⁻ᵀ
            let mk: Vec<Option<Matrix<T>>> = l
                .fk
                .iter()
                .map(|f| {
                    if f.max_abs() == T::zero() {
                        None
                    } else {
                        let a = forward_subst(&r, f);
                        Some(forward_subst(&r, &a.transpose()))
                    }
                })
                .collect();
            for a in 0..nv {
                let Some(ma) = &mk[a] else { continue };
                grad[a] += ma.trace();
                for b in a..nv {
                    let Some(mb) = &mk[b] else { continue };
                    let h: T = ma.as_slice().iter().zip(mb.as_slice()).map(|(&p, &q)| p * q).sum();
                    hess[(a, b)] += h;
                    if a != b {
                        hess[(b, a)] += h;
                    }
                }
            }
        }
        let r2 = self.radius * self.radius;
        let nrm: T = x[..ball].iter().map(|&v| v * v).sum();
        let slack = r2 - nrm;
        if !(slack > T::zero()) {
            return None;
        }
        value -= slack.ln();
        for a in 0..ball {
            grad[a] += T::lit(2.0) * x[a] / slack;
            for b in 0..ball {
                let mut h = T::lit(4.0) * x[a] * x[b] / (slack * slack);
                if a == b {
                    h += T::lit(2.0) / slack;
                }
                hess[(a, b)] += h;
            }
        }
        if !value.is_finite() {
            return None;
        }
        Some(Eval { value, grad, hess })
    }

    /// Damped Newton step `−H⁻¹ g` and the squared Newton decrement.
    fn newton_step(e: &Eval<T>) -> Result<(Vec<T>, T), LmiError> {
        let n = e.grad.len();
        let scale = e.hess.diag().into_iter().fold(T::zero(), |m, v| m.max(v.abs())).max(T::min_positive_value());
        let mut reg = T::zero();
        for _ in 0..12 {
            let h = &e.hess + &Matrix::identity(n).scale(reg);
            if let Ok(l) = chol_posdef(&h, T::zero()) {
                let y = forward_subst(&l, &Matrix::column(&e.grad)).col_vec(0);
                let mut dx = vec![T::zero(); n];
                for i in (0..n).rev() {
                    let mut acc = y[i];
                    for k in (i + 1)..n {
                        acc -= l[(k, i)] * dx[k];
                    }
                    dx[i] = acc / l[(i, i)];
                }
                dx.iter_mut().for_each(|v| *v = -*v);
                let dec = -dx.iter().zip(&e.grad).map(|(&a, &b)| a * b).sum::<T>();
                return Ok((dx, dec));
            }
            reg = if reg == T::zero() { scale * T::epsilon() * T::lit(16.0) } else { reg * T::lit(100.0) };
        }
        Err(LmiError::Numerical("barrier Hessian not positive definite".into()))
    }

    /// Newton centering at fixed `τ`. `watch` is called after every accepted
    /// step and can end the run early by returning `true`.
    fn center(
        &self,
        x: &mut Vec<T>,
        c: &[T],
        tau: T,
        ball: usize,
        opts: &LmiOptions<T>,
        watch: &mut dyn FnMut(&[T]) -> bool,
    ) -> Result<bool, LmiError> {
        for _ in 0..opts.max_newton {
            let e = self.barrier(x, c, tau, ball).ok_or(LmiError::InfeasibleStart)?;
            let (dx, dec) = Self::newton_step(&e)?;
            if !(dec >= T::zero()) {
                return Err(LmiError::Numerical("negative Newton decrement".into()));
            }
            if dec / T::lit(2.0) <= T::lit(1e-10) {
                return Ok(false);
            }
            let slope = -dec;
            let mut s = T::one();
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<T> = x.iter().zip(&dx).map(|(&a, &d)| a + s * d).collect();
                if let Some(te) = self.barrier(&trial, c, tau, ball) {
                    if te.value <= e.value + T::lit(0.25) * s * slope {
                        *x = trial;
                        accepted = true;
                        break;
                    }
                }
                s *= T::lit(0.5);
            }
            if !accepted {
                // no further progress possible at working precision
                return Ok(false);
            }
            if watch(x) {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Decides strict feasibility of the system.
    pub fn find_feasible(&self, opts: &LmiOptions<T>) -> Result<Feasibility<T>, LmiError> {
        let nv = self.nvars;
        if self.lmis.is_empty() {
            return Ok(Feasibility::Feasible { x: vec![T::zero(); nv], max_eig: T::neg_infinity() });
        }
        let x0 = vec![T::zero(); nv];
        let lam0 = self.max_eig(&x0)?;
        if lam0 < -opts.margin && self.certify(&x0, opts.margin) && !opts.maximize_margin {
            return Ok(Feasibility::Feasible { x: x0, max_eig: lam0 });
        }
        let p1 = self.phase_one();
        let mut z = x0.clone();
        z.push(lam0.abs().max(T::one()) + lam0);
        let mut c = vec![T::zero(); nv + 1];
        c[nv] = T::one();
        let m = T::from_usize_lossy(p1.degree());

        let mut best: Option<Vec<T>> = None;
        let mut tau = T::one() / (lam0.abs().max(T::lit(1e-3)));
        let mut lower = T::neg_infinity();
        for _ in 0..opts.max_outer {
            let mut watch = |z: &[T]| -> bool {
                let t = z[nv];
                if t < -opts.margin && self.certify(&z[..nv], opts.margin) {
                    best = Some(z[..nv].to_vec());
                    return !opts.maximize_margin;
                }
                false
            };
            let stopped = p1.center(&mut z, &c, tau, nv, opts, &mut watch)?;
            if stopped {
                break;
            }
            let t = z[nv];
            lower = lower.max(t - m / tau);
            if lower > T::zero() {
                return Ok(Feasibility::Infeasible { lower_bound: lower });
            }
            if m / tau <= opts.gap_tol * t.abs().max(T::one()) {
                break;
            }
            tau *= T::lit(10.0);
        }
        match best {
            Some(x) => {
                let max_eig = self.max_eig(&x)?;
                Ok(Feasibility::Feasible { x, max_eig })
            }
            None => Ok(Feasibility::Inconclusive { best_t: z[nv], lower_bound: lower }),
        }
    }

    /// Minimizes `cᵀx` over the strictly feasible set starting from `x0`.
    pub fn minimize(&self, c: &[T], x0: &[T], opts: &LmiOptions<T>) -> Result<Minimum<T>, LmiError> {
        assert_eq!(c.len(), self.nvars);
        if !self.certify(x0, T::zero()) {
            return Err(LmiError::InfeasibleStart);
        }
        let m = T::from_usize_lossy(self.degree());
        let mut x = x0.to_vec();
        let obj = |x: &[T]| c.iter().zip(x).map(|(&a, &b)| a * b).sum::<T>();
        let mut tau = T::one() / obj(&x).abs().max(T::lit(1e-6));
        for _ in 0..opts.max_outer {
            let mut none = |_: &[T]| false;
            self.center(&mut x, c, tau, self.nvars, opts, &mut none)?;
            if m / tau <= opts.gap_tol * obj(&x).abs().max(T::lit(1e-12)) {
                break;
            }
            tau *= T::lit(10.0);
        }
        Ok(Minimum { objective: obj(&x), gap: m / tau, x })
    }
}
