use super::{LinalgError, Matrix};
use crate::scalar::Real;

/// Largest relative asymmetry accepted by [`sym_eig`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymEig<T> {
    /// Eigenvalues in ascending order.
    pub values: Vec<T>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: Matrix<T>,
}

impl<T: Real> SymEig<T> {
    pub fn max(&self) -> T {
        *self.values.last().expect("non-empty spectrum")
    }

    pub fn min(&self) -> T {
        self.values[0]
    }

    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix<T> {
        let n = self.values.len();
        let v = &self.vectors;
        Matrix::from_fn(n, n, |i, j| (0..n).map(|k| v[(i, k)] * self.values[k] * v[(j, k)]).sum())
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig<T: Real>(a: &Matrix<T>) -> Result<SymEig<T>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    let asym = a.asymmetry();
    if asym > T::lit(SYMMETRY_TOL) {
        return Err(LinalgError::NotSymmetric { asymmetry: asym.to_f64_lossy() });
    }
    let n = a.nrows();
    let mut m = a.symmetrize();
    let mut v = Matrix::identity(n);
    let scale = m.frobenius_norm();
    let eps = T::epsilon();

    let mut converged = n < 2 || scale == T::zero();
    for _sweep in 0..100 {
        if converged {
            break;
        }
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= eps * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                m[(p, q)] = T::zero();
                m[(q, p)] = T::zero();
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence("jacobi"));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(SymEig { values, vectors })
}

/// Largest eigenvalue of a symmetric matrix.
pub fn sym_max_eig<T: Real>(a: &Matrix<T>) -> Result<T, LinalgError> {
    Ok(sym_eig(a)?.max())
}

/// Cholesky factor `L` (lower triangular) with `L Lᵀ = A`.
///
/// A pivot at or below `tol · max|diag(A)|` is reported as
/// [`LinalgError::NotPositiveDefinite`]; this is the definiteness test used by
/// the LMI layer.
pub fn chol_posdef<T: Real>(a: &Matrix<T>, tol: T) -> Result<Matrix<T>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    let n = a.nrows();
    let max_diag = a.diag().into_iter().fold(T::zero(), |m, d| m.max(d.abs()));
    let floor = tol * max_diag;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > floor) || d <= T::zero() {
            return Err(LinalgError::NotPositiveDefinite { pivot: j, value: d.to_f64_lossy() });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// `true` if `A ≻ 0` by the Cholesky test.
pub fn is_posdef<T: Real>(a: &Matrix<T>, tol: T) -> bool {
    chol_posdef(a, tol).is_ok()
}

/// Solves `L X = B` for lower-triangular `L`.
pub fn forward_subst<T: Real>(l: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let n = l.nrows();
    let mut x = b.clone();
    for c in 0..b.ncols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// LU factorization with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    /// Factors `A`; a pivot below `n · ε · max|A|` is reported as singular.
    pub fn factor(a: &Matrix<T>) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare { rows: a.nrows(), cols: a.ncols() });
        }
        let n = a.nrows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let thresh = T::from_usize_lossy(n.max(1)) * T::epsilon() * a.max_abs();
        for k in 0..n {
            let mut piv = k;
            let mut best = lu[(k, k)].abs();
            for i in (k + 1)..n {
                if lu[(i, k)].abs() > best {
                    best = lu[(i, k)].abs();
                    piv = i;
                }
            }
            if best <= thresh || best == T::zero() {
                return Err(LinalgError::Singular { pivot: k });
            }
            if piv != k {
                perm.swap(piv, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = tmp;
                }
            }
            let d = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != T::zero() {
                    for j in (k + 1)..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= f * u;
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &Matrix<T>) -> Matrix<T> {
        let n = self.lu.nrows();
        assert_eq!(b.nrows(), n, "lu solve dimension mismatch");
        let mut x = Matrix::from_fn(n, b.ncols(), |i, j| b[(self.perm[i], j)]);
        for c in 0..b.ncols() {
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in (i + 1)..n {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / self.lu[(i, i)];
            }
        }
        x
    }

    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        self.solve(&Matrix::column(b)).col_vec(0)
    }
}

pub fn solve<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, LinalgError> {
    Ok(Lu::factor(a)?.solve(b))
}

pub fn inverse<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>, LinalgError> {
    solve(a, &Matrix::identity(a.nrows()))
}

/// Singular values of a real matrix, descending.
/// Determinant by partial-pivoting elimination; exact zero pivots give 0.
pub fn determinant<T: Real>(a: &Matrix<T>) -> T {
    assert!(a.is_square(), "determinant of a non-square matrix");
    let n = a.nrows();
    let mut m = a.clone();
    let mut det = T::one();
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| m[(i, k)].abs().partial_cmp(&m[(j, k)].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap_or(k);
        if m[(piv, k)] == T::zero() {
            return T::zero();
        }
        if piv != k {
            for j in 0..n {
                let t = m[(k, j)];
                m[(k, j)] = m[(piv, j)];
                m[(piv, j)] = t;
            }
            det = -det;
        }
        let d = m[(k, k)];
        det *= d;
        for i in (k + 1)..n {
            let f = m[(i, k)] / d;
            for j in (k + 1)..n {
                let u = m[(k, j)];
                m[(i, j)] -= f * u;
            }
        }
    }
    det
}

pub fn singular_values<T: Real>(a: &Matrix<T>) -> Result<Vec<T>, LinalgError> {
    let gram = if a.nrows() <= a.ncols() {
        a.matmul(&a.transpose())
    } else {
        a.transpose().matmul(a)
    };
    if gram.nrows() == 0 {
        return Ok(Vec::new());
    }
    let eig = sym_eig(&gram.symmetrize())?;
    Ok(eig.values.iter().rev().map(|&l| l.max(T::zero()).sqrt()).collect())
}

pub fn min_singular_value<T: Real>(a: &Matrix<T>) -> Result<T, LinalgError> {
    assert!(a.is_square());
    let sv = singular_values(a)?;
    Ok(sv.last().copied().unwrap_or(T::zero()))
}

pub fn max_singular_value<T: Real>(a: &Matrix<T>) -> Result<T, LinalgError> {
    let sv = singular_values(a)?;
    Ok(sv.first().copied().unwrap_or(T::zero()))
}

/// Eigenvalues `(re, im)` of a general real square matrix
/// (Hessenberg reduction followed by Francis double-shift QR).
pub fn eigenvalues<T: Real>(a: &Matrix<T>) -> Result<Vec<(T, T)>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    // 1-based working copy keeps the QR sweep indices readable.
    let mut h = vec![vec![T::zero(); n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            h[i + 1][j + 1] = a[(i, j)];
        }
    }
    hessenberg(&mut h, n);
    hqr(&mut h, n)
}

fn hessenberg<T: Real>(a: &mut [Vec<T>], n: usize) {
    for m in 2..n {
        let mut x = T::zero();
        let mut i = m;
        for j in m..=n {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                i = j;
            }
        }
        if i != m {
            for j in (m - 1)..=n {
                let t = a[i][j];
                a[i][j] = a[m][j];
                a[m][j] = t;
            }
            for row in a.iter_mut().take(n + 1).skip(1) {
                row.swap(i, m);
            }
        }
        if x != T::zero() {
            for i in (m + 1)..=n {
                let mut y = a[i][m - 1];
                if y != T::zero() {
                    y /= x;
                    a[i][m - 1] = y;
                    for j in m..=n {
                        let amj = a[m][j];
                        a[i][j] -= y * amj;
                    }
                    for row in a.iter_mut().take(n + 1).skip(1) {
                        let aji = row[i];
                        row[m] += y * aji;
                    }
                }
            }
        }
    }
    for i in 3..=n {
        for j in 1..(i - 1) {
            a[i][j] = T::zero();
        }
    }
}

fn sign<T: Real>(a: T, b: T) -> T {
    if b >= T::zero() {
        a.abs()
    } else {
        -a.abs()
    }
}

#[allow(clippy::many_single_char_names)]
fn hqr<T: Real>(a: &mut [Vec<T>], n: usize) -> Result<Vec<(T, T)>, LinalgError> {
    let mut wr = vec![T::zero(); n + 1];
    let mut wi = vec![T::zero(); n + 1];
    let mut anorm = T::zero();
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let (mut p, mut q, mut r): (T, T, T);
    let (mut x, mut y, mut z, mut w);
    let mut nn = n as isize;
    let mut t = T::zero();
    let quarter3 = T::lit(0.75);
    let c4375 = T::lit(0.4375);
    while nn >= 1 {
        let mut its = 0;
        let mut l: isize;
        loop {
            l = nn;
            while l >= 2 {
                let lu = l as usize;
                let mut s = a[lu - 1][lu - 1].abs() + a[lu][lu].abs();
                if s == T::zero() {
                    s = anorm;
                }
                if a[lu][lu - 1].abs() + s == s {
                    a[lu][lu - 1] = T::zero();
                    break;
                }
                l -= 1;
            }
            let nu = nn as usize;
            x = a[nu][nu];
            if l == nn {
                wr[nu] = x + t;
                wi[nu] = T::zero();
                nn -= 1;
            } else {
                y = a[nu - 1][nu - 1];
                w = a[nu][nu - 1] * a[nu - 1][nu];
                if l == nn - 1 {
                    p = T::lit(0.5) * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= T::zero() {
                        z = p + sign(z, p);
                        wr[nu - 1] = x + z;
                        wr[nu] = x + z;
                        if z != T::zero() {
                            wr[nu] = x - w / z;
                        }
                        wi[nu - 1] = T::zero();
                        wi[nu] = T::zero();
                    } else {
                        wr[nu - 1] = x + p;
                        wr[nu] = x + p;
                        wi[nu - 1] = -z;
                        wi[nu] = z;
                    }
                    nn -= 2;
                } else {
                    if its == 60 {
                        return Err(LinalgError::NoConvergence("hqr"));
                    }
                    if its == 10 || its == 20 {
                        t += x;
                        for i in 1..=nu {
                            a[i][i] -= x;
                        }
                        let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                        x = quarter3 * s;
                        y = x;
                        w = -c4375 * s * s;
                    }
                    its += 1;
                    let lu = l as usize;
                    let mut m = nu - 2;
                    loop {
                        z = a[m][m];
                        r = x - z;
                        let s0 = y - z;
                        p = (r * s0 - w) / a[m + 1][m] + a[m][m + 1];
                        q = a[m + 1][m + 1] - z - r - s0;
                        r = a[m + 2][m + 1];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == lu {
                            break;
                        }
                        let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in (m + 2)..=nu {
                        a[i][i - 2] = T::zero();
                        if i != m + 2 {
                            a[i][i - 3] = T::zero();
                        }
                    }
                    let mut k = m;
                    while k < nu {
                        if k != m {
                            p = a[k][k - 1];
                            q = a[k + 1][k - 1];
                            r = T::zero();
                            if k != nu - 1 {
                                r = a[k + 2][k - 1];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != T::zero() {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != T::zero() {
                            if k == m {
                                if l as usize != m {
                                    a[k][k - 1] = -a[k][k - 1];
                                }
                            } else {
                                a[k][k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nu {
                                p = a[k][j] + q * a[k + 1][j];
                                if k != nu - 1 {
                                    p += r * a[k + 2][j];
                                    a[k + 2][j] -= p * z;
                                }
                                a[k + 1][j] -= p * y;
                                a[k][j] -= p * x;
                            }
                            let mmin = if nu < k + 3 { nu } else { k + 3 };
                            for i in lu..=mmin {
                                p = x * a[i][k] + y * a[i][k + 1];
                                if k != nu - 1 {
                                    p += z * a[i][k + 2];
                                    a[i][k + 2] -= p * r;
                                }
                                a[i][k + 1] -= p * q;
                                a[i][k] -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if !(nn >= 1 && l < nn - 1) {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| (wr[i], wi[i])).collect())
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa<T: Real>(a: &Matrix<T>) -> Result<T, LinalgError> {
    Ok(eigenvalues(a)?
        .into_iter()
        .fold(T::neg_infinity(), |m, (re, _)| m.max(re)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_matrix(n: usize, seed: u64) -> Matrix<f64> {
        let mut s = seed;
        Matrix::from_fn(n, n, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn identity_and_diagonal_spectra() {
        let e = sym_eig(&Matrix::<f64>::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        let d = sym_eig(&Matrix::from_diag(&[2.0, -1.0])).unwrap();
        assert_eq!(d.values, vec![-1.0, 2.0]);
    }

    #[test]
    fn random_symmetric_reconstruction() {
        let a = lcg_matrix(6, 7);
        let s = &a + &a.transpose();
        let e = sym_eig(&s).unwrap();
        let r = &e.reconstruct() - &s;
        assert!(r.max_abs() < 1e-10 * s.max_abs());
        let vtv = e.vectors.transpose().matmul(&e.vectors);
        assert!((&vtv - &Matrix::identity(6)).max_abs() < 1e-10);
    }

    #[test]
    fn rejects_nonsymmetric() {
        let a = Matrix::<f64>::from_rows(&[[1.0, 2.0], [0.0, 1.0]]);
        assert!(matches!(sym_eig(&a), Err(LinalgError::NotSymmetric { .. })));
    }

    #[test]
    fn cholesky_cases() {
        let l = chol_posdef(&Matrix::<f64>::identity(2), 0.0).unwrap();
        assert_eq!(l, Matrix::identity(2));
        assert!(matches!(
            chol_posdef(&Matrix::<f64>::from_diag(&[1.0, -1.0]), 0.0),
            Err(LinalgError::NotPositiveDefinite { pivot: 1, .. })
        ));
        let a = Matrix::<f64>::from_rows(&[[4.0, 2.0], [2.0, 3.0]]);
        let l = chol_posdef(&a, 0.0).unwrap();
        let back = l.matmul(&l.transpose());
        assert!((&back - &a).max_abs() < 1e-12);
        assert_eq!(l[(0, 1)], 0.0);
    }

    #[test]
    fn lu_solve_and_singular() {
        let a = Matrix::<f64>::from_rows(&[[0.0, 2.0], [3.0, 1.0]]);
        let x = solve(&a, &Matrix::column(&[4.0, 5.0])).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-14 && (x[(1, 0)] - 2.0).abs() < 1e-14);
        let s = Matrix::<f64>::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert!(matches!(Lu::factor(&s), Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn general_eigenvalues_match_invariants() {
        for seed in 0..20 {
            let a = lcg_matrix(5, seed);
            let ev = eigenvalues(&a).unwrap();
            let tr: f64 = ev.iter().map(|e| e.0).sum();
            assert!((tr - a.trace()).abs() < 1e-10, "trace mismatch");
            let im_sum: f64 = ev.iter().map(|e| e.1).sum();
            assert!(im_sum.abs() < 1e-10);
            // each eigenvalue makes A - λI singular
            for &(re, im) in &ev {
                let c = crate::numkernel::ComplexMatrix::new(
                    &a - &Matrix::identity(5).scale(re),
                    Matrix::identity(5).scale(-im),
                );
                // Gram-based singular values resolve down to about sqrt(eps)
                let sv = c.singular_values().unwrap();
                assert!(*sv.last().unwrap() < 1e-7 * sv[0], "seed {seed}: {sv:?}");
            }
        }
    }

    #[test]
    fn determinant_sign_and_value() {
        let a = Matrix::<f64>::from_rows(&[[0.0, 2.0], [3.0, 1.0]]);
        assert_eq!(determinant(&a), -6.0);
        assert_eq!(determinant(&Matrix::<f64>::from_rows(&[[1.0, 2.0], [2.0, 4.0]])), 0.0);
        assert_eq!(determinant(&Matrix::<f64>::zeros(0, 0)), 1.0);
    }

    #[test]
    fn rotation_generator_spectrum() {
        let a = Matrix::<f64>::from_rows(&[[0.0, 1.0], [-4.0, 0.0]]);
        let ev = eigenvalues(&a).unwrap();
        for (re, im) in ev {
            assert!(re.abs() < 1e-14);
            assert!((im.abs() - 2.0).abs() < 1e-12);
        }
        let d = Matrix::<f64>::from_rows(&[[0.0, 1.0], [0.0, 0.0]]);
        assert_eq!(spectral_abscissa(&d).unwrap(), 0.0);
    }

    #[test]
    fn f32_jacobi() {
        let a = Matrix::<f32>::from_rows(&[[2.0, 1.0], [1.0, 2.0]]);
        let e = sym_eig(&a).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-6 && (e.values[1] - 3.0).abs() < 1e-6);
    }
}
