use super::decomp::{sym_eig, Lu};
use super::{LinalgError, Matrix};
use crate::scalar::Real;

/// Complex matrix held as separate real and imaginary parts.
///
/// Solves go through the real `2n × 2n` block form `[[Re, -Im], [Im, Re]]`,
/// so the real LU path is the only factorization in the kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix<T> {
    pub re: Matrix<T>,
    pub im: Matrix<T>,
}

impl<T: Real> ComplexMatrix<T> {
    pub fn new(re: Matrix<T>, im: Matrix<T>) -> Self {
        assert_eq!(re.shape(), im.shape(), "complex parts must share a shape");
        Self { re, im }
    }

    pub fn from_real(re: Matrix<T>) -> Self {
        let im = Matrix::zeros(re.nrows(), re.ncols());
        Self { re, im }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.re.shape()
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    /// Real embedding `[[Re, -Im], [Im, Re]]`.
    pub fn realify(&self) -> Matrix<T> {
        let neg_im = -&self.im;
        Matrix::block2(&self.re, &neg_im, &self.im, &self.re)
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        let re = &self.re.matmul(&rhs.re) - &self.im.matmul(&rhs.im);
        let im = &self.re.matmul(&rhs.im) + &self.im.matmul(&rhs.re);
        Self { re, im }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self {
            re: self.re.transpose(),
            im: (-&self.im).transpose(),
        }
    }

    /// Solves `self · X = B`.
    pub fn solve(&self, b: &Self) -> Result<Self, LinalgError> {
        let n = self.re.nrows();
        let lu = Lu::factor(&self.realify())?;
        let rhs = Matrix::vstack(&[&b.re, &b.im]);
        let x = lu.solve(&rhs);
        Ok(Self {
            re: x.submatrix(0, 0, n, b.re.ncols()),
            im: x.submatrix(n, 0, n, b.re.ncols()),
        })
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Result<Vec<T>, LinalgError> {
        let gram = if self.re.nrows() <= self.re.ncols() {
            self.matmul(&self.adjoint())
        } else {
            self.adjoint().matmul(self)
        };
        let n = gram.re.nrows();
        if n == 0 {
            return Ok(Vec::new());
        }
        // Each eigenvalue of the Hermitian Gram matrix appears twice in its real embedding.
        let eig = sym_eig(&gram.realify().symmetrize())?;
        let mut out: Vec<T> = eig
            .values
            .iter()
            .rev()
            .step_by(2)
            .map(|&l| l.max(T::zero()).sqrt())
            .collect();
        out.truncate(n);
        Ok(out)
    }

    /// Largest singular value. Closed form for one- and two-row Gram matrices.
    pub fn max_singular_value(&self) -> Result<T, LinalgError> {
        let gram = if self.re.nrows() <= self.re.ncols() {
            self.matmul(&self.adjoint())
        } else {
            self.adjoint().matmul(self)
        };
        match gram.re.nrows() {
            0 => Ok(T::zero()),
            1 => Ok(gram.re[(0, 0)].max(T::zero()).sqrt()),
            2 => {
                let a = gram.re[(0, 0)];
                let d = gram.re[(1, 1)];
                let br = gram.re[(0, 1)];
                let bi = gram.im[(0, 1)];
                let half = T::lit(0.5);
                let mid = half * (a + d);
                let rad = ((half * (a - d)).powi(2) + br * br + bi * bi).sqrt();
                Ok((mid + rad).max(T::zero()).sqrt())
            }
            _ => Ok(self.singular_values()?[0]),
        }
    }
}

/// Resolvent `C (jωI − A)⁻¹ B` as a complex matrix.
pub fn frequency_response<T: Real>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    c: &Matrix<T>,
    omega: T,
) -> Result<ComplexMatrix<T>, LinalgError> {
    let n = a.nrows();
    let shifted = ComplexMatrix::new(-a, Matrix::identity(n).scale(omega));
    let x = shifted
        .solve(&ComplexMatrix::from_real(b.clone()))
        .map_err(|e| match e {
            LinalgError::Singular { .. } => LinalgError::SingularResolvent { omega: omega.to_f64_lossy() },
            other => other,
        })?;
    Ok(ComplexMatrix::new(c.matmul(&x.re), c.matmul(&x.im)))
}

/// Largest singular value of `C (jωI − A)⁻¹ B`.
pub fn max_sv_freq<T: Real>(a: &Matrix<T>, b: &Matrix<T>, c: &Matrix<T>, omega: T) -> Result<T, LinalgError> {
    frequency_response(a, b, c, omega)?.max_singular_value()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> Matrix<f64> {
        Matrix::scalar(v)
    }

    #[test]
    fn first_order_gains() {
        assert!((max_sv_freq(&s(-1.0), &s(1.0), &s(1.0), 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((max_sv_freq(&s(-2.0), &s(1.0), &s(1.0), 0.0).unwrap() - 0.5).abs() < 1e-15);
        let hi = max_sv_freq(&s(-1.0), &s(1.0), &s(1.0), 1e8).unwrap();
        assert!(hi < 1e-7);
    }

    #[test]
    fn closed_form_first_order_magnitude() {
        for &(a, b, c) in &[(-1.0, 1.0, 1.0), (-3.5, 2.0, -0.7), (-0.01, 0.3, 4.0)] {
            for &w in &[0.0, 1e-3, 0.5, 2.0, 77.0, 1e3] {
                let got = max_sv_freq(&s(a), &s(b), &s(c), w).unwrap();
                let exact = (c * b).abs() / (w * w + a * a).sqrt();
                assert!((got - exact).abs() <= 1e-12 * exact.max(1e-300), "{a} {w}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn singular_resolvent_reported() {
        let a = Matrix::<f64>::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]);
        let r = max_sv_freq(&a, &Matrix::identity(2), &Matrix::identity(2), 1.0);
        assert!(matches!(r, Err(LinalgError::SingularResolvent { .. })));
    }

    #[test]
    fn closed_form_and_general_path_agree() {
        let re = Matrix::<f64>::from_rows(&[[1.0, 2.0, -1.0, 0.5], [0.3, -0.2, 0.9, 1.1]]);
        let im = Matrix::<f64>::from_rows(&[[0.4, -1.0, 0.0, 0.2], [1.5, 0.1, -0.3, 0.0]]);
        let m = ComplexMatrix::new(re, im);
        let fast = m.max_singular_value().unwrap();
        let slow = m.adjoint().singular_values().unwrap()[0];
        assert!((fast - slow).abs() < 1e-12);
    }
}
