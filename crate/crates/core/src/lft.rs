//! Linear fractional transformations over normalized real parameters.
//!
//! An [`LftModel`] stores the partitioned matrix `[[M11, M12], [M21, M22]]`
//! and one label per uncertainty channel. Closing the upper loop with
//! `Δ = diag(δ_label(k))` gives `M22 + M21 Δ (I − M11 Δ)⁻¹ M12`.
//!
//! Rational functions of the parameters are built with [`LftModel::add`],
//! [`LftModel::mul`], [`LftModel::inverse`] and [`LftModel::scale`]; every
//! operation is exact, so the evaluation of a composite model equals the
//! pointwise operation on the evaluations.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::numkernel::{determinant, min_singular_value, LinalgError, Lu, Matrix};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LftError {
    #[error("invalid bounds [{min}, {max}]: need 0 < min < max")]
    InvalidBounds { min: f64, max: f64 },
    #[error("I − M11·Δ is singular at {at}")]
    IllPosed { at: String },
    #[error("label `{0}` missing from Δ assignment")]
    MissingLabel(String),
    #[error("label `{0}` assigned more than once")]
    DuplicateLabel(String),
    #[error("δ for `{label}` is {value}, outside [-1, 1]")]
    OutOfRange { label: String, value: f64 },
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape { op: &'static str, lhs: (usize, usize), rhs: (usize, usize) },
    #[error("inverse passes through a singular value over the unit box (min σ(I − M11Δ) = {min_singular_value:e})")]
    InverseThroughZero { min_singular_value: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Real parameter `p = p̄ (1 + δ p̃)` with `δ ∈ [−1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainReal<T> {
    pub nominal: T,
    pub relative_spread: T,
    pub label: String,
    min: T,
    max: T,
}

impl<T: Real> UncertainReal<T> {
    /// Parameter spanning `[min, max]`; nominal is the midpoint.
    pub fn new(min: T, max: T, label: impl Into<String>) -> Result<Self, LftError> {
        if !(min > T::zero() && max >= min && max.is_finite()) {
            return Err(LftError::InvalidBounds { min: min.to_f64_lossy(), max: max.to_f64_lossy() });
        }
        let two = T::lit(2.0);
        Ok(Self {
            nominal: (min + max) / two,
            relative_spread: (max - min) / (max + min),
            label: label.into(),
            min,
            max,
        })
    }

    pub fn min(&self) -> T {
        self.min
    }

    pub fn max(&self) -> T {
        self.max
    }

    /// Value at `δ`, in endpoint form so that `δ = ±1` returns the bounds exactly.
    pub fn value(&self, delta: T) -> T {
        let half = T::lit(0.5);
        half * ((T::one() + delta) * self.max + (T::one() - delta) * self.min)
    }

    /// Inverse of [`value`](Self::value); zero for a degenerate interval.
    pub fn normalize(&self, value: T) -> T {
        if self.max == self.min {
            return T::zero();
        }
        (T::lit(2.0) * value - self.max - self.min) / (self.max - self.min)
    }

    /// The parameter itself as a one-channel LFT.
    pub fn to_lft(&self) -> LftModel<T> {
        LftModel {
            m11: Matrix::zeros(1, 1),
            m12: Matrix::scalar(T::one()),
            m21: Matrix::scalar(self.nominal * self.relative_spread),
            m22: Matrix::scalar(self.nominal),
            labels: vec![self.label.clone()],
        }
    }

    /// `1/p` realized with one channel.
    pub fn reciprocal_lft(&self) -> LftModel<T> {
        let s = self.relative_spread;
        LftModel {
            m11: Matrix::scalar(-s),
            m12: Matrix::scalar(T::one()),
            m21: Matrix::scalar(-s / self.nominal),
            m22: Matrix::scalar(T::one() / self.nominal),
            labels: vec![self.label.clone()],
        }
    }
}

/// Normalized values `δ_k ∈ [−1, 1]`, one per label.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeltaAssignment<T> {
    values: BTreeMap<String, T>,
}

impl<T: Real> DeltaAssignment<T> {
    pub fn new() -> Self {
        Self { values: BTreeMap::new() }
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, T)>) -> Result<Self, LftError> {
        let mut out = Self::new();
        for (label, value) in pairs {
            out.insert(label, value)?;
        }
        Ok(out)
    }

    pub fn insert(&mut self, label: impl Into<String>, value: T) -> Result<(), LftError> {
        let label = label.into();
        if !(value.abs() <= T::one()) {
            return Err(LftError::OutOfRange { label, value: value.to_f64_lossy() });
        }
        if self.values.contains_key(&label) {
            return Err(LftError::DuplicateLabel(label));
        }
        self.values.insert(label, value);
        Ok(())
    }

    pub fn get(&self, label: &str) -> Option<T> {
        self.values.get(label).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl<T: Real> fmt::Display for DeltaAssignment<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (k, v)) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}: {v}")?;
        }
        write!(f, "}}")
    }
}

/// Result of [`LftModel::well_posed`].
#[derive(Debug, Clone)]
pub struct WellPosedness<T> {
    pub well_posed: bool,
    pub min_singular_value: T,
    pub worst: DeltaAssignment<T>,
    pub points_checked: usize,
}

/// Upper LFT with labelled repeated-scalar uncertainty.
#[derive(Clone, PartialEq)]
pub struct LftModel<T> {
    m11: Matrix<T>,
    m12: Matrix<T>,
    m21: Matrix<T>,
    m22: Matrix<T>,
    labels: Vec<String>,
}

impl<T: Real> LftModel<T> {
    /// Builds from the four partitions. Panics on inconsistent shapes.
    pub fn from_parts(m11: Matrix<T>, m12: Matrix<T>, m21: Matrix<T>, m22: Matrix<T>, labels: Vec<String>) -> Self {
        let n = labels.len();
        assert_eq!(m11.shape(), (n, n), "M11 must be n×n");
        assert_eq!(m12.shape(), (n, m22.ncols()), "M12 shape");
        assert_eq!(m21.shape(), (m22.nrows(), n), "M21 shape");
        Self { m11, m12, m21, m22, labels }
    }

    /// Parameter-independent matrix.
    pub fn constant(m: Matrix<T>) -> Self {
        let (p, q) = m.shape();
        Self {
            m11: Matrix::zeros(0, 0),
            m12: Matrix::zeros(0, q),
            m21: Matrix::zeros(p, 0),
            m22: m,
            labels: Vec::new(),
        }
    }

    pub fn scalar(c: T) -> Self {
        Self::constant(Matrix::scalar(c))
    }

    /// Output × input dimensions of the evaluated matrix.
    pub fn shape(&self) -> (usize, usize) {
        self.m22.shape()
    }

    pub fn channels(&self) -> usize {
        self.labels.len()
    }

    pub fn channel_labels(&self) -> &[String] {
        &self.labels
    }

    pub fn m11(&self) -> &Matrix<T> {
        &self.m11
    }

    pub fn m12(&self) -> &Matrix<T> {
        &self.m12
    }

    pub fn m21(&self) -> &Matrix<T> {
        &self.m21
    }

    pub fn m22(&self) -> &Matrix<T> {
        &self.m22
    }

    /// Full coefficient matrix `[[M11, M12], [M21, M22]]`.
    pub fn coefficient_matrix(&self) -> Matrix<T> {
        Matrix::block2(&self.m11, &self.m12, &self.m21, &self.m22)
    }

    /// `(label, repetition count)` in order of first appearance.
    pub fn structure(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for l in &self.labels {
            match out.iter_mut().find(|(k, _)| k == l) {
                Some((_, n)) => *n += 1,
                None => out.push((l.clone(), 1)),
            }
        }
        out
    }

    pub fn repetitions(&self, label: &str) -> usize {
        self.labels.iter().filter(|l| *l == label).count()
    }

    fn delta_diag(&self, delta: &DeltaAssignment<T>) -> Result<Vec<T>, LftError> {
        self.labels
            .iter()
            .map(|l| delta.get(l).ok_or_else(|| LftError::MissingLabel(l.clone())))
            .collect()
    }

    /// `I − M11 Δ` for the given channel values.
    fn loop_matrix(&self, d: &[T]) -> Matrix<T> {
        let n = self.labels.len();
        Matrix::from_fn(n, n, |i, j| {
            let id = if i == j { T::one() } else { T::zero() };
            id - self.m11[(i, j)] * d[j]
        })
    }

    /// Closes the loop: `M22 + M21 Δ (I − M11 Δ)⁻¹ M12`.
    pub fn eval(&self, delta: &DeltaAssignment<T>) -> Result<Matrix<T>, LftError> {
        let d = self.delta_diag(delta)?;
        self.eval_diag(&d).map_err(|_| LftError::IllPosed { at: delta.to_string() })
    }

    fn eval_diag(&self, d: &[T]) -> Result<Matrix<T>, LinalgError> {
        if d.is_empty() {
            return Ok(self.m22.clone());
        }
        let lu = Lu::factor(&self.loop_matrix(d))?;
        let x = lu.solve(&self.m12);
        let n = d.len();
        let scaled = Matrix::from_fn(self.m21.nrows(), n, |i, j| self.m21[(i, j)] * d[j]);
        Ok(&self.m22 + &scaled.matmul(&x))
    }

    /// Nominal value, `Δ = 0`.
    pub fn nominal(&self) -> Matrix<T> {
        self.m22.clone()
    }

    /// `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self, LftError> {
        if self.shape() != other.shape() {
            return Err(LftError::Shape { op: "add", lhs: self.shape(), rhs: other.shape() });
        }
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        Ok(Self {
            m11: Matrix::block_diag(&[&self.m11, &other.m11]),
            m12: Matrix::vstack(&[&self.m12, &other.m12]),
            m21: Matrix::hstack(&[&self.m21, &other.m21]),
            m22: &self.m22 + &other.m22,
            labels,
        })
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &Self) -> Result<Self, LftError> {
        if self.shape().1 != other.shape().0 {
            return Err(LftError::Shape { op: "mul", lhs: self.shape(), rhs: other.shape() });
        }
        let (n1, n2) = (self.channels(), other.channels());
        let top = Matrix::hstack(&[&self.m11, &self.m12.matmul(&other.m21)]);
        let bottom = Matrix::hstack(&[&Matrix::zeros(n2, n1), &other.m11]);
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        Ok(Self {
            m11: Matrix::vstack(&[&top, &bottom]),
            m12: Matrix::vstack(&[&self.m12.matmul(&other.m22), &other.m12]),
            m21: Matrix::hstack(&[&self.m21, &self.m22.matmul(&other.m21)]),
            m22: self.m22.matmul(&other.m22),
            labels,
        })
    }

    /// `c · self`.
    pub fn scale(&self, c: T) -> Self {
        Self {
            m11: self.m11.clone(),
            m12: self.m12.clone(),
            m21: self.m21.scale(c),
            m22: self.m22.scale(c),
            labels: self.labels.clone(),
        }
    }

    /// Pointwise inverse. Requires `M22` invertible and the result to stay
    /// well posed over the unit box.
    pub fn inverse(&self) -> Result<Self, LftError> {
        if !self.m22.is_square() {
            return Err(LftError::Shape { op: "inverse", lhs: self.shape(), rhs: self.shape() });
        }
        let lu = Lu::factor(&self.m22)?;
        let d_inv_c = lu.solve(&self.m21);
        let d_inv = lu.solve(&Matrix::identity(self.m22.nrows()));
        let out = Self {
            m11: &self.m11 - &self.m12.matmul(&d_inv_c),
            m12: self.m12.matmul(&d_inv),
            m21: -&d_inv_c,
            m22: d_inv,
            labels: self.labels.clone(),
        };
        let check = out.well_posed(0);
        if !check.well_posed {
            return Err(LftError::InverseThroughZero {
                min_singular_value: check.min_singular_value.to_f64_lossy(),
            });
        }
        Ok(out)
    }

    /// `[self other]`, inputs stacked.
    pub fn hconcat(&self, other: &Self) -> Result<Self, LftError> {
        if self.shape().0 != other.shape().0 {
            return Err(LftError::Shape { op: "hconcat", lhs: self.shape(), rhs: other.shape() });
        }
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        Ok(Self {
            m11: Matrix::block_diag(&[&self.m11, &other.m11]),
            m12: Matrix::block_diag(&[&self.m12, &other.m12]),
            m21: Matrix::hstack(&[&self.m21, &other.m21]),
            m22: Matrix::hstack(&[&self.m22, &other.m22]),
            labels,
        })
    }

    /// `[self; other]`, outputs stacked.
    pub fn vconcat(&self, other: &Self) -> Result<Self, LftError> {
        if self.shape().1 != other.shape().1 {
            return Err(LftError::Shape { op: "vconcat", lhs: self.shape(), rhs: other.shape() });
        }
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        Ok(Self {
            m11: Matrix::block_diag(&[&self.m11, &other.m11]),
            m12: Matrix::vstack(&[&self.m12, &other.m12]),
            m21: Matrix::block_diag(&[&self.m21, &other.m21]),
            m22: Matrix::vstack(&[&self.m22, &other.m22]),
            labels,
        })
    }

    /// `self ⊗ I_r`: the same map applied to `r` independent signals.
    pub fn kron_identity(&self, r: usize) -> Self {
        let k = |m: &Matrix<T>| {
            Matrix::from_fn(m.nrows() * r, m.ncols() * r, |i, j| {
                if i % r == j % r {
                    m[(i / r, j / r)]
                } else {
                    T::zero()
                }
            })
        };
        let labels = self.labels.iter().flat_map(|l| std::iter::repeat_n(l.clone(), r)).collect();
        Self {
            m11: k(&self.m11),
            m12: k(&self.m12),
            m21: k(&self.m21),
            m22: k(&self.m22),
            labels,
        }
    }

    /// Checks `I − M11 Δ` at every vertex of the unit box and at 100
    /// interior points drawn from `seed`.
    pub fn well_posed(&self, seed: u64) -> WellPosedness<T> {
        let labels: Vec<String> = self.structure().into_iter().map(|(l, _)| l).collect();
        let b = labels.len();
        let mut points: Vec<Vec<T>> = Vec::new();
        for mask in 0..(1usize << b) {
            points.push((0..b).map(|i| if mask >> i & 1 == 1 { T::one() } else { -T::one() }).collect());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            points.push((0..b).map(|_| T::lit(rng.gen_range(-1.0..=1.0))).collect());
        }
        // det(I − M11Δ) = 1 at Δ = 0 and the box is connected, so a sign
        // change at any sample means the loop went singular in between.
        let mut best = T::infinity();
        let mut worst = DeltaAssignment::new();
        let mut ok = true;
        for p in &points {
            let delta = DeltaAssignment::from_pairs(labels.iter().cloned().zip(p.iter().copied()))
                .expect("labels are distinct and values in range");
            let d = self.delta_diag(&delta).expect("all labels assigned");
            if d.is_empty() {
                best = best.min(T::one());
                continue;
            }
            let loop_m = self.loop_matrix(&d);
            if !(determinant(&loop_m) > T::zero()) || Lu::factor(&loop_m).is_err() {
                ok = false;
            }
            let smin = min_singular_value(&loop_m).unwrap_or(T::zero());
            if smin < best {
                best = smin;
                worst = delta;
            }
        }
        WellPosedness { well_posed: ok, min_singular_value: best, worst, points_checked: points.len() }
    }
}

impl<T: Real> fmt::Display for LftModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (p, q) = self.shape();
        writeln!(f, "LftModel {p}x{q}, {} channels", self.channels())?;
        write!(f, "structure:")?;
        for (l, n) in self.structure() {
            write!(f, " {l}^{n}")?;
        }
        writeln!(f)?;
        writeln!(f, "nominal:")?;
        for i in 0..p {
            for j in 0..q {
                write!(f, "{:>14.6e}", self.m22[(i, j)])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl<T: fmt::Debug> fmt::Debug for LftModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LftModel")
            .field("m11", &self.m11)
            .field("m12", &self.m12)
            .field("m21", &self.m21)
            .field("m22", &self.m22)
            .field("labels", &self.labels)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma() -> UncertainReal<f64> {
        UncertainReal::new(0.1289, 0.9005, "sigma").unwrap()
    }

    fn at(label: &str, d: f64) -> DeltaAssignment<f64> {
        DeltaAssignment::from_pairs([(label, d)]).unwrap()
    }

    #[test]
    fn table_bounds_normalize() {
        let s = sigma();
        assert!((s.nominal - 0.5147).abs() < 1e-15);
        assert!((s.relative_spread - 0.7716 / 1.0294).abs() < 1e-15);
        assert!((s.relative_spread - 0.74956).abs() < 1e-5);
        let p = UncertainReal::new(0.1218, 1.9005, "psi").unwrap();
        assert_eq!(p.value(1.0), 1.9005);
        assert_eq!(p.value(-1.0), 0.1218);
        let thin = UncertainReal::new(1.0, 1.0 + 1e-12, "t").unwrap();
        assert!(thin.relative_spread < 1e-12);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(UncertainReal::new(0.0, 1.0, "x").is_err());
        assert!(UncertainReal::new(2.0, 1.0, "x").is_err());
        assert!(UncertainReal::new(-1.0, 1.0, "x").is_err());
    }

    #[test]
    fn nominal_and_affine_evaluation() {
        let s = sigma().to_lft();
        assert_eq!(s.eval(&at("sigma", 0.0)).unwrap(), s.nominal());
        let top = s.eval(&at("sigma", 1.0)).unwrap()[(0, 0)];
        assert!((top - 0.9005).abs() < 1e-15);
    }

    #[test]
    fn inverse_cube_matches_scalar_oracle() {
        let u = sigma();
        let r = u.to_lft().inverse().unwrap();
        let cube = r.mul(&r.mul(&r).unwrap()).unwrap();
        assert_eq!(cube.repetitions("sigma"), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let d: f64 = rng.gen_range(-1.0..=1.0);
            let got = cube.eval(&at("sigma", d)).unwrap()[(0, 0)];
            let exact = 1.0 / (u.nominal * (1.0 + d * u.relative_spread)).powi(3);
            assert!(((got - exact) / exact).abs() < 1e-12);
        }
    }

    #[test]
    fn product_add_and_inverse_examples() {
        let s = sigma().to_lft();
        let sq = s.mul(&s).unwrap();
        let v = sigma().value(0.37);
        assert!((sq.eval(&at("sigma", 0.37)).unwrap()[(0, 0)] - v * v).abs() < 1e-12);
        let plus0 = s.add(&LftModel::scalar(0.0)).unwrap();
        assert_eq!(plus0.eval(&at("sigma", 0.37)).unwrap(), s.eval(&at("sigma", 0.37)).unwrap());
        let inv = s.inverse().unwrap();
        assert!((inv.eval(&at("sigma", 0.0)).unwrap()[(0, 0)] - 1.0 / 0.5147).abs() < 1e-15);
        let rec = sigma().reciprocal_lft();
        assert!((rec.eval(&at("sigma", -0.8)).unwrap()[(0, 0)] - 1.0 / sigma().value(-0.8)).abs() < 1e-13);
    }

    #[test]
    fn inverse_through_zero_rejected() {
        // p(δ) = δ crosses zero inside the box
        let m = LftModel::from_parts(
            Matrix::zeros(1, 1),
            Matrix::scalar(1.0),
            Matrix::scalar(1.0),
            Matrix::scalar(0.5),
            vec!["d".into()],
        );
        assert!(matches!(m.inverse(), Err(LftError::InverseThroughZero { .. })));
    }

    #[test]
    fn well_posedness_examples() {
        let trivial = LftModel::from_parts(
            Matrix::zeros(1, 1),
            Matrix::scalar(1.0),
            Matrix::scalar(1.0),
            Matrix::scalar(0.0),
            vec!["a".into()],
        );
        assert!(trivial.well_posed(0).well_posed);
        let bad = LftModel::from_parts(
            Matrix::scalar(1.0),
            Matrix::scalar(1.0),
            Matrix::scalar(1.0),
            Matrix::scalar(0.0),
            vec!["a".into()],
        );
        let w = bad.well_posed(0);
        assert!(!w.well_posed);
        assert_eq!(w.min_singular_value, 0.0);
        assert_eq!(w.worst.get("a"), Some(1.0));
        assert!(matches!(bad.eval(&at("a", 1.0)), Err(LftError::IllPosed { .. })));
    }

    #[test]
    fn assignment_contract() {
        let s = sigma().to_lft();
        assert!(matches!(s.eval(&DeltaAssignment::new()), Err(LftError::MissingLabel(_))));
        let mut d = DeltaAssignment::new();
        d.insert("sigma", 0.1).unwrap();
        assert!(matches!(d.insert("sigma", 0.2), Err(LftError::DuplicateLabel(_))));
        assert!(matches!(d.insert("psi", 1.5), Err(LftError::OutOfRange { .. })));
    }

    #[test]
    fn concat_and_kron() {
        let s = sigma().to_lft();
        let one = LftModel::scalar(1.0);
        let row = s.hconcat(&one).unwrap();
        let col = s.vconcat(&one).unwrap();
        let d = at("sigma", 0.5);
        let v = sigma().value(0.5);
        let r = row.eval(&d).unwrap();
        let c = col.eval(&d).unwrap();
        assert!((r[(0, 0)] - v).abs() < 1e-15 && r[(0, 1)] == 1.0);
        assert!((c[(0, 0)] - v).abs() < 1e-15 && c[(1, 0)] == 1.0);
        let k = s.kron_identity(2);
        assert_eq!(k.structure(), vec![("sigma".to_string(), 2)]);
        let e = k.eval(&d).unwrap();
        assert!((e[(0, 0)] - v).abs() < 1e-15 && e[(0, 1)] == 0.0 && (e[(1, 1)] - v).abs() < 1e-15);
    }

    #[test]
    fn describe_lists_structure() {
        let s = sigma().to_lft().mul(&sigma().reciprocal_lft()).unwrap();
        let text = s.to_string();
        assert!(text.contains("1x1, 2 channels"));
        assert!(text.contains("sigma^2"));
    }
}
