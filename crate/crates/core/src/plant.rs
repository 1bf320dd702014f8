//! The estimator plant as one exact LFT in (δ_σ, δ_ψ).
//!
//! The evaluated matrix is 8×11:
//!
//! ```text
//!          x (4)   w (6)   1
//! ẋ  [   A(ρ)    B_w    b(ρ) ]
//! y  [ C_y(ρ)  D_w(ρ)  d(ρ) ]
//! ```

use crate::cr3bp::{lpv_matrices, ParameterBox, Rho, PSI, SIGMA};
use crate::lft::{DeltaAssignment, LftError, LftModel};
use crate::numkernel::Matrix;
use crate::scalar::Real;
use crate::sensing::{measurement_matrices, NoiseWeights};

pub const NX: usize = 4;
pub const NW: usize = 6;
pub const NY: usize = 4;
pub const NZ: usize = 2;
const COL_W: usize = NX;
const COL_ONE: usize = NX + NW;

/// Frozen plant at one ρ.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantMatrices<T> {
    pub a: Matrix<T>,
    pub b: Vec<T>,
    pub bw: Matrix<T>,
    pub cy: Matrix<T>,
    pub d: Vec<T>,
    pub dw: Matrix<T>,
}

impl<T: Real> PlantMatrices<T> {
    /// Direct rational formulas, no LFT.
    pub fn direct(rho: Rho<T>, pi2: T, weights: &NoiseWeights<T>) -> Self {
        let (a, b) = lpv_matrices(rho, pi2);
        let (cy, d) = measurement_matrices(rho, pi2);
        Self { a, b: b.to_vec(), bw: bw(), cy, d: d.to_vec(), dw: weights.dw(rho) }
    }

    fn from_stacked(m: &Matrix<T>) -> Self {
        Self {
            a: m.submatrix(0, 0, NX, NX),
            b: m.submatrix(0, COL_ONE, NX, 1).col_vec(0),
            bw: m.submatrix(0, COL_W, NX, NW),
            cy: m.submatrix(NX, 0, NY, NX),
            d: m.submatrix(NX, COL_ONE, NY, 1).col_vec(0),
            dw: m.submatrix(NX, COL_W, NY, NW),
        }
    }

    pub fn stacked(&self) -> Matrix<T> {
        let top = Matrix::hstack(&[&self.a, &self.bw, &Matrix::column(&self.b)]);
        let bottom = Matrix::hstack(&[&self.cy, &self.dw, &Matrix::column(&self.d)]);
        Matrix::vstack(&[&top, &bottom])
    }
}

/// `B_w = [0; I₂ | 0]`, 4×6.
pub fn bw<T: Real>() -> Matrix<T> {
    let mut m = Matrix::zeros(NX, NW);
    m[(2, 0)] = T::one();
    m[(3, 1)] = T::one();
    m
}

/// `C_z = [I₂ 0]`.
pub fn cz<T: Real>() -> Matrix<T> {
    let mut m = Matrix::zeros(NZ, NX);
    m[(0, 0)] = T::one();
    m[(1, 1)] = T::one();
    m
}

/// Plant LFT over a parameter box.
#[derive(Debug, Clone)]
pub struct PlantLft<T> {
    pub model: LftModel<T>,
    pub bounds: ParameterBox<T>,
    pub pi2: T,
}

fn selector<T: Real>(rows: usize, cols: usize, ones: &[(usize, usize, T)]) -> Matrix<T> {
    let mut m = Matrix::zeros(rows, cols);
    for &(i, j, v) in ones {
        m[(i, j)] += v;
    }
    m
}

/// `U · (f ⊗ I_r) · V` for a scalar LFT `f`.
fn place<T: Real>(f: &LftModel<T>, u: &Matrix<T>, v: &Matrix<T>) -> Result<LftModel<T>, LftError> {
    let r = u.ncols();
    LftModel::constant(u.clone()).mul(&f.kron_identity(r))?.mul(&LftModel::constant(v.clone()))
}

impl<T: Real> PlantLft<T> {
    pub fn new(bounds: &ParameterBox<T>, pi2: T, weights: &NoiseWeights<T>) -> Result<Self, LftError> {
        let s = bounds.sigma_param()?;
        let p = bounds.psi_param()?;
        let one = T::one();
        let (rows, cols) = (NX + NY, NX + NW + 1);

        let inv_s = s.reciprocal_lft();
        let inv_p = p.reciprocal_lft();
        let inv_s3 = inv_s.mul(&inv_s.mul(&inv_s)?)?;
        let inv_p3 = inv_p.mul(&inv_p.mul(&inv_p)?)?;

        let a = inv_s3.scale(pi2 - one).add(&inv_p3.scale(-pi2))?.add(&LftModel::scalar(one))?;
        let b3 = inv_p3.add(&inv_s3.scale(-one))?.scale(pi2 * (one - pi2));
        let affine = |w: crate::sensing::Affine<T>, param: &crate::lft::UncertainReal<T>| {
            LftModel::scalar(w.c0).add(&param.to_lft().scale(w.c1))
        };
        let ws = affine(weights.sigma, &s)?;
        let wp = affine(weights.psi, &p)?;

        let mut constant = Matrix::zeros(rows, cols);
        constant[(0, 2)] = one;
        constant[(1, 3)] = one;
        constant[(2, 3)] = T::lit(2.0);
        constant[(3, 2)] = T::lit(-2.0);
        constant[(2, COL_W)] = one;
        constant[(3, COL_W + 1)] = one;

        let terms = [
            place(&a, &selector(rows, 2, &[(2, 0, one), (3, 1, one)]), &selector(2, cols, &[(0, 0, one), (1, 1, one)]))?,
            place(&b3, &selector(rows, 1, &[(2, 0, one)]), &selector(1, cols, &[(0, COL_ONE, one)]))?,
            place(
                &inv_s,
                &selector(rows, 2, &[(4, 0, one), (5, 1, one)]),
                &selector(2, cols, &[(0, 1, one), (1, 0, one), (1, COL_ONE, pi2)]),
            )?,
            place(
                &inv_p,
                &selector(rows, 2, &[(6, 0, one), (7, 1, one)]),
                &selector(2, cols, &[(0, 1, one), (1, 0, one), (1, COL_ONE, pi2 - one)]),
            )?,
            place(
                &ws,
                &selector(rows, 2, &[(4, 0, one), (5, 1, one)]),
                &selector(2, cols, &[(0, COL_W + 2, one), (1, COL_W + 3, one)]),
            )?,
            place(
                &wp,
                &selector(rows, 2, &[(6, 0, one), (7, 1, one)]),
                &selector(2, cols, &[(0, COL_W + 4, one), (1, COL_W + 5, one)]),
            )?,
        ];
        let mut model = LftModel::constant(constant);
        for t in &terms {
            model = model.add(t)?;
        }
        Ok(Self { model, bounds: *bounds, pi2 })
    }

    /// Normalized coordinates of `ρ`, clipped to `[−1, 1]` against rounding.
    pub fn delta(&self, rho: Rho<T>) -> DeltaAssignment<T> {
        let clip = |v: T| v.max(-T::one()).min(T::one());
        let ds = self.bounds.sigma_param().map(|u| clip(u.normalize(rho.sigma))).unwrap_or(T::zero());
        let dp = self.bounds.psi_param().map(|u| clip(u.normalize(rho.psi))).unwrap_or(T::zero());
        DeltaAssignment::from_pairs([(SIGMA, ds), (PSI, dp)]).expect("two distinct labels in range")
    }

    pub fn eval(&self, rho: Rho<T>) -> Result<PlantMatrices<T>, LftError> {
        Ok(PlantMatrices::from_stacked(&self.model.eval(&self.delta(rho))?))
    }

    pub fn eval_delta(&self, delta: &DeltaAssignment<T>) -> Result<PlantMatrices<T>, LftError> {
        Ok(PlantMatrices::from_stacked(&self.model.eval(delta)?))
    }

    /// Labels reached by each exogenous input through `M12`.
    pub fn exogenous_routing(&self) -> Vec<Vec<String>> {
        let m12 = self.model.m12();
        let labels = self.model.channel_labels();
        (0..NW)
            .map(|j| {
                let mut out: Vec<String> = Vec::new();
                for (k, l) in labels.iter().enumerate() {
                    if m12[(k, COL_W + j)] != T::zero() && !out.contains(l) {
                        out.push(l.clone());
                    }
                }
                out
            })
            .collect()
    }
}

/// A group of exogenous channels that share one D-scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ExoBlock {
    /// Δ label the channels are routed through, or `None` for the
    /// parameter-independent (performance) block.
    pub label: Option<String>,
    pub columns: Vec<usize>,
}

impl ExoBlock {
    pub fn name(&self) -> &str {
        self.label.as_deref().unwrap_or("process")
    }
}

/// Exogenous-input partition induced by the plant's Δ routing.
#[derive(Debug, Clone, PartialEq)]
pub struct ExogenousBlocks {
    pub blocks: Vec<ExoBlock>,
}

impl ExogenousBlocks {
    /// Groups the `w` columns by the set of labels each one reaches.
    pub fn from_plant<T: Real>(plant: &PlantLft<T>) -> Self {
        let routing = plant.exogenous_routing();
        let mut blocks: Vec<(Vec<String>, Vec<usize>)> = Vec::new();
        for (j, labels) in routing.into_iter().enumerate() {
            match blocks.iter_mut().find(|(l, _)| *l == labels) {
                Some((_, cols)) => cols.push(j),
                None => blocks.push((labels, vec![j])),
            }
        }
        Self {
            blocks: blocks
                .into_iter()
                .map(|(labels, columns)| ExoBlock {
                    label: if labels.is_empty() { None } else { Some(labels.join("+")) },
                    columns,
                })
                .collect(),
        }
    }

    /// Block index of each `w` column.
    pub fn column_block(&self) -> Vec<usize> {
        let mut out = vec![0; NW];
        for (b, blk) in self.blocks.iter().enumerate() {
            for &c in &blk.columns {
                out[c] = b;
            }
        }
        out
    }

    /// Index of the parameter-independent block, if any.
    pub fn fixed_block(&self) -> Option<usize> {
        self.blocks.iter().position(|b| b.label.is_none())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::NoiseSpec;

    const PI2: f64 = 0.012151355442736387;

    fn plant() -> (PlantLft<f64>, NoiseWeights<f64>) {
        let b = ParameterBox::scenario_box();
        let w = NoiseWeights::new(&b, &NoiseSpec::earth_moon()).unwrap();
        (PlantLft::new(&b, PI2, &w).unwrap(), w)
    }

    #[test]
    fn nominal_and_corner_match_direct() {
        let (p, w) = plant();
        let b = p.bounds;
        for rho in [b.center(), Rho::new(b.sigma_min, b.psi_max), Rho::new(b.sigma_max, b.psi_min)] {
            let lft = p.eval(rho).unwrap().stacked();
            let direct = PlantMatrices::direct(rho, PI2, &w).stacked();
            assert!((&lft - &direct).max_abs() <= 1e-12 * direct.max_abs(), "{rho:?}");
        }
    }

    #[test]
    fn repetition_counts() {
        let (p, _) = plant();
        let s = p.model.structure();
        assert_eq!(s.len(), 2);
        let total: usize = s.iter().map(|(_, n)| n).sum();
        assert_eq!(total, p.model.channels());
        // 1/σ³ twice (a on two rows, b3 once) + 1/σ on two rows + W_σ on two rows
        assert_eq!(p.model.repetitions(SIGMA), 6 + 3 + 2 + 2);
        assert_eq!(p.model.repetitions(PSI), 6 + 3 + 2 + 2);
    }

    #[test]
    fn exogenous_blocks_follow_routing() {
        let (p, _) = plant();
        let e = ExogenousBlocks::from_plant(&p);
        assert_eq!(e.blocks.len(), 3);
        assert_eq!(e.blocks[0], ExoBlock { label: None, columns: vec![0, 1] });
        assert_eq!(e.blocks[1], ExoBlock { label: Some(SIGMA.into()), columns: vec![2, 3] });
        assert_eq!(e.blocks[2], ExoBlock { label: Some(PSI.into()), columns: vec![4, 5] });
        assert_eq!(e.fixed_block(), Some(0));
        assert_eq!(e.column_block(), vec![0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn plant_is_well_posed() {
        let (p, _) = plant();
        let w = p.model.well_posed(11);
        assert!(w.well_posed);
        assert!(w.min_singular_value > 0.0);
    }
}
