use log::debug;

use super::hinf::synthesize_scaled;
use super::{identity_scale, ErrorSystem, Method, ObserverGain, SynthesisError, SynthesisOptions, SynthesisProblem};
use crate::lmi::{Lmi, LmiSystem};
use crate::numkernel::{frequency_response, Matrix};
use crate::plant::{ExogenousBlocks, PlantMatrices, NW};
use crate::scalar::Real;

/// Outcome of [`dk_iterate`].
#[derive(Debug, Clone)]
pub struct DkResult<T> {
    /// Final gain; `gamma` is the scaled certificate level.
    pub gain: ObserverGain<T>,
    /// Accepted scaled levels, starting with the plain H∞ `γ`.
    pub history: Vec<T>,
    /// Constant scale `d_g` per exogenous block, `1` on the process block.
    pub scales: Vec<T>,
    pub blocks: ExogenousBlocks,
    /// `γ` of the unscaled first iterate.
    pub unscaled_gamma: T,
}

struct Structure {
    col_block: Vec<usize>,
    counts: Vec<usize>,
    fixed: usize,
}

impl Structure {
    fn new(blocks: &ExogenousBlocks) -> Self {
        let col_block = blocks.column_block();
        let counts = blocks.blocks.iter().map(|b| b.columns.len()).collect();
        Self { col_block, counts, fixed: blocks.fixed_block().unwrap_or(0) }
    }

    fn per_block<T: Real>(&self, lambda: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.counts.len()];
        for (j, &g) in self.col_block.iter().enumerate() {
            out[g] = out[g].max(lambda[j]);
        }
        out
    }

    fn per_column<T: Real>(&self, lambda_b: &[T]) -> Vec<T> {
        self.col_block.iter().map(|&g| lambda_b[g]).collect()
    }

    fn scales<T: Real>(&self, lambda: &[T]) -> Vec<T> {
        let lb = self.per_block(lambda);
        lb.iter().map(|&l| (l / lb[self.fixed]).sqrt()).collect()
    }
}

fn level<T: Real>(lambda: &[T]) -> T {
    (lambda.iter().copied().sum::<T>() / T::from_usize_lossy(lambda.len())).sqrt()
}

/// `P` and per-column `λ` of a tightened certificate.
type Rescaled<T> = (Matrix<T>, Vec<T>);

/// D-step: for fixed `L`, minimizes `Σ λ_i` over `(P, λ per block)`, starting
/// from the gain's own certificate. `None` if the start is not strictly feasible.
fn d_step<T: Real>(
    plants: &[PlantMatrices<T>],
    gain: &ObserverGain<T>,
    st: &Structure,
    opts: &SynthesisOptions<T>,
) -> Result<Option<Rescaled<T>>, SynthesisError> {
    let n = gain.l.nrows();
    let np = n * (n + 1) / 2;
    let nb = st.counts.len();
    let bar = st.per_block(&gain.lambda);
    let inv_sqrt: Vec<T> = st.col_block.iter().map(|&g| T::one() / bar[g].sqrt()).collect();
    let basis: Vec<Matrix<T>> = (0..np).map(|k| Matrix::sym_basis(n, k)).collect();
    let mut lmis = LmiSystem::new(np + nb);
    for pl in plants {
        let sys = ErrorSystem::new(pl, &gain.l).scale_inputs(&inv_sqrt);
        let ctc = sys.cz.transpose().matmul(&sys.cz);
        let f0 = Matrix::block_diag(&[&ctc, &Matrix::zeros(NW, NW)]);
        let mut fk: Vec<Matrix<T>> = basis
            .iter()
            .map(|e| {
                let ae = sys.acl.transpose().matmul(e);
                let eb = e.matmul(&sys.bcl);
                Matrix::block2(&(&ae + &ae.transpose()), &eb, &eb.transpose(), &Matrix::zeros(NW, NW))
            })
            .collect();
        for g in 0..nb {
            let d: Vec<T> = st.col_block.iter().map(|&c| if c == g { -T::one() } else { T::zero() }).collect();
            fk.push(Matrix::block_diag(&[&Matrix::zeros(n, n), &Matrix::from_diag(&d)]));
        }
        lmis.push(Lmi { f0, fk });
    }
    let mut fk: Vec<Matrix<T>> = basis.iter().map(|e| e.scale(-T::one())).collect();
    fk.extend(std::iter::repeat_n(Matrix::zeros(n, n), nb));
    lmis.push(Lmi { f0: Matrix::zeros(n, n), fk });

    let mut x0 = gain.p.to_packed_sym();
    x0.extend(std::iter::repeat_n(T::one() + T::lit(1e-3), nb));
    if !lmis.certify(&x0, T::zero()) {
        return Ok(None);
    }
    let total: T = st.counts.iter().zip(&bar).map(|(&c, &b)| T::from_usize_lossy(c) * b).sum();
    let mut c = vec![T::zero(); np + nb];
    for g in 0..nb {
        c[np + g] = T::from_usize_lossy(st.counts[g]) * bar[g] / total;
    }
    let m = lmis.minimize(&c, &x0, &opts.lmi)?;
    if !lmis.certify(&m.x, T::zero()) {
        return Ok(None);
    }
    let p = Matrix::sym_from_packed(n, &m.x[..np]);
    let lambda_b: Vec<T> = (0..nb).map(|g| bar[g] * m.x[np + g]).collect();
    Ok(Some((p, st.per_column(&lambda_b))))
}

fn tighten<T: Real>(
    plants: &[PlantMatrices<T>],
    gain: &ObserverGain<T>,
    st: &Structure,
    opts: &SynthesisOptions<T>,
) -> Result<ObserverGain<T>, SynthesisError> {
    let mut out = gain.clone();
    out.method = Method::DkScaled;
    if let Some((p, lambda)) = d_step(plants, gain, st, opts)? {
        if level(&lambda) < level(&gain.lambda) {
            out.p = p;
            out.lambda = lambda;
        }
    }
    out.gamma = level(&out.lambda);
    Ok(out)
}

/// Constant-D-scale iteration on the exogenous blocks of the plant LFT.
///
/// Iterate 0 is [`synthesize_hinf`](super::synthesize_hinf). Each round
/// synthesizes a gain for the input-scaled interconnection and then
/// re-optimizes the scales for that gain. A round that does not lower the
/// scaled level ends the iteration and the previous gain is kept.
pub fn dk_iterate<T: Real>(problem: &SynthesisProblem<T>, opts: &SynthesisOptions<T>) -> Result<DkResult<T>, SynthesisError> {
    opts.validate()?;
    let points = problem.grid(opts.grid);
    let plants = problem.plants(&points)?;
    let blocks = problem.exogenous_blocks();
    let st = Structure::new(&blocks);

    let g0 = synthesize_scaled(problem, &points, &identity_scale(), opts)?;
    let unscaled_gamma = g0.gamma;
    let mut history = vec![unscaled_gamma];
    let mut current = tighten(&plants, &g0, &st, opts)?;
    if current.gamma < unscaled_gamma {
        history.push(current.gamma);
    } else {
        current = ObserverGain { method: Method::DkScaled, ..g0 };
    }
    debug!("dk round 0: {:e} -> {:e}", unscaled_gamma.to_f64_lossy(), current.gamma.to_f64_lossy());

    for round in 1..opts.max_dk_rounds {
        let s: Vec<T> = {
            let d = st.scales(&current.lambda);
            st.col_block.iter().map(|&g| T::one() / d[g]).collect()
        };
        let cand = match synthesize_scaled(problem, &points, &s, opts) {
            Ok(g) => g,
            Err(e) => {
                debug!("dk round {round}: K-step failed ({e}), stopping");
                break;
            }
        };
        let cand = tighten(&plants, &cand, &st, opts)?;
        debug!("dk round {round}: {:e}", cand.gamma.to_f64_lossy());
        if !(cand.gamma < current.gamma) {
            break;
        }
        let rel = (current.gamma - cand.gamma) / current.gamma;
        history.push(cand.gamma);
        current = cand;
        if rel < T::lit(1e-3) {
            break;
        }
    }
    let scales = st.scales(&current.lambda);
    Ok(DkResult { gain: current, history, scales, blocks, unscaled_gamma })
}

fn cmul<T: Real>(g: &(Matrix<T>, Matrix<T>), w: &(Vec<T>, Vec<T>)) -> (Vec<T>, Vec<T>) {
    let (gr, gi) = g;
    let (wr, wi) = w;
    let a = gr.mul_vec(wr);
    let b = gi.mul_vec(wi);
    let c = gr.mul_vec(wi);
    let d = gi.mul_vec(wr);
    (a.iter().zip(&b).map(|(x, y)| *x - *y).collect(), c.iter().zip(&d).map(|(x, y)| *x + *y).collect())
}

fn norm2<T: Real>(v: &(Vec<T>, Vec<T>)) -> T {
    v.0.iter().chain(&v.1).map(|x| *x * *x).sum::<T>()
}

fn project<T: Real>(w: &mut (Vec<T>, Vec<T>), col_block: &[usize], counts: &[usize]) {
    let total = T::from_usize_lossy(col_block.len());
    for (g, &n) in counts.iter().enumerate() {
        let cols: Vec<usize> = (0..col_block.len()).filter(|&j| col_block[j] == g).collect();
        let e: T = cols.iter().map(|&j| w.0[j] * w.0[j] + w.1[j] * w.1[j]).sum::<T>().sqrt();
        let target = (T::from_usize_lossy(n) / total).sqrt();
        for &j in &cols {
            if e > T::zero() {
                w.0[j] = w.0[j] * target / e;
                w.1[j] = w.1[j] * target / e;
            } else {
                w.0[j] = target / T::from_usize_lossy(n).sqrt();
                w.1[j] = T::zero();
            }
        }
    }
}

/// Lower bound on the worst gain over inputs with block energies `n_g / N`,
/// by projected power iteration at `ω = 0` and `points` log-spaced
/// frequencies in `[1e-3, 1e3]`.
pub fn structured_gain_lower_bound<T: Real>(
    sys: &ErrorSystem<T>,
    blocks: &ExogenousBlocks,
    points: usize,
) -> Result<T, SynthesisError> {
    let col_block = blocks.column_block();
    let counts: Vec<usize> = blocks.blocks.iter().map(|b| b.columns.len()).collect();
    let m = sys.bcl.ncols();
    let n = points.max(2);
    let mut omegas = vec![T::zero()];
    omegas.extend((0..n).map(|i| T::lit(10.0).powf(T::lit(-3.0) + T::lit(6.0) * T::from_usize_lossy(i) / T::from_usize_lossy(n - 1))));
    let mut best = T::zero();
    for w in omegas {
        let g = frequency_response(&sys.acl, &sys.bcl, &sys.cz, w)?;
        let g = (g.re, g.im);
        let gh = (g.0.transpose(), g.1.transpose().scale(-T::one()));
        let mut starts: Vec<(Vec<T>, Vec<T>)> = vec![(vec![T::one(); m], vec![T::zero(); m])];
        for k in 0..g.0.nrows() {
            starts.push((g.0.row_slice(k).to_vec(), g.1.row_slice(k).iter().map(|&v| -v).collect()));
        }
        for mut v in starts {
            project(&mut v, &col_block, &counts);
            for _ in 0..50 {
                let z = cmul(&g, &v);
                let mut next = cmul(&gh, &z);
                if norm2(&next) == T::zero() {
                    break;
                }
                project(&mut next, &col_block, &counts);
                v = next;
            }
            best = best.max(norm2(&cmul(&g, &v)).sqrt());
        }
    }
    Ok(best)
}
