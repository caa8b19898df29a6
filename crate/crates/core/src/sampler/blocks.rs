//! Full conditionals of the Gaussian blocks (factor matrices, core,
//! intercept) and the inverse-Wishart covariance blocks.
//!
//! Each conditional is exposed separately from its draw so it can be checked
//! against brute-force regressions. Prior precisions are inputs; the `sample_*`
//! wrappers build them from the state.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::decomp::TuckerFactors;
use crate::error::{Error, Result};
use crate::linalg::{inverse_wishart, symmetrize, GaussianConditional};
use crate::model::likelihood::whiten;
use crate::model::prior::{factor_prior_var, Priors};
use crate::model::residuals::core_matrix;
use crate::model::stacked::{self, apply_core, multiply_modes, predictor_factors, scale_slabs};
use crate::model::state::{InterceptTrend, ModelState};
use crate::series::TensorSeries;
use crate::tensor::{mode_gram, unfold, DenseTensor, Matrix, Vector};

use super::design::{factor_from_param, param_index};

/// Per-sweep quantities shared by the Gaussian blocks, periods stacked
/// along a fourth mode.
pub struct BlockData<'a> {
    pub data: &'a TensorSeries,
    /// `Y_0..Y_{T−1}` as `[I1, I2, I3, T]`.
    pub lagged: DenseTensor,
    /// `Y_t − A_t`, `t = 1..T`, as `[I1, I2, I3, T]`.
    pub targets: DenseTensor,
    pub omega: Vec<f64>,
    pub inv: [Matrix; 3],
}

impl<'a> BlockData<'a> {
    pub fn new(data: &'a TensorSeries, state: &ModelState) -> Result<Self> {
        Ok(Self {
            data,
            lagged: stacked::lagged(data),
            targets: stacked::demeaned(data, &state.intercept),
            omega: state.vol.omega.clone(),
            inv: state.cov.inverses()?,
        })
    }

    fn weights(&self) -> Vec<f64> {
        self.omega.iter().map(|w| 1.0 / w).collect()
    }
}

fn others(k: usize) -> impl Iterator<Item = usize> {
    (0..3).filter(move |&j| j != k)
}

/// Conditional of `vec(B_k)`, `k ∈ {0, 1, 2}`, given everything else.
pub fn response_factor_conditional(
    k: usize,
    f: &TuckerFactors,
    bd: &BlockData,
    prior_prec: &Vector,
) -> GaussianConditional {
    let b = [&f.factors[0], &f.factors[1], &f.factors[2]];
    let sb: Vec<Matrix> = (0..3).map(|j| &bd.inv[j] * &f.factors[j]).collect();
    let z = apply_core(f, &predictor_factors(f, &bd.lagged));
    let w = multiply_modes(&z, &b, others(k));
    let w_hat = scale_slabs(&multiply_modes(&z, &[&sb[0], &sb[1], &sb[2]], others(k)), &bd.weights());
    let c = mode_gram(&w, &w_hat, k).expect("order four");
    let dm = mode_gram(&bd.targets, &w_hat, k).expect("order four");
    let mut precision = symmetrize(&c).kronecker(&bd.inv[k]);
    for (i, p) in prior_prec.iter().enumerate() {
        precision[(i, i)] += p;
    }
    let rhs = crate::tensor::vec_of(&(&bd.inv[k] * dm));
    GaussianConditional { precision, rhs }
}

/// `B̃mᵀ Σ⁻¹ B̃m = (B3ᵀΣ3⁻¹B3) ⊗ (B2ᵀΣ2⁻¹B2) ⊗ (B1ᵀΣ1⁻¹B1)`.
fn response_gram(f: &TuckerFactors, inv: &[Matrix; 3]) -> Matrix {
    let g = |k: usize| f.factors[k].transpose() * &inv[k] * &f.factors[k];
    g(2).kronecker(&g(1)).kronecker(&g(0))
}

/// `D_t ×_k (Σ_k⁻¹ B_k)ᵀ` for every slab, i.e. `B̃mᵀ Σ⁻¹ vec(D_t)`.
fn projected_targets(f: &TuckerFactors, bd: &BlockData) -> DenseTensor {
    let m: Vec<Matrix> = (0..3).map(|k| f.factors[k].transpose() * &bd.inv[k]).collect();
    multiply_modes(&bd.targets, &[&m[0], &m[1], &m[2]], 0..3)
}

/// Conditional of the predictor factor `k ∈ {3, 4, 5}` in its design layout.
///
/// With `Q_t = Y_{t−1}` multiplied by `B_jᵀ` along the other two predictor
/// modes, `vec(F_t)` is linear in `B_k` and the Gram terms contract
/// `Σ_t ω_t⁻¹ vec(Q_t) vec(Q_t)ᵀ` against `H = G̃ᵀ B̃mᵀΣ⁻¹B̃m G̃`.
pub fn predictor_factor_conditional(
    k: usize,
    f: &TuckerFactors,
    bd: &BlockData,
    prior_prec: &Vector,
) -> GaussianConditional {
    let m = k - 3;
    let g = core_matrix(f);
    let h = symmetrize(&(g.transpose() * response_gram(f, &bd.inv) * &g));
    let bt: Vec<Matrix> = (3..6).map(|j| f.factors[j].transpose()).collect();
    let q = multiply_modes(&bd.lagged, &[&bt[0], &bt[1], &bt[2]], others(m));
    let rows = f.factors[k].nrows();
    let rank = f.factors[k].ncols();
    let pr = f.ranks();
    let pdims = [pr[3], pr[4], pr[5]];
    let left: usize = pdims[..m].iter().product();
    let rest = pdims.iter().product::<usize>() / rank;
    let t_len = bd.data.t_len();
    // Linear index in vec(F) of mode-m index r and unfolded column a.
    let lin = |r: usize, a: usize| a % left + left * (r + rank * (a / left));

    let weights = bd.weights();
    let qk = unfold(&q, m).expect("order four");
    let mut v = Matrix::zeros(rows * rest, t_len);
    for t in 0..t_len {
        let sw = weights[t].sqrt();
        for a in 0..rest {
            for i in 0..rows {
                v[(i + rows * a, t)] = qk[(i, a + rest * t)] * sw;
            }
        }
    }
    let s = &v * v.transpose();
    let n = rows * rank;
    let mut precision = Matrix::from_diagonal(prior_prec);
    let mut h_blk = Matrix::zeros(rest, rest);
    for r in 0..rank {
        for r2 in 0..rank {
            for a in 0..rest {
                for b in 0..rest {
                    h_blk[(a, b)] = h[(lin(r, a), lin(r2, b))];
                }
            }
            for i in 0..rows {
                let p = param_index(k, i, r, rows, rank);
                for i2 in 0..rows {
                    let p2 = param_index(k, i2, r2, rows, rank);
                    let mut acc = 0.0;
                    for a in 0..rest {
                        for b in 0..rest {
                            acc += s[(i + rows * a, i2 + rows * b)] * h_blk[(a, b)];
                        }
                    }
                    precision[(p, p2)] += acc;
                }
            }
        }
    }

    let mt = projected_targets(f, bd);
    let rm = pr[0] * pr[1] * pr[2];
    let u = g.transpose() * nalgebra::DMatrixView::from_slice(mt.data(), rm, t_len);
    let u = DenseTensor::new(vec![pdims[0], pdims[1], pdims[2], t_len], u.as_slice().to_vec()).expect("shape");
    let uk = unfold(&scale_slabs(&u, &weights), m).expect("order four");
    let cross = &qk * uk.transpose();
    let mut rhs = Vector::zeros(n);
    for i in 0..rows {
        for r in 0..rank {
            rhs[param_index(k, i, r, rows, rank)] = cross[(i, r)];
        }
    }
    GaussianConditional {
        precision: symmetrize(&precision),
        rhs,
    }
}

pub fn factor_conditional(
    k: usize,
    f: &TuckerFactors,
    bd: &BlockData,
    prior_prec: &Vector,
) -> GaussianConditional {
    if k < 3 {
        response_factor_conditional(k, f, bd, prior_prec)
    } else {
        predictor_factor_conditional(k, f, bd, prior_prec)
    }
}

/// Prior precision of factor `k` in its parameter layout.
pub fn factor_prior_precision(state: &ModelState, priors: &Priors, k: usize) -> Vector {
    let b = &state.factors.factors[k];
    let (rows, rank) = (b.nrows(), b.ncols());
    let mut p = Vector::zeros(rows * rank);
    for r in 0..rank {
        let v = factor_prior_var(state.shrink.as_ref(), priors, k, r);
        for i in 0..rows {
            p[param_index(k, i, r, rows, rank)] = 1.0 / v;
        }
    }
    p
}

pub fn sample_factor<R: Rng + ?Sized>(
    k: usize,
    state: &mut ModelState,
    data: &TensorSeries,
    priors: &Priors,
    rng: &mut R,
) -> Result<()> {
    let bd = BlockData::new(data, state)?;
    sample_factor_with(k, state, &bd, priors, rng)
}

/// As [`sample_factor`], reusing block data built for the current intercept,
/// covariance and volatility.
pub fn sample_factor_with<R: Rng + ?Sized>(
    k: usize,
    state: &mut ModelState,
    bd: &BlockData,
    priors: &Priors,
    rng: &mut R,
) -> Result<()> {
    let prior = factor_prior_precision(state, priors, k);
    let cond = factor_conditional(k, &state.factors, bd, &prior);
    let theta = cond.draw(&format!("B{}", k + 1), rng)?;
    let b = &state.factors.factors[k];
    let (rows, rank) = (b.nrows(), b.ncols());
    state.factors.factors[k] = factor_from_param(k, &theta, rows, rank);
    Ok(())
}

/// Conditional of `vec(G)` under the prior `N(0, core_var · I)`.
pub fn core_conditional(f: &TuckerFactors, bd: &BlockData, core_prec: f64) -> GaussianConditional {
    let cm = symmetrize(&response_gram(f, &bd.inv));
    let r = f.ranks();
    let rm = r[0] * r[1] * r[2];
    let rp = r[3] * r[4] * r[5];
    let t_len = bd.data.t_len();
    let fs = predictor_factors(f, &bd.lagged);
    let fw = scale_slabs(&fs, &bd.weights());
    let fm = nalgebra::DMatrixView::from_slice(fs.data(), rp, t_len);
    let fwm = nalgebra::DMatrixView::from_slice(fw.data(), rp, t_len);
    let mt = projected_targets(f, bd);
    let mm = nalgebra::DMatrixView::from_slice(mt.data(), rm, t_len);
    let a = fwm * fm.transpose();
    let rhs_m = mm * fwm.transpose();
    let mut precision = symmetrize(&a).kronecker(&cm);
    for i in 0..precision.nrows() {
        precision[(i, i)] += core_prec;
    }
    GaussianConditional {
        precision,
        rhs: crate::tensor::vec_of(&rhs_m),
    }
}

pub fn sample_core<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &TensorSeries,
    priors: &Priors,
    rng: &mut R,
) -> Result<()> {
    let bd = BlockData::new(data, state)?;
    sample_core_with(state, &bd, priors, rng)
}

pub fn sample_core_with<R: Rng + ?Sized>(
    state: &mut ModelState,
    bd: &BlockData,
    priors: &Priors,
    rng: &mut R,
) -> Result<()> {
    let cond = core_conditional(&state.factors, bd, 1.0 / priors.core_var);
    let g = cond.draw("G", rng)?;
    let shape = state.factors.core.shape().to_vec();
    state.factors.core = DenseTensor::from_vector(&shape, &g)?;
    Ok(())
}

/// Degrees of freedom and scale of the inverse-Wishart conditional of `Σ_k`,
/// residuals stacked as `[I1, I2, I3, T]`.
pub fn sigma_posterior(
    k: usize,
    resid: &DenseTensor,
    omega: &[f64],
    inv: &[Matrix; 3],
    priors: &Priors,
) -> (f64, Matrix) {
    let dims = resid.shape();
    let dk = dims[k];
    let cells: usize = dims[..3].iter().product();
    let w: Vec<f64> = omega.iter().map(|w| 1.0 / w).collect();
    let eh = scale_slabs(&multiply_modes(resid, &[&inv[0], &inv[1], &inv[2]], others(k)), &w);
    let scale = priors.iw_scale_matrix(dk) + mode_gram(resid, &eh, k).expect("order four");
    let df = priors.iw_df(dk) + (dims[3] * cells / dk) as f64;
    (df, symmetrize(&scale))
}

/// Draws `Σ_k` given stacked residuals at the current coefficients.
pub fn sample_sigma<R: Rng + ?Sized>(
    k: usize,
    state: &mut ModelState,
    resid: &DenseTensor,
    priors: &Priors,
    rng: &mut R,
) -> Result<()> {
    let inv = state.cov.inverses()?;
    let (df, scale) = sigma_posterior(k, resid, &state.vol.omega, &inv, priors);
    state.cov.sigma[k] = symmetrize(&inverse_wishart(df, &scale, rng)?);
    Ok(())
}

/// Conditional of the intercept (and trend) in the eigenbasis of `Σ` and of
/// the regressor Gram matrix, where its precision is diagonal.
pub struct InterceptConditional {
    q: [Matrix; 3],
    w: Matrix,
    /// Rotated precision-weighted mean, one column per regressor.
    rhs: Vec<DenseTensor>,
    prec: Vec<DenseTensor>,
}

impl InterceptConditional {
    pub fn new(
        data: &TensorSeries,
        f: &TuckerFactors,
        omega: &[f64],
        sigma: &[Matrix; 3],
        trend: bool,
        prior_var: f64,
    ) -> Result<Self> {
        let n_reg = if trend { 2 } else { 1 };
        let zero = InterceptTrend::constant(DenseTensor::zeros(&data.dims()));
        let fitted = stacked::unstack(&stacked::residuals(data, f, &zero));
        let eig: Vec<_> = sigma.iter().map(|s| nalgebra::SymmetricEigen::new(symmetrize(s))).collect();
        for (k, e) in eig.iter().enumerate() {
            if e.eigenvalues.iter().any(|&l| l <= 0.0) {
                return Err(Error::NotPositiveDefinite(format!("Sigma{}", k + 1)));
            }
        }
        let q = [eig[0].eigenvectors.clone(), eig[1].eigenvectors.clone(), eig[2].eigenvectors.clone()];
        let inv: [Matrix; 3] = std::array::from_fn(|k| {
            let e = &eig[k];
            &e.eigenvectors * Matrix::from_diagonal(&e.eigenvalues.map(|l| 1.0 / l)) * e.eigenvectors.transpose()
        });

        let mut gram = Matrix::zeros(n_reg, n_reg);
        let shape = data.dims();
        let mut cols = vec![DenseTensor::zeros(&shape); n_reg];
        for (t, (y, &w)) in fitted.iter().zip(omega).enumerate() {
            let x = [1.0, (t + 1) as f64];
            for a in 0..n_reg {
                for b in 0..n_reg {
                    gram[(a, b)] += x[a] * x[b] / w;
                }
                for (c, v) in cols[a].data_mut().iter_mut().zip(y.data()) {
                    *c += x[a] * v / w;
                }
            }
        }
        let cols: Vec<DenseTensor> = cols.iter().map(|c| whiten(c, &inv)).collect();
        let ge = nalgebra::SymmetricEigen::new(gram);
        let w = ge.eigenvectors.clone();
        let qt = [q[0].transpose(), q[1].transpose(), q[2].transpose()];
        let rotated: Vec<DenseTensor> = cols.iter().map(|c| whiten(c, &qt)).collect();
        let lam = DenseTensor::from_fn(&shape, |i| {
            eig[0].eigenvalues[i[0]] * eig[1].eigenvalues[i[1]] * eig[2].eigenvalues[i[2]]
        });
        let mut rhs = Vec::with_capacity(n_reg);
        let mut prec = Vec::with_capacity(n_reg);
        for b in 0..n_reg {
            let mut acc = DenseTensor::zeros(&shape);
            for a in 0..n_reg {
                for (o, v) in acc.data_mut().iter_mut().zip(rotated[a].data()) {
                    *o += v * w[(a, b)];
                }
            }
            rhs.push(acc);
            let d = ge.eigenvalues[b].max(0.0);
            prec.push(DenseTensor::from_fn(&shape, |i| d / lam.get(i) + 1.0 / prior_var));
        }
        Ok(Self { q, w, rhs, prec })
    }

    fn back_rotate(&self, rot: &[DenseTensor]) -> InterceptTrend {
        let n_reg = rot.len();
        let shape = rot[0].shape().to_vec();
        let mut out = Vec::with_capacity(n_reg);
        for a in 0..n_reg {
            let mut acc = DenseTensor::zeros(&shape);
            for b in 0..n_reg {
                for (o, v) in acc.data_mut().iter_mut().zip(rot[b].data()) {
                    *o += v * self.w[(a, b)];
                }
            }
            out.push(whiten(&acc, &self.q));
        }
        let a1 = if n_reg == 2 { Some(out.pop().expect("two regressors")) } else { None };
        InterceptTrend {
            a0: out.pop().expect("at least one regressor"),
            a1,
        }
    }

    pub fn mean(&self) -> InterceptTrend {
        let rot: Vec<DenseTensor> = self
            .rhs
            .iter()
            .zip(&self.prec)
            .map(|(r, p)| r.zip_with(p, |a, b| a / b).expect("same shape"))
            .collect();
        self.back_rotate(&rot)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> InterceptTrend {
        let rot: Vec<DenseTensor> = self
            .rhs
            .iter()
            .zip(&self.prec)
            .map(|(r, p)| {
                let data = r
                    .data()
                    .iter()
                    .zip(p.data())
                    .map(|(a, b)| a / b + rng.sample::<f64, _>(StandardNormal) / b.sqrt())
                    .collect();
                DenseTensor::new(r.shape().to_vec(), data).expect("same shape")
            })
            .collect();
        self.back_rotate(&rot)
    }
}

pub fn sample_intercept<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &TensorSeries,
    trend: bool,
    priors: &Priors,
    rng: &mut R,
) -> Result<()> {
    let cond = InterceptConditional::new(
        data,
        &state.factors,
        &state.vol.omega,
        &state.cov.sigma,
        trend,
        priors.intercept_var,
    )?;
    state.intercept = cond.draw(rng);
    Ok(())
}
