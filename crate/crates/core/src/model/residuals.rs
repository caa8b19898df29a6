//! Residuals of the order-one tensor autoregression and the equivalent
//! matrix and vector forms of the coefficient map.

use crate::decomp::{coeff_unfold, tucker_reconstruct, TuckerFactors};
use crate::error::{Error, Result};
use crate::series::TensorSeries;
use crate::tensor::{gen_inner, mode_multiply, unfold, DenseTensor, Matrix, Vector};

use super::stacked;
use super::state::{InterceptTrend, ModelState};

/// `Y ×0 B4ᵀ ×1 B5ᵀ ×2 B6ᵀ`, the predictor factors of one observation.
pub fn predictor_factor(f: &TuckerFactors, y: &DenseTensor) -> DenseTensor {
    let mut out = y.clone();
    for k in 0..3 {
        out = mode_multiply(&out, &f.factors[3 + k].transpose(), k).expect("dims checked");
    }
    out
}

/// `⟨B, Y⟩` without materializing the order-six coefficient tensor.
pub fn apply_coeff(f: &TuckerFactors, y: &DenseTensor) -> DenseTensor {
    let z = gen_inner(&f.core, &predictor_factor(f, y)).expect("core matches predictor ranks");
    let mut out = z;
    for k in 0..3 {
        out = mode_multiply(&out, &f.factors[k], k).expect("dims checked");
    }
    out
}

fn check_data(data: &TensorSeries, state: &ModelState) -> Result<()> {
    if data.dims() != state.dims() {
        return Err(Error::ShapeMismatch(format!(
            "data dims {:?} vs model dims {:?}",
            data.dims(),
            state.dims()
        )));
    }
    if data.t_len() == 0 {
        return Err(Error::TooShort("residuals need a presample and one period".into()));
    }
    Ok(())
}

/// `Y_t − A_t` for `t = 1..T`.
pub fn demeaned(data: &TensorSeries, intercept: &InterceptTrend) -> Vec<DenseTensor> {
    (1..=data.t_len())
        .map(|t| {
            let a = intercept.at(t);
            data.y(t).zip_with(&a, |y, a| y - a).expect("dims checked")
        })
        .collect()
}

/// `E_t = Y_t − A_t − ⟨B, Y_{t−1}⟩`, `t = 1..T` (index 0 holds `E_1`).
pub fn residuals(data: &TensorSeries, state: &ModelState) -> Result<Vec<DenseTensor>> {
    check_data(data, state)?;
    Ok(residuals_with(data, &state.factors, &state.intercept))
}

pub fn residuals_with(
    data: &TensorSeries,
    f: &TuckerFactors,
    intercept: &InterceptTrend,
) -> Vec<DenseTensor> {
    stacked::unstack(&stacked::residuals(data, f, intercept))
}

/// Same residuals through the full coefficient tensor and the generalized
/// inner product.
pub fn residuals_gen_inner(data: &TensorSeries, state: &ModelState) -> Result<Vec<DenseTensor>> {
    check_data(data, state)?;
    let b = tucker_reconstruct(&state.factors);
    (1..=data.t_len())
        .map(|t| {
            let fit = gen_inner(&b, data.y(t - 1))?;
            let a = state.intercept.at(t);
            let mut e = data.y(t).clone();
            for ((e, f), a) in e.data_mut().iter_mut().zip(fit.data()).zip(a.data()) {
                *e -= f + a;
            }
            Ok(e)
        })
        .collect()
}

/// Mode-`i` unfolded residuals `Y_(i) − A_(i) − B_i G_(i) B_{−i}ᵀ (y_{t−1} ⊗ I)`.
pub fn residuals_unfolded(
    data: &TensorSeries,
    state: &ModelState,
    mode: usize,
) -> Result<Vec<Matrix>> {
    check_data(data, state)?;
    if mode >= 3 {
        return Err(Error::ModeOutOfRange { mode, order: 3 });
    }
    let b_i = coeff_unfold(&state.factors, mode)?;
    let dims = data.dims();
    let rest: usize = dims.iter().product::<usize>() / dims[mode];
    let eye = Matrix::identity(rest, rest);
    (1..=data.t_len())
        .map(|t| {
            let y_prev = data.y(t - 1).to_vector();
            let x = Matrix::from_column_slice(y_prev.len(), 1, y_prev.as_slice()).kronecker(&eye);
            let y = unfold(data.y(t), mode)?;
            let a = unfold(&state.intercept.at(t), mode)?;
            Ok(y - a - &b_i * x)
        })
        .collect()
}

/// `B̃m = B3 ⊗ B2 ⊗ B1`.
pub fn response_kron(f: &TuckerFactors) -> Matrix {
    f.factors[2].kronecker(&f.factors[1]).kronecker(&f.factors[0])
}

/// `B̃ = B6 ⊗ B5 ⊗ B4`.
pub fn predictor_kron(f: &TuckerFactors) -> Matrix {
    f.factors[5].kronecker(&f.factors[4]).kronecker(&f.factors[3])
}

/// Core reshaped to `(R1 R2 R3) × (R4 R5 R6)`.
pub fn core_matrix(f: &TuckerFactors) -> Matrix {
    let r = f.ranks();
    let rows = r[0] * r[1] * r[2];
    let cols = r[3] * r[4] * r[5];
    Matrix::from_column_slice(rows, cols, f.core.data())
}

/// Vectorized residuals `y_t − a_t − B̃m G̃ B̃ᵀ y_{t−1}`.
pub fn residuals_vectorized(data: &TensorSeries, state: &ModelState) -> Result<Vec<Vector>> {
    check_data(data, state)?;
    let f = &state.factors;
    let m = response_kron(f) * core_matrix(f) * predictor_kron(f).transpose();
    Ok((1..=data.t_len())
        .map(|t| {
            data.y(t).to_vector() - state.intercept.at(t).to_vector() - &m * data.y(t - 1).to_vector()
        })
        .collect())
}

/// `I × I` matrix `B̂` with `vec(B̂) = vec(B)`, so `B̂ vec(Y) = vec(⟨B, Y⟩)`.
pub fn var_form(f: &TuckerFactors) -> Matrix {
    let b = tucker_reconstruct(f);
    let d = f.dims();
    let i: usize = d[..d.len() / 2].iter().product();
    let j: usize = d[d.len() / 2..].iter().product();
    Matrix::from_column_slice(i, j, b.data())
}

/// Spectral radius of `B̂`, computed on the `R̃ × R̃` matrix `B̃ᵀ B̃m G̃`,
/// which shares the nonzero eigenvalues of `B̂ = (B̃m G̃) B̃ᵀ`.
pub fn spectral_radius(f: &TuckerFactors) -> f64 {
    let small = predictor_kron(f).transpose() * response_kron(f) * core_matrix(f);
    matrix_spectral_radius(&small)
}

pub fn matrix_spectral_radius(m: &Matrix) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}
