use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, std_normal_vector};
use crate::series::TensorSeries;
use crate::tensor::{DenseTensor, Matrix};

use super::likelihood::whiten;
use super::residuals::{apply_coeff, spectral_radius};
use super::state::ModelState;

/// Lower Cholesky factors `L_k` with `Σ_k = L_k L_kᵀ`.
pub fn cov_roots(state: &ModelState) -> Result<[Matrix; 3]> {
    let l = |k: usize| -> Result<Matrix> {
        Ok(cholesky(&state.cov.sigma[k], &format!("Sigma{}", k + 1))?.l())
    };
    Ok([l(0)?, l(1)?, l(2)?])
}

/// One draw of `vec(E) ~ N(0, ω Σ3 ⊗ Σ2 ⊗ Σ1)` as `√ω · Z ×0 L1 ×1 L2 ×2 L3`.
pub fn draw_error<R: Rng + ?Sized>(roots: &[Matrix; 3], omega: f64, rng: &mut R) -> DenseTensor {
    let dims = [roots[0].nrows(), roots[1].nrows(), roots[2].nrows()];
    let z = DenseTensor::from_vector(&dims, &std_normal_vector(dims.iter().product(), rng))
        .expect("length matches dims");
    whiten(&z, roots).scaled(omega.sqrt())
}

/// Simulates `Y_1..Y_T` from `Y_0 = y0`, using `state.vol.omega` for the
/// per-period scales.
pub fn simulate<R: Rng + ?Sized>(
    state: &ModelState,
    t_len: usize,
    y0: &DenseTensor,
    rng: &mut R,
) -> Result<TensorSeries> {
    let dims = state.dims();
    if y0.shape() != dims {
        return Err(Error::ShapeMismatch(format!(
            "presample shape {:?} vs model dims {dims:?}",
            y0.shape()
        )));
    }
    if state.vol.omega.len() < t_len {
        return Err(Error::ShapeMismatch(format!(
            "omega has {} entries, need {t_len}",
            state.vol.omega.len()
        )));
    }
    let rho = spectral_radius(&state.factors);
    if rho >= 1.0 {
        log::warn!("coefficient spectral radius {rho:.4} ≥ 1, simulated series may explode");
    }
    let roots = cov_roots(state)?;
    let mut obs = Vec::with_capacity(t_len + 1);
    obs.push(y0.clone());
    for t in 1..=t_len {
        let fit = apply_coeff(&state.factors, &obs[t - 1]);
        let a = state.intercept.at(t);
        let e = draw_error(&roots, state.vol.omega[t - 1], rng);
        let mut y = fit;
        for ((y, a), e) in y.data_mut().iter_mut().zip(a.data()).zip(e.data()) {
            *y += a + e;
        }
        obs.push(y);
    }
    TensorSeries::new(dims, obs)
}
