use crate::error::Result;
use crate::linalg::log_det_spd;
use crate::series::TensorSeries;
use crate::tensor::{mode_multiply, DenseTensor, Matrix};

use super::residuals::residuals;
use super::stacked::{quad_forms, stack};
use super::state::{ErrorCov, ModelState};

/// `E ×0 M0 ×1 M1 ×2 M2`.
pub fn whiten(e: &DenseTensor, m: &[Matrix; 3]) -> DenseTensor {
    let mut out = mode_multiply(e, &m[0], 0).expect("dims checked");
    out = mode_multiply(&out, &m[1], 1).expect("dims checked");
    mode_multiply(&out, &m[2], 2).expect("dims checked")
}

/// `vec(E)ᵀ (Σ3 ⊗ Σ2 ⊗ Σ1)⁻¹ vec(E)` given the three inverse factors.
pub fn quad_form(e: &DenseTensor, inv: &[Matrix; 3]) -> f64 {
    let w = whiten(e, inv);
    e.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

/// `ln |Σ3 ⊗ Σ2 ⊗ Σ1|`.
pub fn log_det_kron(cov: &ErrorCov) -> Result<f64> {
    let d: Vec<usize> = cov.sigma.iter().map(|s| s.nrows()).collect();
    let total: usize = d.iter().product();
    let mut ld = 0.0;
    for (k, s) in cov.sigma.iter().enumerate() {
        ld += (total / d[k]) as f64 * log_det_spd(s, &format!("Sigma{}", k + 1))?;
    }
    Ok(ld)
}

/// Gaussian log likelihood of `Y_1..Y_T` given `Y_0`, with
/// `vec(E_t) ~ N(0, ω_t Σ3 ⊗ Σ2 ⊗ Σ1)`.
pub fn log_likelihood(data: &TensorSeries, state: &ModelState) -> Result<f64> {
    let e = residuals(data, state)?;
    log_likelihood_from_residuals(&e, &state.cov, &state.vol.omega)
}

pub fn log_likelihood_from_residuals(e: &[DenseTensor], cov: &ErrorCov, omega: &[f64]) -> Result<f64> {
    if e.is_empty() {
        return Ok(0.0);
    }
    log_likelihood_stacked(&stack(e), cov, omega)
}

/// As [`log_likelihood_from_residuals`] with periods stacked on a fourth mode.
pub fn log_likelihood_stacked(e: &DenseTensor, cov: &ErrorCov, omega: &[f64]) -> Result<f64> {
    let inv = cov.inverses()?;
    let ld = log_det_kron(cov)?;
    let n = cov.sigma.iter().map(|s| s.nrows()).product::<usize>() as f64;
    let c = n * (2.0 * std::f64::consts::PI).ln();
    let q = quad_forms(e, &inv);
    Ok(q.iter()
        .zip(omega)
        .map(|(qt, &w)| -0.5 * (c + ld + n * w.ln() + qt / w))
        .sum())
}
