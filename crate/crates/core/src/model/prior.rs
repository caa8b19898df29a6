//! Prior hyperparameters, the stick-breaking map, the joint log prior, and
//! exact draws from the prior.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::decomp::TuckerFactors;
use crate::dist::{
    gamma_sample, inv_gamma_sample, ln_beta_pdf, ln_gamma_pdf, ln_inv_gamma_pdf, ln_mvgamma,
    ln_normal_pdf, ln_truncated_normal_pdf, truncated_normal,
};
use crate::error::{Error, Result};
use crate::linalg::{inverse_wishart, log_det_spd, spd_inverse};
use crate::tensor::{DenseTensor, Matrix};

use super::state::{
    cp_core, CoeffForm, ErrorCov, InterceptTrend, ModeShrinkage, ModelSpec, ModelState, Regime,
    ShrinkageState, VolLatent, VolatilityState,
};

#[derive(Clone, Debug, PartialEq)]
pub struct Priors {
    /// Gamma shape and rate of each global scale `τ_k`.
    pub alpha_tau: f64,
    pub beta_tau: f64,
    /// Variance of factor entries when shrinkage is off.
    pub factor_var: f64,
    pub core_var: f64,
    pub intercept_var: f64,
    /// Inverse-Wishart degrees of freedom are `I_k + iw_df_extra`.
    pub iw_df_extra: f64,
    /// Inverse-Wishart scale is `iw_scale · I`.
    pub iw_scale: f64,
    pub p_out_a: f64,
    pub p_out_b: f64,
    pub outlier_grid: Vec<f64>,
    pub phi_mean: f64,
    pub phi_sd: f64,
    pub sigma2_shape: f64,
    pub sigma2_scale: f64,
    /// Support of the griddy-Gibbs step for `α_k`.
    pub alpha_grid: Vec<f64>,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            alpha_tau: 1.0,
            beta_tau: 1.0,
            factor_var: 1.0,
            core_var: 10.0,
            intercept_var: 10.0,
            iw_df_extra: 2.0,
            iw_scale: 1.0,
            p_out_a: 2.0,
            p_out_b: 100.0,
            outlier_grid: outlier_grid(20),
            phi_mean: 0.9,
            phi_sd: 0.2,
            sigma2_shape: 5.0,
            sigma2_scale: 0.04,
            alpha_grid: alpha_grid(100),
        }
    }
}

impl Priors {
    pub fn iw_df(&self, dim: usize) -> f64 {
        dim as f64 + self.iw_df_extra
    }

    pub fn iw_scale_matrix(&self, dim: usize) -> Matrix {
        Matrix::identity(dim, dim) * self.iw_scale
    }
}

/// Midpoints of `n` equal cells on `(2, 10)`.
pub fn outlier_grid(n: usize) -> Vec<f64> {
    let w = 8.0 / n as f64;
    (0..n).map(|k| 2.0 + w * (k as f64 + 0.5)).collect()
}

/// `k / n` for `k = 1..n`.
pub fn alpha_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64 / n as f64).collect()
}

/// `φ_r = η_r ∏_{l<r} (1 − η_l)` for `r < R`, and the leftover stick last.
pub fn stick_breaking(eta: &[f64], rank: usize) -> Vec<f64> {
    assert_eq!(eta.len() + 1, rank, "stick-breaking needs R - 1 proportions");
    let mut out = Vec::with_capacity(rank);
    let mut left = 1.0;
    for &e in eta {
        out.push(e * left);
        left *= 1.0 - e;
    }
    out.push(left);
    out
}

fn ln_inverse_wishart(sigma: &Matrix, df: f64, scale: &Matrix) -> Result<f64> {
    let p = sigma.nrows();
    let pf = p as f64;
    let inv = spd_inverse(sigma, "Sigma")?;
    let tr = (scale * inv).trace();
    Ok(0.5 * df * log_det_spd(scale, "IW scale")?
        - 0.5 * df * pf * std::f64::consts::LN_2
        - ln_mvgamma(p, 0.5 * df)
        - 0.5 * (df + pf + 1.0) * log_det_spd(sigma, "Sigma")?
        - 0.5 * tr)
}

fn ln_normal_entries(values: &[f64], var: f64) -> f64 {
    values.iter().map(|&v| ln_normal_pdf(v, 0.0, var)).sum()
}

/// Variance of column `r` of factor `k` under the current prior.
pub fn factor_prior_var(shrink: Option<&ShrinkageState>, priors: &Priors, k: usize, r: usize) -> f64 {
    match shrink {
        Some(s) => s.modes[k].variance(r),
        None => priors.factor_var,
    }
}

/// Joint log prior density of every sampled quantity.
pub fn log_prior(state: &ModelState, spec: &ModelSpec, priors: &Priors) -> Result<f64> {
    let mut lp = 0.0;

    if let Some(s) = &state.shrink {
        let ln_grid = -(priors.alpha_grid.len() as f64).ln();
        for (k, m) in s.modes.iter().enumerate() {
            if m.tau <= 0.0 || !m.tau.is_finite() {
                return Err(Error::OutOfSupport(format!("tau{} = {}", k + 1, m.tau)));
            }
            if !(m.alpha > 0.0 && m.alpha <= 1.0) {
                return Err(Error::OutOfSupport(format!("alpha{} = {}", k + 1, m.alpha)));
            }
            lp += ln_gamma_pdf(m.tau, priors.alpha_tau, priors.beta_tau);
            lp += ln_grid;
            for &e in &m.eta {
                if !(e > 0.0 && e < 1.0) {
                    return Err(Error::OutOfSupport(format!("eta{} = {e}", k + 1)));
                }
                lp += ln_beta_pdf(e, 1.0, m.alpha);
            }
        }
    }

    for (k, b) in state.factors.factors.iter().enumerate() {
        for r in 0..b.ncols() {
            let var = factor_prior_var(state.shrink.as_ref(), priors, k, r);
            let col: Vec<f64> = b.column(r).iter().cloned().collect();
            lp += ln_normal_entries(&col, var);
        }
    }

    if spec.form == CoeffForm::Tucker {
        lp += ln_normal_entries(state.factors.core.data(), priors.core_var);
    }

    lp += ln_normal_entries(state.intercept.a0.data(), priors.intercept_var);
    if let Some(a1) = &state.intercept.a1 {
        lp += ln_normal_entries(a1.data(), priors.intercept_var);
    }

    for (k, s) in state.cov.sigma.iter().enumerate() {
        let d = s.nrows();
        lp += ln_inverse_wishart(s, priors.iw_df(d), &priors.iw_scale_matrix(d))
            .map_err(|_| Error::OutOfSupport(format!("Sigma{} is not positive definite", k + 1)))?;
    }

    match &state.vol.latent {
        VolLatent::None => {}
        VolLatent::Outlier { o, p_out } => {
            if !(*p_out > 0.0 && *p_out < 1.0) {
                return Err(Error::OutOfSupport(format!("p_out = {p_out}")));
            }
            lp += ln_beta_pdf(*p_out, priors.p_out_a, priors.p_out_b);
            let g = priors.outlier_grid.len() as f64;
            for &v in o {
                lp += if v == 1.0 {
                    (1.0 - p_out).ln()
                } else if priors.outlier_grid.contains(&v) {
                    (p_out / g).ln()
                } else {
                    return Err(Error::OutOfSupport(format!("outlier scale {v}")));
                };
            }
        }
        VolLatent::Csv { h, phi, sigma2 } => {
            if !(phi.abs() < 1.0) || *sigma2 <= 0.0 {
                return Err(Error::OutOfSupport(format!("phi = {phi}, sigma2 = {sigma2}")));
            }
            lp += ln_truncated_normal_pdf(*phi, priors.phi_mean, priors.phi_sd, -1.0, 1.0);
            lp += ln_inv_gamma_pdf(*sigma2, priors.sigma2_shape, priors.sigma2_scale);
            lp += ln_normal_pdf(h[0], 0.0, sigma2 / (1.0 - phi * phi));
            for t in 1..h.len() {
                lp += ln_normal_pdf(h[t], phi * h[t - 1], *sigma2);
            }
        }
    }
    Ok(lp)
}

fn normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, sd: impl Fn(usize) -> f64, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, c| sd(c) * rng.sample::<f64, _>(StandardNormal))
}

fn normal_tensor<R: Rng + ?Sized>(shape: &[usize], sd: f64, rng: &mut R) -> DenseTensor {
    DenseTensor::from_fn(shape, |_| sd * rng.sample::<f64, _>(StandardNormal))
}

/// Exact draw from the joint prior for a series of length `t_len`.
pub fn draw_prior_state<R: Rng + ?Sized>(
    spec: &ModelSpec,
    priors: &Priors,
    t_len: usize,
    rng: &mut R,
) -> Result<ModelState> {
    spec.validate()?;
    let shrink = if spec.shrinkage {
        let modes = spec
            .ranks
            .iter()
            .map(|&r| {
                let tau = gamma_sample(priors.alpha_tau, priors.beta_tau, rng);
                let alpha = priors.alpha_grid[rng.random_range(0..priors.alpha_grid.len())];
                let beta = Beta::new(1.0, alpha).expect("positive alpha");
                let eta: Vec<f64> = (0..r - 1)
                    .map(|_| beta.sample(rng).clamp(1e-300, 1.0 - 1e-16))
                    .collect();
                let phi = stick_breaking(&eta, r);
                ModeShrinkage { tau, eta, phi, alpha }
            })
            .collect();
        Some(ShrinkageState { modes })
    } else {
        None
    };

    let factors: Vec<Matrix> = (0..6)
        .map(|k| {
            normal_matrix(
                spec.factor_rows(k),
                spec.ranks[k],
                |r| factor_prior_var(shrink.as_ref(), priors, k, r).sqrt(),
                rng,
            )
        })
        .collect();
    let core = match spec.form {
        CoeffForm::Tucker => normal_tensor(&spec.ranks, priors.core_var.sqrt(), rng),
        CoeffForm::Cp => cp_core(spec.ranks[0]),
    };
    let factors = TuckerFactors::new(core, factors)?;

    let a0 = normal_tensor(&spec.dims, priors.intercept_var.sqrt(), rng);
    let a1 = spec
        .trend
        .then(|| normal_tensor(&spec.dims, priors.intercept_var.sqrt(), rng));

    let mut sigma = Vec::with_capacity(3);
    for &d in &spec.dims {
        sigma.push(inverse_wishart(priors.iw_df(d), &priors.iw_scale_matrix(d), rng)?);
    }
    let cov = ErrorCov {
        sigma: [sigma[0].clone(), sigma[1].clone(), sigma[2].clone()],
    };

    let latent = match spec.regime {
        Regime::Homoskedastic => VolLatent::None,
        Regime::Outlier => {
            let p_out = Beta::new(priors.p_out_a, priors.p_out_b)
                .expect("positive Beta parameters")
                .sample(rng);
            let o = (0..t_len)
                .map(|_| {
                    if rng.random::<f64>() < p_out {
                        priors.outlier_grid[rng.random_range(0..priors.outlier_grid.len())]
                    } else {
                        1.0
                    }
                })
                .collect();
            VolLatent::Outlier { o, p_out }
        }
        Regime::Csv => {
            let phi = truncated_normal(priors.phi_mean, priors.phi_sd, -1.0, 1.0, rng);
            let sigma2 = inv_gamma_sample(priors.sigma2_shape, priors.sigma2_scale, rng);
            let mut h = Vec::with_capacity(t_len);
            let sd0 = (sigma2 / (1.0 - phi * phi)).sqrt();
            for t in 0..t_len {
                let z: f64 = rng.sample(StandardNormal);
                let prev = if t == 0 { 0.0 } else { phi * h[t - 1] };
                let sd = if t == 0 { sd0 } else { sigma2.sqrt() };
                h.push(prev + sd * z);
            }
            VolLatent::Csv { h, phi, sigma2 }
        }
    };
    let mut vol = VolatilityState {
        omega: vec![1.0; t_len],
        latent,
    };
    vol.sync_omega();

    Ok(ModelState {
        factors,
        intercept: InterceptTrend { a0, a1 },
        cov,
        vol,
        shrink,
    })
}
