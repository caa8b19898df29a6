use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::dist::{inv_gamma_sample, sample_log_weights, truncated_normal};
use crate::model::prior::Priors;
use crate::model::state::{VolLatent, VolatilityState};

use super::shrinkage::MhCounter;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VolCounters {
    pub h: MhCounter,
    pub phi: MhCounter,
}

/// Log weights of the outlier scale `o_t` over `{1} ∪ grid`, given the
/// Mahalanobis form `s_t` of the residual and `n` cells.
pub fn outlier_log_weights(s: f64, n: usize, p_out: f64, grid: &[f64]) -> Vec<f64> {
    let nf = n as f64;
    let g = grid.len() as f64;
    let mut lw = Vec::with_capacity(grid.len() + 1);
    lw.push((1.0 - p_out).ln() - 0.5 * s);
    for &v in grid {
        lw.push((p_out / g).ln() - nf * v.ln() - s / (2.0 * v * v));
    }
    lw
}

/// Log conditional of `h_t` up to a constant.
pub fn h_log_target(t: usize, x: f64, h: &[f64], s: f64, n: usize, phi: f64, sigma2: f64) -> f64 {
    let mut lp = -0.5 * n as f64 * x - 0.5 * s * (-x).exp();
    if t == 0 {
        lp -= x * x * (1.0 - phi * phi) / (2.0 * sigma2);
    } else {
        lp -= (x - phi * h[t - 1]).powi(2) / (2.0 * sigma2);
    }
    if t + 1 < h.len() {
        lp -= (h[t + 1] - phi * x).powi(2) / (2.0 * sigma2);
    }
    lp
}

/// Updates the latent volatility given per-period quadratic forms `s_t`.
pub fn sample_volatility<R: Rng + ?Sized>(
    vol: &mut VolatilityState,
    s: &[f64],
    n: usize,
    priors: &Priors,
    counters: &mut VolCounters,
    rng: &mut R,
) {
    match &mut vol.latent {
        VolLatent::None => {}
        VolLatent::Outlier { o, p_out } => {
            let mut n_out = 0usize;
            for (ot, &st) in o.iter_mut().zip(s) {
                let lw = outlier_log_weights(st, n, *p_out, &priors.outlier_grid);
                let k = sample_log_weights(&lw, rng);
                *ot = if k == 0 { 1.0 } else { priors.outlier_grid[k - 1] };
                if k > 0 {
                    n_out += 1;
                }
            }
            let n_norm = o.len() - n_out;
            *p_out = Beta::new(priors.p_out_a + n_out as f64, priors.p_out_b + n_norm as f64)
                .expect("positive Beta parameters")
                .sample(rng);
        }
        VolLatent::Csv { h, phi, sigma2 } => {
            let step = 2.4 / (0.5 * n as f64 + (1.0 + *phi * *phi) / *sigma2).sqrt();
            for t in 0..h.len() {
                let cur = h_log_target(t, h[t], h, s[t], n, *phi, *sigma2);
                let z: f64 = rng.sample(StandardNormal);
                let prop = h[t] + step * z;
                let cand = h_log_target(t, prop, h, s[t], n, *phi, *sigma2);
                let acc = rng.random::<f64>().ln() < cand - cur;
                if acc {
                    h[t] = prop;
                }
                counters.h.record(acc);
            }

            // φ: Gaussian part times the truncated prior as an independence
            // proposal, corrected by the stationary initial-condition factor.
            let (mut sxx, mut sxy) = (0.0, 0.0);
            for t in 1..h.len() {
                sxx += h[t - 1] * h[t - 1];
                sxy += h[t] * h[t - 1];
            }
            let pp = 1.0 / (priors.phi_sd * priors.phi_sd);
            let prec = pp + sxx / *sigma2;
            let mean = (priors.phi_mean * pp + sxy / *sigma2) / prec;
            let prop = truncated_normal(mean, prec.sqrt().recip(), -1.0, 1.0, rng);
            let ln_a = |p: f64| 0.5 * (1.0 - p * p).ln() - h[0] * h[0] * (1.0 - p * p) / (2.0 * *sigma2);
            let acc = rng.random::<f64>().ln() < ln_a(prop) - ln_a(*phi);
            if acc {
                *phi = prop;
            }
            counters.phi.record(acc);

            let mut ss = h[0] * h[0] * (1.0 - *phi * *phi);
            for t in 1..h.len() {
                ss += (h[t] - *phi * h[t - 1]).powi(2);
            }
            *sigma2 = inv_gamma_sample(
                priors.sigma2_shape + h.len() as f64 / 2.0,
                priors.sigma2_scale + ss / 2.0,
                rng,
            );
        }
    }
    vol.sync_omega();
}
