//! Gibbs sampler for the tensor autoregression and post-processing of its
//! draws.

pub mod blocks;
pub mod design;
pub mod shrinkage;
pub mod volatility;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::decomp::{hosvd, sign_normalize, tucker_reconstruct, TuckerFactors};
use crate::error::{Error, Result};
use crate::linalg::cholesky;
use crate::model::likelihood::log_likelihood_stacked;
use crate::model::stacked::{self, quad_forms};
use crate::model::prior::Priors;
use crate::model::state::{
    cp_core, CoeffForm, ErrorCov, InterceptTrend, ModelSpec, ModelState, ShrinkageState,
    VolatilityState,
};
use crate::series::TensorSeries;
use crate::tensor::{DenseTensor, Matrix};

pub use blocks::{sample_core, sample_core_with, sample_factor, sample_factor_with, sample_intercept, sample_sigma, BlockData};
pub use shrinkage::MhCounter;
pub use volatility::{sample_volatility, VolCounters};

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    /// Total sweeps, burn-in included.
    pub n_iter: usize,
    pub n_burn: usize,
    pub thin: usize,
    pub seed: u64,
    pub spec: ModelSpec,
    pub priors: Priors,
    /// Standard deviation of the random-walk proposal for stick proportions.
    pub eta_step: f64,
}

impl SamplerConfig {
    pub fn new(spec: ModelSpec) -> Self {
        Self {
            n_iter: 4000,
            n_burn: 2000,
            thin: 2,
            seed: 0,
            spec,
            priors: Priors::default(),
            eta_step: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_burn >= self.n_iter {
            return Err(Error::Config(format!(
                "n_burn ({}) must be below n_iter ({})",
                self.n_burn, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if !(self.eta_step > 0.0) {
            return Err(Error::Config("eta proposal sd must be positive".into()));
        }
        if self.priors.alpha_grid.is_empty() {
            return Err(Error::Config("alpha grid is empty".into()));
        }
        self.spec.validate()
    }

    pub fn n_draws(&self) -> usize {
        (self.n_iter - self.n_burn) / self.thin
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AcceptanceStats {
    pub eta: MhCounter,
    pub vol: VolCounters,
}

/// One retained draw. `cov` is rescaled so `Σ2`, `Σ3` have unit average
/// diagonal; the chain itself runs on the raw factors.
#[derive(Clone, Debug, PartialEq)]
pub struct Draw {
    pub factors: TuckerFactors,
    pub intercept: InterceptTrend,
    pub cov: ErrorCov,
    pub vol: VolatilityState,
    pub shrink: Option<ShrinkageState>,
    pub log_lik: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorDraws {
    pub spec: ModelSpec,
    pub draws: Vec<Draw>,
    pub stats: AcceptanceStats,
}

impl PosteriorDraws {
    /// Posterior mean of the order-six coefficient tensor.
    pub fn mean_coeff(&self) -> Result<DenseTensor> {
        let first = self
            .draws
            .first()
            .ok_or_else(|| Error::Config("no retained draws".into()))?;
        let mut acc = tucker_reconstruct(&first.factors);
        for d in &self.draws[1..] {
            let b = tucker_reconstruct(&d.factors);
            for (a, v) in acc.data_mut().iter_mut().zip(b.data()) {
                *a += v;
            }
        }
        Ok(acc.scaled(1.0 / self.draws.len() as f64))
    }

    pub fn mean_intercept(&self) -> Result<InterceptTrend> {
        let n = self.draws.len();
        if n == 0 {
            return Err(Error::Config("no retained draws".into()));
        }
        let avg = |get: &dyn Fn(&Draw) -> Option<&DenseTensor>| -> Option<DenseTensor> {
            let mut acc: Option<DenseTensor> = None;
            for d in &self.draws {
                let x = get(d)?;
                acc = Some(match acc {
                    None => x.clone(),
                    Some(a) => a.zip_with(x, |p, q| p + q).expect("same shape"),
                });
            }
            acc.map(|a| a.scaled(1.0 / n as f64))
        };
        Ok(InterceptTrend {
            a0: avg(&|d| Some(&d.intercept.a0)).expect("draws present"),
            a1: avg(&|d| d.intercept.a1.as_ref()),
        })
    }
}

/// Posterior mean of the coefficient tensor, then HOSVD at `ranks` and the
/// largest-loading-positive sign convention.
pub fn identify(draws: &PosteriorDraws, ranks: &[usize]) -> Result<TuckerFactors> {
    let mean = draws.mean_coeff()?;
    Ok(sign_normalize(&hosvd(&mean, ranks)?))
}

/// Least-squares VAR(1) with intercept on `vec(Y_t)`, returned as the
/// coefficient tensor and the intercept.
fn least_squares_var(data: &TensorSeries) -> Option<(DenseTensor, DenseTensor)> {
    let n = data.n_cells();
    let t_len = data.t_len();
    let mut xtx = Matrix::zeros(n + 1, n + 1);
    let mut xty = Matrix::zeros(n + 1, n);
    for t in 1..=t_len {
        let mut x = Vec::with_capacity(n + 1);
        x.push(1.0);
        x.extend_from_slice(data.y(t - 1).data());
        let x = crate::tensor::Vector::from_vec(x);
        let y = data.y(t).to_vector();
        xtx += &x * x.transpose();
        xty += &x * y.transpose();
    }
    let coef = cholesky(&xtx, "VAR(1) normal equations").ok()?.solve(&xty);
    // coef is (1 + n) × n: row 0 is the intercept, rows 1.. hold B̂ᵀ.
    let bhat = coef.rows(1, n).transpose();
    let d = data.dims();
    let shape = [d[0], d[1], d[2], d[0], d[1], d[2]];
    let b = DenseTensor::new(shape.to_vec(), bhat.as_slice().to_vec()).ok()?;
    let a0 = DenseTensor::new(d.to_vec(), coef.row(0).iter().cloned().collect()).ok()?;
    Some((b, a0))
}

fn sample_mean(data: &TensorSeries) -> DenseTensor {
    let t_len = data.t_len();
    let mut acc = DenseTensor::zeros(&data.dims());
    for t in 1..=t_len {
        for (a, v) in acc.data_mut().iter_mut().zip(data.y(t).data()) {
            *a += v;
        }
    }
    acc.scaled(1.0 / t_len as f64)
}

/// Starting state: HOSVD of the least-squares VAR(1) when it is identified,
/// otherwise small random factors.
pub fn initial_state<R: Rng + ?Sized>(
    data: &TensorSeries,
    spec: &ModelSpec,
    rng: &mut R,
) -> Result<ModelState> {
    spec.validate()?;
    if data.dims() != spec.dims {
        return Err(Error::ShapeMismatch(format!(
            "data dims {:?} vs spec dims {:?}",
            data.dims(),
            spec.dims
        )));
    }
    let n = data.n_cells();
    let t_len = data.t_len();
    if t_len < 2 {
        return Err(Error::TooShort(format!("need T ≥ 2, got {t_len}")));
    }
    let ls = if t_len * n >= n * n + n {
        least_squares_var(data)
    } else {
        None
    };
    let small = |rows: usize, cols: usize, rng: &mut R| {
        Matrix::from_fn(rows, cols, |_, _| 0.1 * rng.sample::<f64, _>(StandardNormal))
    };
    let (factors, a0) = match ls {
        Some((b, a0)) => {
            let h = hosvd(&b, &spec.ranks)?;
            let f = match spec.form {
                CoeffForm::Tucker => h,
                CoeffForm::Cp => {
                    let r = spec.ranks[0];
                    let norm = crate::tensor::frobenius_norm(&b);
                    let c = (norm / (r as f64).sqrt()).max(1e-6).powf(1.0 / 6.0);
                    TuckerFactors::new(cp_core(r), h.factors.iter().map(|u| u * c).collect())?
                }
            };
            (f, a0)
        }
        None => {
            let fs: Vec<Matrix> = (0..6).map(|k| small(spec.factor_rows(k), spec.ranks[k], rng)).collect();
            let core = match spec.form {
                CoeffForm::Tucker => DenseTensor::from_fn(&spec.ranks, |_| {
                    0.1 * rng.sample::<f64, _>(StandardNormal)
                }),
                CoeffForm::Cp => cp_core(spec.ranks[0]),
            };
            (TuckerFactors::new(core, fs)?, sample_mean(data))
        }
    };
    let intercept = InterceptTrend {
        a1: spec.trend.then(|| DenseTensor::zeros(&spec.dims)),
        a0,
    };
    Ok(ModelState {
        factors,
        intercept,
        cov: ErrorCov::identity(spec.dims),
        vol: VolatilityState::initial(spec.regime, t_len),
        shrink: spec.shrinkage.then(|| ShrinkageState::initial(spec.ranks)),
    })
}

/// One full Gibbs sweep: intercept, `B1..B6`, core (Tucker only), `Σ1..Σ3`,
/// shrinkage, volatility. Returns the residuals at the final coefficients,
/// stacked as `[I1, I2, I3, T]`.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &TensorSeries,
    spec: &ModelSpec,
    priors: &Priors,
    eta_step: f64,
    stats: &mut AcceptanceStats,
    sweep: usize,
    rng: &mut R,
) -> Result<DenseTensor> {
    sample_intercept(state, data, spec.trend, priors, rng).map_err(|e| e.in_block(sweep, "intercept"))?;
    // Intercept, covariance and volatility stay fixed through the
    // coefficient blocks, so their stacked data is built once.
    let bd = BlockData::new(data, state).map_err(|e| e.in_block(sweep, "B1"))?;
    for k in 0..6 {
        sample_factor_with(k, state, &bd, priors, rng).map_err(|e| e.in_block(sweep, format!("B{}", k + 1)))?;
    }
    if spec.form == CoeffForm::Tucker {
        sample_core_with(state, &bd, priors, rng).map_err(|e| e.in_block(sweep, "G"))?;
    }
    drop(bd);
    let resid = stacked::residuals(data, &state.factors, &state.intercept);
    for k in 0..3 {
        sample_sigma(k, state, &resid, priors, rng).map_err(|e| e.in_block(sweep, format!("Sigma{}", k + 1)))?;
    }
    if let Some(sh) = &mut state.shrink {
        for (k, m) in sh.modes.iter_mut().enumerate() {
            shrinkage::sample_mode(m, &state.factors.factors[k], priors, eta_step, &mut stats.eta, rng);
        }
    }
    if spec.regime != crate::model::state::Regime::Homoskedastic {
        let inv = state.cov.inverses().map_err(|e| e.in_block(sweep, "volatility"))?;
        let s = quad_forms(&resid, &inv);
        sample_volatility(&mut state.vol, &s, data.n_cells(), priors, &mut stats.vol, rng);
    }
    Ok(resid)
}

/// Runs one chain from [`initial_state`].
pub fn run_gibbs(data: &TensorSeries, config: &SamplerConfig) -> Result<PosteriorDraws> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let state = initial_state(data, &config.spec, &mut rng)?;
    run_gibbs_from(data, config, state, &mut rng)
}

pub fn run_gibbs_from<R: Rng + ?Sized>(
    data: &TensorSeries,
    config: &SamplerConfig,
    mut state: ModelState,
    rng: &mut R,
) -> Result<PosteriorDraws> {
    config.validate()?;
    state.check(&config.spec, data.t_len())?;
    let mut stats = AcceptanceStats::default();
    let mut draws = Vec::with_capacity(config.n_draws());
    for it in 1..=config.n_iter {
        let resid = gibbs_sweep(
            &mut state,
            data,
            &config.spec,
            &config.priors,
            config.eta_step,
            &mut stats,
            it,
            rng,
        )?;
        if it > config.n_burn && (it - config.n_burn) % config.thin == 0 {
            let log_lik = log_likelihood_stacked(&resid, &state.cov, &state.vol.omega)
                .map_err(|e| e.in_block(it, "log-likelihood"))?;
            draws.push(Draw {
                factors: state.factors.clone(),
                intercept: state.intercept.clone(),
                cov: state.cov.normalized(),
                vol: state.vol.clone(),
                shrink: state.shrink.clone(),
                log_lik,
            });
        }
    }
    for (name, c) in [("eta", stats.eta), ("h", stats.vol.h)] {
        if let Some(r) = c.rate() {
            if !(0.1..=0.9).contains(&r) {
                log::warn!("{name} acceptance rate {r:.3} outside [0.1, 0.9]");
            }
        }
    }
    Ok(PosteriorDraws {
        spec: config.spec.clone(),
        draws,
        stats,
    })
}
