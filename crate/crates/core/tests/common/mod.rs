#![allow(dead_code)]

use btar::decomp::{tucker_reconstruct, TuckerFactors};
use btar::model::state::{CoeffForm, ErrorCov, InterceptTrend, ModelSpec, ModelState, VolatilityState};
use btar::sampler::design::{factor_from_param, factor_to_param};
use btar::series::TensorSeries;
use btar::tensor::{gen_inner, DenseTensor, Matrix, Vector};
use rand::Rng;

pub fn uniform_matrix(r: usize, c: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn uniform_tensor(shape: &[usize], rng: &mut impl Rng) -> DenseTensor {
    DenseTensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

pub fn spd(n: usize, rng: &mut impl Rng) -> Matrix {
    let a = uniform_matrix(n, n, rng);
    &a * a.transpose() + Matrix::identity(n, n) * 0.5
}

pub fn random_factors(dims: [usize; 3], ranks: [usize; 6], rng: &mut impl Rng) -> TuckerFactors {
    let core = uniform_tensor(&ranks, rng);
    let factors = (0..6).map(|k| uniform_matrix(dims[k % 3], ranks[k], rng)).collect();
    TuckerFactors::new(core, factors).unwrap()
}

/// Random state with non-trivial covariance, trend and volatility scales.
pub fn random_state(spec: &ModelSpec, t_len: usize, rng: &mut impl Rng) -> ModelState {
    let mut factors = random_factors(spec.dims, spec.ranks, rng);
    if spec.form == CoeffForm::Cp {
        factors.core = btar::decomp::superdiagonal_core(6, spec.ranks[0]);
    }
    let dims = spec.dims;
    ModelState {
        factors,
        intercept: InterceptTrend {
            a0: uniform_tensor(&dims, rng),
            a1: spec.trend.then(|| uniform_tensor(&dims, rng).scaled(0.1)),
        },
        cov: ErrorCov {
            sigma: [spd(dims[0], rng), spd(dims[1], rng), spd(dims[2], rng)],
        },
        vol: VolatilityState {
            omega: (0..t_len).map(|_| rng.random_range(0.5..2.0)).collect(),
            latent: btar::model::state::VolLatent::None,
        },
        shrink: None,
    }
}

pub fn random_series(dims: [usize; 3], t_len: usize, rng: &mut impl Rng) -> TensorSeries {
    let obs = (0..=t_len).map(|_| uniform_tensor(&dims, rng)).collect();
    TensorSeries::new(dims, obs).unwrap()
}

/// `vec(⟨B, Y⟩)` through the full order-six tensor.
pub fn dense_apply(f: &TuckerFactors, y: &DenseTensor) -> Vector {
    gen_inner(&tucker_reconstruct(f), y).unwrap().to_vector()
}

/// Dense GLS fit of `y_t − a_t = X_t θ + e_t`,
/// `e_t ~ N(0, ω_t Σ3⊗Σ2⊗Σ1)`, with `X_t` obtained by probing the linear map
/// `θ ↦ vec(⟨B(θ), Y_{t−1}⟩)` at unit vectors. Returns (precision, mean).
pub fn dense_gls(
    data: &TensorSeries,
    state: &ModelState,
    n_param: usize,
    build: &dyn Fn(&Vector) -> TuckerFactors,
) -> (Matrix, Vector) {
    let sig_inv = state.cov.full().try_inverse().unwrap();
    let mut prec = Matrix::zeros(n_param, n_param);
    let mut rhs = Vector::zeros(n_param);
    for t in 1..=data.t_len() {
        let y_prev = data.y(t - 1);
        let n = y_prev.len();
        let mut x = Matrix::zeros(n, n_param);
        for j in 0..n_param {
            let mut e = Vector::zeros(n_param);
            e[j] = 1.0;
            x.set_column(j, &dense_apply(&build(&e), y_prev));
        }
        let d = data.y(t).to_vector() - state.intercept.at(t).to_vector();
        let w = 1.0 / state.vol.omega[t - 1];
        prec += x.transpose() * &sig_inv * &x * w;
        rhs += x.transpose() * &sig_inv * d * w;
    }
    let mean = prec.clone().lu().solve(&rhs).unwrap();
    (prec, mean)
}

pub fn factor_builder(state: &ModelState, k: usize) -> impl Fn(&Vector) -> TuckerFactors + '_ {
    move |theta| {
        let mut f = state.factors.clone();
        let b = &f.factors[k];
        let (rows, rank) = (b.nrows(), b.ncols());
        f.factors[k] = factor_from_param(k, theta, rows, rank);
        f
    }
}

pub fn core_builder(state: &ModelState) -> impl Fn(&Vector) -> TuckerFactors + '_ {
    move |theta| {
        let mut f = state.factors.clone();
        let shape = f.core.shape().to_vec();
        f.core = DenseTensor::from_vector(&shape, theta).unwrap();
        f
    }
}

pub fn factor_param_len(state: &ModelState, k: usize) -> usize {
    factor_to_param(k, &state.factors.factors[k]).len()
}

pub fn rel_err(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

pub fn rel_err_m(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Dense multivariate-normal log likelihood with the full Kronecker covariance.
pub fn dense_loglik(data: &TensorSeries, state: &ModelState) -> f64 {
    let sigma = state.cov.full();
    let n = sigma.nrows() as f64;
    let chol = sigma.clone().cholesky().unwrap();
    let ld: f64 = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let inv = sigma.try_inverse().unwrap();
    let mut lp = 0.0;
    for t in 1..=data.t_len() {
        let e = data.y(t).to_vector()
            - state.intercept.at(t).to_vector()
            - dense_apply(&state.factors, data.y(t - 1));
        let w = state.vol.omega[t - 1];
        lp += -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + ld + n * w.ln())
            - 0.5 * (e.transpose() * &inv * &e)[(0, 0)] / w;
    }
    lp
}

/// Batch-means estimate of the mean and its standard error.
pub fn batch_mean_se(x: &[f64], n_batches: usize) -> (f64, f64) {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let b = n / n_batches;
    let means: Vec<f64> = (0..n_batches)
        .map(|i| x[i * b..(i + 1) * b].iter().sum::<f64>() / b as f64)
        .collect();
    let mm = means.iter().sum::<f64>() / n_batches as f64;
    let var = means.iter().map(|m| (m - mm).powi(2)).sum::<f64>() / (n_batches - 1) as f64;
    (mean, (var / n_batches as f64).sqrt())
}

/// Statistics of the raw chain state compared by the joint-distribution test.
pub fn geweke_stats(state: &ModelState) -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    if let Some(sh) = &state.shrink {
        out.push(("tau1", sh.modes[0].tau));
    }
    out.push(("g", state.factors.core.data()[0]));
    out.push(("Sigma1(1,1)", state.cov.sigma[0][(0, 0)]));
    match &state.vol.latent {
        btar::model::state::VolLatent::Csv { phi, .. } => out.push(("phi", *phi)),
        btar::model::state::VolLatent::Outlier { p_out, .. } => out.push(("p_out", *p_out)),
        btar::model::state::VolLatent::None => {}
    }
    out
}

pub struct GewekeRow {
    pub name: &'static str,
    pub marginal: (f64, f64),
    pub successive: (f64, f64),
}

impl GewekeRow {
    pub fn z(&self) -> f64 {
        (self.marginal.0 - self.successive.0) / (self.marginal.1.powi(2) + self.successive.1.powi(2)).sqrt()
    }
}

/// Marginal-conditional vs successive-conditional simulators, `n` draws each.
pub fn geweke(spec: &ModelSpec, priors: &btar::model::prior::Priors, t_len: usize, n: usize, seed: u64) -> Vec<GewekeRow> {
    use btar::model::prior::draw_prior_state;
    use btar::model::simulate::simulate;
    use btar::sampler::{gibbs_sweep, AcceptanceStats};
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let y0 = DenseTensor::zeros(&spec.dims);

    let mut marginal: Vec<Vec<f64>> = Vec::new();
    for _ in 0..n {
        let st = draw_prior_state(spec, priors, t_len, &mut rng).unwrap();
        let s = geweke_stats(&st);
        if marginal.is_empty() {
            marginal = vec![Vec::with_capacity(n); s.len()];
        }
        for (m, (_, v)) in marginal.iter_mut().zip(s) {
            m.push(v);
        }
    }

    let mut state = draw_prior_state(spec, priors, t_len, &mut rng).unwrap();
    let mut data = simulate(&state, t_len, &y0, &mut rng).unwrap();
    let mut stats = AcceptanceStats::default();
    let mut successive: Vec<Vec<f64>> = vec![Vec::with_capacity(n); marginal.len()];
    let mut names = Vec::new();
    for it in 0..n {
        gibbs_sweep(&mut state, &data, spec, priors, 0.01, &mut stats, it, &mut rng).unwrap();
        data = simulate(&state, t_len, &y0, &mut rng).unwrap();
        let s = geweke_stats(&state);
        names = s.iter().map(|(k, _)| *k).collect();
        for (m, (_, v)) in successive.iter_mut().zip(s) {
            m.push(v);
        }
    }
    names
        .into_iter()
        .zip(marginal.iter().zip(&successive))
        .map(|(name, (m, s))| GewekeRow {
            name,
            marginal: batch_mean_se(m, 50),
            successive: batch_mean_se(s, 50),
        })
        .collect()
}

/// Priors under which prior-predictive series of length 20 stay moderate and
/// every monitored statistic has finite variance.
pub fn geweke_priors() -> btar::model::prior::Priors {
    btar::model::prior::Priors {
        alpha_tau: 3.0,
        beta_tau: 6.0,
        factor_var: 0.25,
        core_var: 1.0,
        intercept_var: 1.0,
        iw_df_extra: 6.0,
        ..Default::default()
    }
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
