//! Browser demo bindings. Each export has a plain Rust counterpart returning
//! `Result<_, String>` so the logic is testable off the browser.

use btar::bench::{generate, DgpKind, DgpSpec};
use btar::decomp::{hosvd, projection_matrix, sign_normalize, tucker_reconstruct};
use btar::io::series_to_string;
use btar::io::config::parse_ranks;
use btar::model::simulate::simulate;
use btar::model::state::{ErrorCov, InterceptTrend, ModelSpec, ModelState, Regime, VolLatent, VolatilityState};
use btar::sampler::{run_gibbs, SamplerConfig};
use btar::tensor::DenseTensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wasm_bindgen::prelude::*;

fn parse_dims(s: &str) -> Result<[usize; 3], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|e| format!("dims: {e}")))
        .collect::<Result<_, _>>()?;
    <[usize; 3]>::try_from(v).map_err(|v| format!("dims needs three values, got {}", v.len()))
}

fn ranks(s: &str) -> Result<[usize; 6], String> {
    parse_ranks(s).map_err(|e| e.to_string())
}

#[wasm_bindgen]
#[derive(Debug)]
pub struct Simulated {
    text: String,
    first_cell: Vec<f64>,
    guard_scale_value: f64,
}

#[wasm_bindgen]
impl Simulated {
    /// The series in the tensor-series file format.
    pub fn text(&self) -> String {
        self.text.clone()
    }

    /// Path of cell (1,1,1), presample included.
    pub fn first_cell(&self) -> Vec<f64> {
        self.first_cell.clone()
    }

    /// Factor the stability guard applied to the coefficients (1 when idle).
    pub fn guard_scale(&self) -> f64 {
        self.guard_scale_value
    }
}

pub fn simulate_series(kind: &str, dims: &str, ranks_s: &str, t_len: usize, seed: u64) -> Result<Simulated, String> {
    let kind: DgpKind = kind.parse().map_err(|e: btar::Error| e.to_string())?;
    let dgp = generate(&DgpSpec::new(kind, parse_dims(dims)?, ranks(ranks_s)?, t_len, seed)).map_err(|e| e.to_string())?;
    Ok(Simulated {
        text: series_to_string(&dgp.series),
        first_cell: dgp.series.cell_series([0, 0, 0]),
        guard_scale_value: dgp.guard_scale,
    })
}

#[wasm_bindgen(js_name = simulateSeries)]
pub fn simulate_series_js(kind: &str, dims: &str, ranks: &str, t_len: usize, seed: u64) -> Result<Simulated, JsError> {
    simulate_series(kind, dims, ranks, t_len, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[derive(Debug)]
pub struct Projection {
    size: usize,
    values: Vec<f64>,
    loadings: Vec<f64>,
    rank: usize,
    reconstruction_error: f64,
}

#[wasm_bindgen]
impl Projection {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `B Bᵀ` row-major, `size × size`.
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    /// Identified loadings row-major, `size × rank`.
    pub fn loadings(&self) -> Vec<f64> {
        self.loadings.clone()
    }

    /// Max absolute gap between the true tensor and its HOSVD reconstruction.
    pub fn reconstruction_error(&self) -> f64 {
        self.reconstruction_error
    }
}

/// Draws a low-rank coefficient tensor, identifies it by HOSVD with sign
/// normalization, and returns the projection for `mode` (0-based, 0..6).
pub fn hosvd_projection(dims: &str, ranks_s: &str, seed: u64, mode: usize) -> Result<Projection, String> {
    if mode >= 6 {
        return Err(format!("mode must be in 0..6, got {mode}"));
    }
    let r = ranks(ranks_s)?;
    let dgp = generate(&DgpSpec::new(DgpKind::LowRank, parse_dims(dims)?, r, 2, seed)).map_err(|e| e.to_string())?;
    let truth = tucker_reconstruct(dgp.factors.as_ref().expect("low-rank kind has factors"));
    let id = sign_normalize(&hosvd(&truth, &r).map_err(|e| e.to_string())?);
    let b = &id.factors[mode];
    let p = projection_matrix(b);
    Ok(Projection {
        size: p.nrows(),
        values: p.transpose().as_slice().to_vec(),
        loadings: b.transpose().as_slice().to_vec(),
        rank: b.ncols(),
        reconstruction_error: tucker_reconstruct(&id).max_abs_diff(&truth),
    })
}

#[wasm_bindgen(js_name = hosvdProjection)]
pub fn hosvd_projection_js(dims: &str, ranks: &str, seed: u64, mode: usize) -> Result<Projection, JsError> {
    hosvd_projection(dims, ranks, seed, mode).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[derive(Debug)]
pub struct VolatilityFit {
    truth: Vec<f64>,
    mean: Vec<f64>,
    q05: Vec<f64>,
    q95: Vec<f64>,
}

#[wasm_bindgen]
impl VolatilityFit {
    /// True `exp(h_t / 2)`, `t = 1..T`.
    pub fn truth(&self) -> Vec<f64> {
        self.truth.clone()
    }

    pub fn mean(&self) -> Vec<f64> {
        self.mean.clone()
    }

    pub fn q05(&self) -> Vec<f64> {
        self.q05.clone()
    }

    pub fn q95(&self) -> Vec<f64> {
        self.q95.clone()
    }
}

/// Simulates a (2,2,2) series whose log-variance follows an AR(1) with a
/// volatility burst at `spike_at`, fits the stochastic-volatility model and
/// returns the posterior of `exp(h_t / 2)`.
pub fn volatility_demo(t_len: usize, spike_at: usize, iters: usize, seed: u64) -> Result<VolatilityFit, String> {
    if t_len < 10 || spike_at == 0 || spike_at > t_len {
        return Err(format!("need T ≥ 10 and 1 ≤ spike ≤ T, got T={t_len}, spike={spike_at}"));
    }
    if iters < 20 {
        return Err("need at least 20 iterations".into());
    }
    let dims = [2, 2, 2];
    let spec = ModelSpec {
        regime: Regime::Csv,
        ..ModelSpec::new(dims, [1; 6])
    };
    let dgp = generate(&DgpSpec::new(DgpKind::LowRank, dims, [1; 6], 2, seed)).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut h = vec![0.0; t_len];
    for t in 1..t_len {
        h[t] = 0.9 * h[t - 1] + 0.1 * rng.sample::<f64, _>(StandardNormal);
    }
    for (t, x) in h.iter_mut().enumerate() {
        *x += 2.5 * (-((t + 1) as f64 - spike_at as f64).abs() / 5.0).exp();
    }
    let mut vol = VolatilityState {
        omega: vec![1.0; t_len],
        latent: VolLatent::Csv { h: h.clone(), phi: 0.9, sigma2: 0.01 },
    };
    vol.sync_omega();
    let state = ModelState {
        factors: dgp.factors.expect("low-rank kind has factors"),
        intercept: InterceptTrend::constant(DenseTensor::zeros(&dims)),
        cov: ErrorCov::identity(dims),
        vol,
        shrink: None,
    };
    let data = simulate(&state, t_len, &DenseTensor::zeros(&dims), &mut rng).map_err(|e| e.to_string())?;
    let draws = run_gibbs(
        &data,
        &SamplerConfig {
            n_iter: iters,
            n_burn: iters / 2,
            thin: 1,
            seed,
            ..SamplerConfig::new(spec)
        },
    )
    .map_err(|e| e.to_string())?;
    let mut per_t: Vec<Vec<f64>> = vec![Vec::with_capacity(draws.draws.len()); t_len];
    for d in &draws.draws {
        for (col, w) in per_t.iter_mut().zip(&d.vol.omega) {
            col.push(w.sqrt());
        }
    }
    let mut fit = VolatilityFit {
        truth: h.iter().map(|x| (x / 2.0).exp()).collect(),
        mean: Vec::with_capacity(t_len),
        q05: Vec::with_capacity(t_len),
        q95: Vec::with_capacity(t_len),
    };
    for col in &mut per_t {
        col.sort_by(f64::total_cmp);
        fit.mean.push(col.iter().sum::<f64>() / col.len() as f64);
        fit.q05.push(btar::io::summary::quantile_sorted(col, 0.05));
        fit.q95.push(btar::io::summary::quantile_sorted(col, 0.95));
    }
    Ok(fit)
}

#[wasm_bindgen(js_name = volatilityDemo)]
pub fn volatility_demo_js(t_len: usize, spike_at: usize, iters: usize, seed: u64) -> Result<VolatilityFit, JsError> {
    volatility_demo(t_len, spike_at, iters, seed).map_err(|e| JsError::new(&e))
}
