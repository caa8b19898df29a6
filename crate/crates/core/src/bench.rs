//! Monte Carlo experiments: data-generating processes, the Minnesota BVAR
//! baseline, coefficient error metrics and the suite runner.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::decomp::{tucker_reconstruct, TuckerFactors};
use crate::error::{Error, Result};
use crate::linalg::cholesky;
use crate::model::residuals::{matrix_spectral_radius, spectral_radius, var_form};
use crate::model::simulate::simulate;
use crate::model::state::{CoeffForm, ErrorCov, InterceptTrend, ModelSpec, ModelState, VolatilityState};
use crate::model::Priors;
use crate::sampler::{run_gibbs, SamplerConfig};
use crate::series::TensorSeries;
use crate::tensor::{frobenius_norm, DenseTensor, Matrix};

/// Spectral radius the simulated VAR form is capped at.
pub const STABILITY_RADIUS: f64 = 0.95;
/// Periods simulated and dropped before the retained sample.
pub const DGP_BURN: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DgpKind {
    LowRank,
    LowRankSparse,
    DenseVar,
}

impl FromStr for DgpKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lowrank" => Ok(Self::LowRank),
            "lowrank_sparse" => Ok(Self::LowRankSparse),
            "dense_var" => Ok(Self::DenseVar),
            _ => Err(Error::Config(format!(
                "unknown DGP '{s}' (expected lowrank, lowrank_sparse or dense_var)"
            ))),
        }
    }
}

impl fmt::Display for DgpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LowRank => "lowrank",
            Self::LowRankSparse => "lowrank_sparse",
            Self::DenseVar => "dense_var",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub dims: [usize; 3],
    /// Tucker ranks of the low-rank kinds; ignored by `dense_var`.
    pub ranks: [usize; 6],
    pub t_len: usize,
    pub seed: u64,
    pub frob_norm: f64,
    pub intercept: f64,
}

impl DgpSpec {
    pub fn new(kind: DgpKind, dims: [usize; 3], ranks: [usize; 6], t_len: usize, seed: u64) -> Self {
        Self {
            kind,
            dims,
            ranks,
            t_len,
            seed,
            frob_norm: 5.0,
            intercept: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::Config(format!("DGP dims must be positive, got {:?}", self.dims)));
        }
        if self.t_len < 2 {
            return Err(Error::Config("DGP needs T ≥ 2".into()));
        }
        if self.kind != DgpKind::DenseVar {
            ModelSpec::new(self.dims, self.ranks).validate()?;
            if self.kind == DgpKind::LowRankSparse && (self.ranks[1] < 2 || self.ranks[4] < 2) {
                return Err(Error::Config("lowrank_sparse needs R2, R5 ≥ 2".into()));
            }
        }
        if !(self.frob_norm > 0.0) {
            return Err(Error::Config("target Frobenius norm must be positive".into()));
        }
        Ok(())
    }
}

/// A generated experiment: the true `I × I` VAR-form coefficient matrix, the
/// true factors for the low-rank kinds, and the simulated series.
#[derive(Clone, Debug)]
pub struct Dgp {
    pub spec: DgpSpec,
    pub coeff: Matrix,
    pub factors: Option<TuckerFactors>,
    pub series: TensorSeries,
    /// Frobenius norm of the coefficient tensor before the stability guard.
    pub pre_guard_norm: f64,
    /// Scalar applied to the raw draw to reach the target norm.
    pub norm_scale: f64,
    /// Scalar the stability guard applied (1 when not triggered).
    pub guard_scale: f64,
}

fn guard(rho: f64) -> f64 {
    if rho >= STABILITY_RADIUS {
        STABILITY_RADIUS / rho
    } else {
        1.0
    }
}

fn dgp_state(spec: &DgpSpec, factors: TuckerFactors) -> ModelState {
    let t_all = spec.t_len + DGP_BURN;
    ModelState {
        factors,
        intercept: InterceptTrend::constant(DenseTensor::filled(&spec.dims, spec.intercept)),
        cov: ErrorCov::identity(spec.dims),
        vol: VolatilityState::homoskedastic(t_all),
        shrink: None,
    }
}

fn simulate_dgp<R: Rng + ?Sized>(spec: &DgpSpec, state: &ModelState, rng: &mut R) -> Result<TensorSeries> {
    let all = simulate(state, spec.t_len + DGP_BURN, &DenseTensor::zeros(&spec.dims), rng)?;
    TensorSeries::new(spec.dims, all.obs()[DGP_BURN..].to_vec())
}

/// Low-rank Tucker coefficients: uniform core, `N(0.3, 0.5²)` margins,
/// Frobenius norm `frob_norm`, then the stability guard. The sparse kind zeroes
/// the second column of `B2` and `B5` before normalizing.
pub fn dgp_lowrank<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> Result<(TuckerFactors, TensorSeries)> {
    let (f, _) = lowrank_factors(spec, rng)?;
    let series = simulate_dgp(spec, &dgp_state(spec, f.clone()), rng)?;
    Ok((f, series))
}

struct Scales {
    pre_guard_norm: f64,
    norm_scale: f64,
    guard_scale: f64,
}

fn lowrank_factors<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> Result<(TuckerFactors, Scales)> {
    spec.validate()?;
    let margin = Normal::new(0.3, 0.5).expect("valid normal");
    let core = DenseTensor::from_fn(&spec.ranks, |_| rng.random::<f64>());
    let mut factors: Vec<Matrix> = (0..6)
        .map(|k| Matrix::from_fn(spec.dims[k % 3], spec.ranks[k], |_, _| margin.sample(rng)))
        .collect();
    if spec.kind == DgpKind::LowRankSparse {
        factors[1].column_mut(1).fill(0.0);
        factors[4].column_mut(1).fill(0.0);
    }
    let mut f = TuckerFactors::new(core, factors)?;
    let norm_scale = spec.frob_norm / frobenius_norm(&tucker_reconstruct(&f));
    f.core = f.core.scaled(norm_scale);
    let pre_guard_norm = frobenius_norm(&tucker_reconstruct(&f));
    let guard_scale = guard(spectral_radius(&f));
    f.core = f.core.scaled(guard_scale);
    Ok((f, Scales { pre_guard_norm, norm_scale, guard_scale }))
}

/// Dense VAR(1) on `vec(Y_t)`: diagonal `U(0.1, 0.4)`, off-diagonal
/// `N(0, 0.3²)`, Frobenius norm `frob_norm`, then the stability guard.
pub fn dgp_dense_var<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> Result<(Matrix, TensorSeries)> {
    let (b, _) = dense_coeff(spec, rng)?;
    let series = simulate_dgp(spec, &dgp_state(spec, identity_embedding(&b, spec.dims)), rng)?;
    Ok((b, series))
}

fn dense_coeff<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> Result<(Matrix, Scales)> {
    spec.validate()?;
    let n: usize = spec.dims.iter().product();
    let off = Normal::new(0.0, 0.3).expect("valid normal");
    let mut b = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            rng.random_range(0.1..0.4)
        } else {
            off.sample(rng)
        }
    });
    let norm_scale = spec.frob_norm / b.norm();
    b *= norm_scale;
    let pre_guard_norm = b.norm();
    let guard_scale = guard(matrix_spectral_radius(&b));
    b *= guard_scale;
    Ok((b, Scales { pre_guard_norm, norm_scale, guard_scale }))
}

/// A full matrix as a Tucker tensor with identity factors.
fn identity_embedding(b: &Matrix, dims: [usize; 3]) -> TuckerFactors {
    let shape = [dims[0], dims[1], dims[2], dims[0], dims[1], dims[2]];
    let core = DenseTensor::new(shape.to_vec(), b.as_slice().to_vec()).expect("n × n matches dims");
    let factors = (0..6).map(|k| Matrix::identity(dims[k % 3], dims[k % 3])).collect();
    TuckerFactors::new(core, factors).expect("identity factors")
}

pub fn generate(spec: &DgpSpec) -> Result<Dgp> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.kind {
        DgpKind::LowRank | DgpKind::LowRankSparse => {
            let (f, sc) = lowrank_factors(spec, &mut rng)?;
            let series = simulate_dgp(spec, &dgp_state(spec, f.clone()), &mut rng)?;
            Ok(Dgp {
                spec: spec.clone(),
                coeff: var_form(&f),
                factors: Some(f),
                series,
                pre_guard_norm: sc.pre_guard_norm,
                norm_scale: sc.norm_scale,
                guard_scale: sc.guard_scale,
            })
        }
        DgpKind::DenseVar => {
            let (b, sc) = dense_coeff(spec, &mut rng)?;
            let series = simulate_dgp(spec, &dgp_state(spec, identity_embedding(&b, spec.dims)), &mut rng)?;
            Ok(Dgp {
                spec: spec.clone(),
                coeff: b,
                factors: None,
                series,
                pre_guard_norm: sc.pre_guard_norm,
                norm_scale: sc.norm_scale,
                guard_scale: sc.guard_scale,
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinnesotaHyper {
    /// Prior variance of own-lag coefficients.
    pub kappa1: f64,
    /// Relative tightness of cross-lag coefficients.
    pub kappa2: f64,
    /// Prior variance of the intercepts.
    pub intercept_var: f64,
}

impl Default for MinnesotaHyper {
    fn default() -> Self {
        Self {
            kappa1: 0.04,
            kappa2: 0.25,
            intercept_var: 1e6,
        }
    }
}

/// Residual variances of univariate AR(1) fits with intercept; unit scales
/// when `T < 3`.
fn ar1_variances(x: &Matrix, y: &Matrix) -> Vec<f64> {
    let (t_len, n) = (y.nrows(), y.ncols());
    if t_len < 3 {
        return vec![1.0; n];
    }
    (0..n)
        .map(|i| {
            let xi = x.column(i + 1);
            let yi = y.column(i);
            let (mx, my) = (xi.mean(), yi.mean());
            let sxx: f64 = xi.iter().map(|v| (v - mx).powi(2)).sum();
            let sxy: f64 = xi.iter().zip(yi.iter()).map(|(a, b)| (a - mx) * (b - my)).sum();
            let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
            let ssr: f64 = xi
                .iter()
                .zip(yi.iter())
                .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
                .sum();
            let v = ssr / (t_len - 2) as f64;
            if v > 0.0 && v.is_finite() {
                v
            } else {
                1.0
            }
        })
        .collect()
}

/// Posterior mean of the VAR(1) slope matrix of `vec(Y_t)` under a
/// Minnesota prior, equation by equation.
pub fn bvar_minnesota(data: &TensorSeries, hyper: &MinnesotaHyper) -> Result<Matrix> {
    let n = data.n_cells();
    let t_len = data.t_len();
    if t_len == 0 {
        return Err(Error::TooShort("BVAR needs at least one period".into()));
    }
    if !(hyper.kappa1 >= 0.0 && hyper.kappa2 >= 0.0 && hyper.intercept_var > 0.0) {
        return Err(Error::Config("Minnesota hyperparameters must be non-negative".into()));
    }
    let mut x = Matrix::zeros(t_len, n + 1);
    let mut y = Matrix::zeros(t_len, n);
    for t in 1..=t_len {
        x[(t - 1, 0)] = 1.0;
        for (j, v) in data.y(t - 1).data().iter().enumerate() {
            x[(t - 1, j + 1)] = *v;
        }
        for (j, v) in data.y(t).data().iter().enumerate() {
            y[(t - 1, j)] = *v;
        }
    }
    let s2 = ar1_variances(&x, &y);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &y;
    let mut b = Matrix::zeros(n, n);
    for i in 0..n {
        // Equation i: (XᵀX + σᵢ² V⁻¹) β = Xᵀ yᵢ, slopes with zero prior mean.
        let mut p = xtx.clone();
        p[(0, 0)] += s2[i] / hyper.intercept_var;
        let mut zero = Vec::new();
        for j in 0..n {
            let v = if i == j {
                hyper.kappa1
            } else {
                hyper.kappa1 * hyper.kappa2 * s2[i] / s2[j]
            };
            if v == 0.0 {
                zero.push(j);
            } else {
                p[(j + 1, j + 1)] += s2[i] / v;
            }
        }
        let mut rhs = xty.column(i).clone_owned();
        // Zero prior variance pins the coefficient at its prior mean.
        for &j in &zero {
            p.row_mut(j + 1).fill(0.0);
            p.column_mut(j + 1).fill(0.0);
            p[(j + 1, j + 1)] = 1.0;
            rhs[j + 1] = 0.0;
        }
        let beta = cholesky(&p, "Minnesota posterior precision")?.solve(&rhs);
        for j in 0..n {
            b[(i, j)] = beta[j + 1];
        }
    }
    Ok(b)
}

/// `‖est − truth‖_F / √(entries)`.
pub fn rmse(est: &Matrix, truth: &Matrix) -> f64 {
    assert_eq!(est.shape(), truth.shape(), "rmse of mismatched shapes");
    (est - truth).norm() / (est.len() as f64).sqrt()
}

pub fn relative_rmse(model: f64, baseline: f64) -> f64 {
    model / baseline
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Estimator {
    BvarMinn,
    /// CP at the given common rank.
    BtarCp(usize),
    BtarTk,
    BtarTkMsb,
}

impl Estimator {
    pub fn name(&self) -> String {
        match self {
            Self::BvarMinn => "BVAR-Minn".into(),
            Self::BtarCp(_) => "BTAR-CP".into(),
            Self::BtarTk => "BTAR-TK".into(),
            Self::BtarTkMsb => "BTAR-TK-MSB".into(),
        }
    }

    /// Parses `BVAR-Minn`, `BTAR-CP`, `BTAR-CP<R>`, `BTAR-TK`, `BTAR-TK-MSB`
    /// (case-insensitive). A bare `BTAR-CP` takes `default_cp_rank`.
    pub fn parse(s: &str, default_cp_rank: usize) -> Result<Self> {
        let u = s.trim().to_ascii_uppercase();
        match u.as_str() {
            "BVAR-MINN" => Ok(Self::BvarMinn),
            "BTAR-CP" => Ok(Self::BtarCp(default_cp_rank)),
            "BTAR-TK" => Ok(Self::BtarTk),
            "BTAR-TK-MSB" => Ok(Self::BtarTkMsb),
            _ => u
                .strip_prefix("BTAR-CP")
                .and_then(|r| r.parse::<usize>().ok())
                .filter(|&r| r > 0)
                .map(Self::BtarCp)
                .ok_or_else(|| Error::Config(format!("unknown estimator '{s}'"))),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BtarCp(r) => write!(f, "BTAR-CP{r}"),
            e => f.write_str(&e.name()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitSettings {
    pub n_iter: usize,
    pub n_burn: usize,
    pub thin: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            n_iter: 4000,
            n_burn: 2000,
            thin: 2,
        }
    }
}

/// Posterior-mean VAR-form coefficient estimate of one estimator.
pub fn estimate(
    est: Estimator,
    data: &TensorSeries,
    ranks: [usize; 6],
    fit: &FitSettings,
    hyper: &MinnesotaHyper,
    seed: u64,
) -> Result<Matrix> {
    let (form, shrinkage, ranks) = match est {
        Estimator::BvarMinn => return bvar_minnesota(data, hyper),
        Estimator::BtarCp(r) => (CoeffForm::Cp, false, [r; 6]),
        Estimator::BtarTk => (CoeffForm::Tucker, false, ranks),
        Estimator::BtarTkMsb => (CoeffForm::Tucker, true, ranks),
    };
    let spec = ModelSpec {
        form,
        shrinkage,
        ..ModelSpec::new(data.dims(), ranks)
    };
    let config = SamplerConfig {
        n_iter: fit.n_iter,
        n_burn: fit.n_burn,
        thin: fit.thin,
        seed,
        priors: Priors::default(),
        ..SamplerConfig::new(spec)
    };
    let draws = run_gibbs(data, &config)?;
    let mean = draws.mean_coeff()?;
    let n = data.n_cells();
    Ok(Matrix::from_column_slice(n, n, mean.data()))
}

/// One DGP family of a suite; `T` and seeds vary across cells.
#[derive(Clone, Debug, PartialEq)]
pub struct DgpCell {
    pub kind: DgpKind,
    pub dims: [usize; 3],
    pub ranks: [usize; 6],
    /// Ranks the BTAR estimators fit; the DGP ranks when `None`.
    pub fit_ranks: Option<[usize; 6]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteSpec {
    pub dgps: Vec<DgpCell>,
    pub t_values: Vec<usize>,
    pub estimators: Vec<Estimator>,
    pub seeds: Vec<u64>,
    pub fit: FitSettings,
    pub hyper: MinnesotaHyper,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub dgp: DgpKind,
    pub dims: [usize; 3],
    pub ranks: [usize; 6],
    pub t_len: usize,
    pub estimator: Estimator,
    pub seed: u64,
    pub rmse: f64,
    /// Against BVAR-Minn on the same DGP, `T` and seed.
    pub relative_rmse: f64,
    /// Against the mean BVAR-Minn RMSE at the largest `T` of the DGP.
    pub relative_rmse_max_t: f64,
    pub wall_ms: f64,
    pub error: Option<String>,
}

pub const CSV_HEADER: &str = "dgp,dims,ranks,T,estimator,seed,rmse,relative_rmse,wall_ms,relative_rmse_maxT";

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("x")
}

impl BenchRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{:.1},{}",
            self.dgp,
            join(&self.dims),
            join(&self.ranks),
            self.t_len,
            self.estimator,
            self.seed,
            self.rmse,
            self.relative_rmse,
            self.wall_ms,
            self.relative_rmse_max_t
        )
    }
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv());
        s.push('\n');
    }
    s
}

struct Job {
    cell: usize,
    t_len: usize,
    seed: u64,
    estimator: Estimator,
}

fn run_job(suite: &SuiteSpec, job: &Job) -> BenchRow {
    let cell = &suite.dgps[job.cell];
    let spec = DgpSpec::new(cell.kind, cell.dims, cell.ranks, job.t_len, job.seed);
    let start = Instant::now();
    let result = generate(&spec).and_then(|dgp| {
        let fit_ranks = cell.fit_ranks.unwrap_or(cell.ranks);
        let est = estimate(job.estimator, &dgp.series, fit_ranks, &suite.fit, &suite.hyper, job.seed)?;
        Ok(rmse(&est, &dgp.coeff))
    });
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let (rmse, error) = match result {
        Ok(r) => (r, None),
        Err(e) => {
            log::error!("{} on {} T={} seed={}: {e}", job.estimator, cell.kind, job.t_len, job.seed);
            (f64::NAN, Some(e.to_string()))
        }
    };
    BenchRow {
        dgp: cell.kind,
        dims: cell.dims,
        ranks: cell.ranks,
        t_len: job.t_len,
        estimator: job.estimator,
        seed: job.seed,
        rmse,
        relative_rmse: f64::NAN,
        relative_rmse_max_t: f64::NAN,
        wall_ms,
        error,
    }
}

/// Runs every (DGP, T, seed, estimator) cell. Failed cells carry `NaN` RMSE
/// and the error text; rows come back in cell order regardless of threads.
pub fn run_experiment(suite: &SuiteSpec) -> Result<Vec<BenchRow>> {
    if suite.dgps.is_empty() || suite.t_values.is_empty() || suite.estimators.is_empty() || suite.seeds.is_empty() {
        return Err(Error::Config("suite needs DGPs, T values, estimators and seeds".into()));
    }
    let mut jobs = Vec::new();
    for (cell, _) in suite.dgps.iter().enumerate() {
        for &t_len in &suite.t_values {
            for &seed in &suite.seeds {
                for &estimator in &suite.estimators {
                    jobs.push(Job {
                        cell,
                        t_len,
                        seed,
                        estimator,
                    });
                }
            }
        }
    }
    let run = || jobs.par_iter().map(|j| run_job(suite, j)).collect::<Vec<_>>();
    let mut rows = match suite.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    normalize(&mut rows, &jobs);
    Ok(rows)
}

fn normalize(rows: &mut [BenchRow], jobs: &[Job]) {
    let baseline = |cell: usize, t: usize, seed: Option<u64>| -> f64 {
        let v: Vec<f64> = rows
            .iter()
            .zip(jobs)
            .filter(|(r, j)| {
                j.cell == cell && r.t_len == t && r.estimator == Estimator::BvarMinn && seed.is_none_or(|s| r.seed == s)
            })
            .map(|(r, _)| r.rmse)
            .collect();
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let max_t = jobs.iter().map(|j| j.t_len).max().unwrap_or(0);
    let same: Vec<f64> = jobs.iter().map(|j| baseline(j.cell, j.t_len, Some(j.seed))).collect();
    let fixed: Vec<f64> = jobs.iter().map(|j| baseline(j.cell, max_t, None)).collect();
    for ((r, s), f) in rows.iter_mut().zip(same).zip(fixed) {
        r.relative_rmse = relative_rmse(r.rmse, s);
        r.relative_rmse_max_t = relative_rmse(r.rmse, f);
    }
}

/// Mean of `rmse` over the rows matching the filter, ignoring failed cells.
pub fn mean_rmse(rows: &[BenchRow], keep: impl Fn(&BenchRow) -> bool) -> f64 {
    let v: Vec<f64> = rows.iter().filter(|r| keep(r) && r.rmse.is_finite()).map(|r| r.rmse).collect();
    v.iter().sum::<f64>() / v.len() as f64
}
