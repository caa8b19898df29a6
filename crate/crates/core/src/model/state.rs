use crate::decomp::{superdiagonal_core, TuckerFactors};
use crate::error::{Error, Result};
use crate::linalg::spd_inverse;
use crate::tensor::{DenseTensor, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoeffForm {
    Tucker,
    /// Superdiagonal core of ones held fixed; all six ranks equal.
    Cp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Homoskedastic,
    Outlier,
    Csv,
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homoskedastic" | "homo" => Ok(Regime::Homoskedastic),
            "outlier" => Ok(Regime::Outlier),
            "csv" => Ok(Regime::Csv),
            other => Err(Error::Config(format!("unknown regime '{other}'"))),
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Homoskedastic => "homoskedastic",
            Regime::Outlier => "outlier",
            Regime::Csv => "csv",
        })
    }
}

/// Structural choices for one model fit.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub dims: [usize; 3],
    /// Response ranks `R1..R3` followed by predictor ranks `R4..R6`.
    pub ranks: [usize; 6],
    pub form: CoeffForm,
    pub regime: Regime,
    pub trend: bool,
    pub shrinkage: bool,
}

impl ModelSpec {
    pub fn new(dims: [usize; 3], ranks: [usize; 6]) -> Self {
        Self {
            dims,
            ranks,
            form: CoeffForm::Tucker,
            regime: Regime::Homoskedastic,
            trend: false,
            shrinkage: false,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.dims.iter().product()
    }

    /// Row dimension of factor `k`.
    pub fn factor_rows(&self, k: usize) -> usize {
        self.dims[k % 3]
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::Config(format!("dims must be positive: {:?}", self.dims)));
        }
        for k in 0..6 {
            let (r, d) = (self.ranks[k], self.factor_rows(k));
            if r == 0 || r > d {
                return Err(Error::RankExceedsDimension {
                    mode: k,
                    rank: r,
                    dim: d,
                });
            }
        }
        if self.form == CoeffForm::Cp && self.ranks.iter().any(|&r| r != self.ranks[0]) {
            return Err(Error::Config(format!(
                "CP form needs equal ranks, got {:?}",
                self.ranks
            )));
        }
        Ok(())
    }
}

/// `A_t = A0 + A1·t` for `t = 1..T`.
#[derive(Clone, Debug, PartialEq)]
pub struct InterceptTrend {
    pub a0: DenseTensor,
    pub a1: Option<DenseTensor>,
}

impl InterceptTrend {
    pub fn constant(a0: DenseTensor) -> Self {
        Self { a0, a1: None }
    }

    pub fn at(&self, t: usize) -> DenseTensor {
        match &self.a1 {
            None => self.a0.clone(),
            Some(a1) => {
                let tf = t as f64;
                let data = self
                    .a0
                    .data()
                    .iter()
                    .zip(a1.data())
                    .map(|(a, b)| a + b * tf)
                    .collect();
                DenseTensor::new(self.a0.shape().to_vec(), data).expect("matching shapes")
            }
        }
    }
}

/// Kronecker factors of `Σ = Σ3 ⊗ Σ2 ⊗ Σ1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorCov {
    pub sigma: [Matrix; 3],
}

impl ErrorCov {
    pub fn identity(dims: [usize; 3]) -> Self {
        Self {
            sigma: dims.map(|d| Matrix::identity(d, d)),
        }
    }

    pub fn inverses(&self) -> Result<[Matrix; 3]> {
        Ok([
            spd_inverse(&self.sigma[0], "Sigma1")?,
            spd_inverse(&self.sigma[1], "Sigma2")?,
            spd_inverse(&self.sigma[2], "Sigma3")?,
        ])
    }

    /// Rescales `Σ2`, `Σ3` to unit average diagonal and moves the scale to
    /// `Σ1`. The Kronecker product is unchanged.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        for k in 1..3 {
            let n = out.sigma[k].nrows() as f64;
            let c = out.sigma[k].trace() / n;
            out.sigma[k] /= c;
            out.sigma[0] *= c;
        }
        out
    }

    pub fn full(&self) -> Matrix {
        self.sigma[2].kronecker(&self.sigma[1]).kronecker(&self.sigma[0])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum VolLatent {
    None,
    Outlier { o: Vec<f64>, p_out: f64 },
    Csv { h: Vec<f64>, phi: f64, sigma2: f64 },
}

/// Per-period scale `ω_t` of the error covariance and the latent process
/// generating it.
#[derive(Clone, Debug, PartialEq)]
pub struct VolatilityState {
    pub omega: Vec<f64>,
    pub latent: VolLatent,
}

impl VolatilityState {
    pub fn homoskedastic(t_len: usize) -> Self {
        Self {
            omega: vec![1.0; t_len],
            latent: VolLatent::None,
        }
    }

    pub fn initial(regime: Regime, t_len: usize) -> Self {
        let latent = match regime {
            Regime::Homoskedastic => VolLatent::None,
            Regime::Outlier => VolLatent::Outlier {
                o: vec![1.0; t_len],
                p_out: 0.02,
            },
            Regime::Csv => VolLatent::Csv {
                h: vec![0.0; t_len],
                phi: 0.9,
                sigma2: 0.01,
            },
        };
        Self {
            omega: vec![1.0; t_len],
            latent,
        }
    }

    pub fn regime(&self) -> Regime {
        match self.latent {
            VolLatent::None => Regime::Homoskedastic,
            VolLatent::Outlier { .. } => Regime::Outlier,
            VolLatent::Csv { .. } => Regime::Csv,
        }
    }

    /// Recomputes `ω` from the latent path.
    pub fn sync_omega(&mut self) {
        match &self.latent {
            VolLatent::None => self.omega.iter_mut().for_each(|w| *w = 1.0),
            VolLatent::Outlier { o, .. } => {
                for (w, v) in self.omega.iter_mut().zip(o) {
                    *w = v * v;
                }
            }
            VolLatent::Csv { h, .. } => {
                for (w, v) in self.omega.iter_mut().zip(h) {
                    *w = v.exp();
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeShrinkage {
    pub tau: f64,
    /// Stick proportions, length `R - 1`.
    pub eta: Vec<f64>,
    /// Stick-breaking weights, length `R`.
    pub phi: Vec<f64>,
    pub alpha: f64,
}

impl ModeShrinkage {
    pub fn initial(rank: usize) -> Self {
        let eta = vec![0.5; rank.saturating_sub(1)];
        let phi = super::prior::stick_breaking(&eta, rank);
        Self {
            tau: 1.0,
            eta,
            phi,
            alpha: 0.5,
        }
    }

    pub fn variance(&self, r: usize) -> f64 {
        self.tau * self.phi[r]
    }
}

/// Multiplicative stick-breaking state for the six factor matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct ShrinkageState {
    pub modes: Vec<ModeShrinkage>,
}

impl ShrinkageState {
    pub fn initial(ranks: [usize; 6]) -> Self {
        Self {
            modes: ranks.iter().map(|&r| ModeShrinkage::initial(r)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub factors: TuckerFactors,
    pub intercept: InterceptTrend,
    pub cov: ErrorCov,
    pub vol: VolatilityState,
    /// `None` when the factor matrices use a fixed Gaussian prior.
    pub shrink: Option<ShrinkageState>,
}

impl ModelState {
    pub fn dims(&self) -> [usize; 3] {
        let d = self.factors.dims();
        [d[0], d[1], d[2]]
    }

    pub fn t_len(&self) -> usize {
        self.vol.omega.len()
    }

    /// Validates shapes against a spec and a series length.
    pub fn check(&self, spec: &ModelSpec, t_len: usize) -> Result<()> {
        let d = self.factors.dims();
        let expected: Vec<usize> = (0..6).map(|k| spec.factor_rows(k)).collect();
        if d != expected || self.factors.ranks() != spec.ranks.to_vec() {
            return Err(Error::ShapeMismatch(format!(
                "factors have dims {d:?} ranks {:?}, spec wants dims {expected:?} ranks {:?}",
                self.factors.ranks(),
                spec.ranks
            )));
        }
        if self.intercept.a0.shape() != spec.dims {
            return Err(Error::ShapeMismatch("intercept shape".into()));
        }
        for k in 0..3 {
            let s = &self.cov.sigma[k];
            if s.nrows() != spec.dims[k] || s.ncols() != spec.dims[k] {
                return Err(Error::ShapeMismatch(format!("Sigma{} shape", k + 1)));
            }
        }
        if self.vol.omega.len() != t_len {
            return Err(Error::ShapeMismatch(format!(
                "omega has length {}, series has T = {t_len}",
                self.vol.omega.len()
            )));
        }
        Ok(())
    }
}

/// Core tensor used when the coefficient form is CP.
pub fn cp_core(rank: usize) -> DenseTensor {
    superdiagonal_core(6, rank)
}
