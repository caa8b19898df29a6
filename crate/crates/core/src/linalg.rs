//! Small dense helpers: Cholesky wrappers, Gaussian draws from a precision
//! matrix, and inverse-Wishart variates.

use nalgebra::Cholesky;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Vector};

pub fn cholesky(m: &Matrix, what: &str) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    Cholesky::new(symmetrize(m)).ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn spd_inverse(m: &Matrix, what: &str) -> Result<Matrix> {
    Ok(symmetrize(&cholesky(m, what)?.inverse()))
}

pub fn log_det_spd(m: &Matrix, what: &str) -> Result<f64> {
    let l = cholesky(m, what)?;
    Ok(2.0 * l.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

pub fn std_normal_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Gaussian full conditional stored in canonical form: precision `K` and
/// `h = K μ`.
#[derive(Clone, Debug)]
pub struct GaussianConditional {
    pub precision: Matrix,
    pub rhs: Vector,
}

impl GaussianConditional {
    fn factor(&self, block: &str) -> Result<Cholesky<f64, nalgebra::Dyn>> {
        Cholesky::new(symmetrize(&self.precision))
            .ok_or_else(|| Error::SingularPrecision(block.to_string()))
    }

    pub fn mean(&self) -> Result<Vector> {
        Ok(self.factor("conditional mean")?.solve(&self.rhs))
    }

    pub fn covariance(&self) -> Result<Matrix> {
        Ok(self.factor("conditional covariance")?.inverse())
    }

    /// `μ + L⁻ᵀ z` with `K = L Lᵀ`.
    pub fn draw<R: Rng + ?Sized>(&self, block: &str, rng: &mut R) -> Result<Vector> {
        let chol = self.factor(block)?;
        let mean = chol.solve(&self.rhs);
        let z = std_normal_vector(mean.len(), rng);
        let dev = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::SingularPrecision(block.to_string()))?;
        Ok(mean + dev)
    }
}

/// Draw from IW(df, scale), density ∝ |Σ|^{-(df+p+1)/2} exp(-tr(scale Σ⁻¹)/2),
/// via the Bartlett decomposition of the Wishart(df, scale⁻¹) precision.
pub fn inverse_wishart<R: Rng + ?Sized>(df: f64, scale: &Matrix, rng: &mut R) -> Result<Matrix> {
    let p = scale.nrows();
    if df <= (p as f64) - 1.0 {
        return Err(Error::OutOfSupport(format!(
            "inverse-Wishart df {df} must exceed dimension minus one ({p})"
        )));
    }
    let scale_inv = spd_inverse(scale, "inverse-Wishart scale")?;
    let l = cholesky(&scale_inv, "inverse-Wishart scale inverse")?.l();
    let mut a = Matrix::zeros(p, p);
    for i in 0..p {
        let chi = ChiSquared::new(df - i as f64)
            .map_err(|e| Error::OutOfSupport(e.to_string()))?
            .sample(rng);
        a[(i, i)] = chi.sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = l * a;
    let precision = &la * la.transpose();
    spd_inverse(&precision, "Wishart draw")
}
