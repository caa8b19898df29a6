//! Response and predictor factor series induced by identified Tucker
//! loadings, and the projection matrices that summarize loading strength.

use std::fmt::Write;

use crate::decomp::{projection_matrix, TuckerFactors};
use crate::error::{Error, Result};
use crate::model::stacked::{demeaned, lagged, multiply_modes};
use crate::model::state::InterceptTrend;
use crate::series::TensorSeries;
use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct FactorSeries {
    /// `resp_r1_r2_r3`, `r1` fastest.
    pub response_labels: Vec<String>,
    /// `T × R1R2R3`, standardized per column.
    pub response: Matrix,
    pub predictor_labels: Vec<String>,
    /// `T × R4R5R6`, standardized per column.
    pub predictor: Matrix,
    /// `B_k B_kᵀ` for `k = 1..6`.
    pub projections: Vec<Matrix>,
    /// Axis labels of each projection's rows and columns.
    pub projection_labels: Vec<Vec<String>>,
}

fn check(data: &TensorSeries, f: &TuckerFactors) -> Result<()> {
    let d = data.dims();
    let want = [d[0], d[1], d[2], d[0], d[1], d[2]];
    if f.order() != 6 || f.dims() != want {
        return Err(Error::ShapeMismatch(format!(
            "identified factors have dims {:?}, data needs {want:?}",
            f.dims()
        )));
    }
    Ok(())
}

fn rows_by_period(t: &crate::tensor::DenseTensor) -> Matrix {
    let n = *t.shape().last().expect("stacked");
    let r = t.len() / n.max(1);
    Matrix::from_column_slice(r, n, t.data()).transpose()
}

/// `B̃mᵀ vec(Y_t − A_t)` for `t = 1..T`, one row per period.
pub fn response_factors(data: &TensorSeries, f: &TuckerFactors, intercept: &InterceptTrend) -> Result<Matrix> {
    check(data, f)?;
    let bt: Vec<Matrix> = (0..3).map(|k| f.factors[k].transpose()).collect();
    let z = multiply_modes(&demeaned(data, intercept), &[&bt[0], &bt[1], &bt[2]], 0..3);
    Ok(rows_by_period(&z))
}

/// `B̃ᵀ vec(Y_{t−1})` for `t = 1..T`, one row per period.
pub fn predictor_factors(data: &TensorSeries, f: &TuckerFactors) -> Result<Matrix> {
    check(data, f)?;
    let bt: Vec<Matrix> = (3..6).map(|k| f.factors[k].transpose()).collect();
    let z = multiply_modes(&lagged(data), &[&bt[0], &bt[1], &bt[2]], 0..3);
    Ok(rows_by_period(&z))
}

/// Columns rescaled to mean 0 and sample standard deviation 1; constant
/// columns are only centered.
pub fn standardize_columns(m: &Matrix) -> Matrix {
    let n = m.nrows() as f64;
    let mut out = m.clone();
    for mut c in out.column_iter_mut() {
        let mean = c.sum() / n;
        c.add_scalar_mut(-mean);
        let sd = (c.norm_squared() / (n - 1.0)).sqrt();
        if sd > 0.0 && sd.is_finite() {
            c /= sd;
        }
    }
    out
}

fn labels(prefix: &str, ranks: &[usize]) -> Vec<String> {
    let mut out = Vec::new();
    for c in 0..ranks[2] {
        for b in 0..ranks[1] {
            for a in 0..ranks[0] {
                out.push(format!("{prefix}_{}_{}_{}", a + 1, b + 1, c + 1));
            }
        }
    }
    out
}

pub fn extract_factors(data: &TensorSeries, identified: &TuckerFactors, intercept: &InterceptTrend) -> Result<FactorSeries> {
    let ranks = identified.ranks();
    if data.t_len() < 2 {
        return Err(Error::TooShort("factor standardization needs two periods".into()));
    }
    if intercept.a0.shape() != data.dims() {
        return Err(Error::ShapeMismatch("intercept shape differs from the data".into()));
    }
    let response = standardize_columns(&response_factors(data, identified, intercept)?);
    let predictor = standardize_columns(&predictor_factors(data, identified)?);
    Ok(FactorSeries {
        response_labels: labels("resp", &ranks[..3]),
        response,
        predictor_labels: labels("pred", &ranks[3..]),
        predictor,
        projections: identified.factors.iter().map(projection_matrix).collect(),
        projection_labels: (0..6).map(|k| data.labels()[k % 3].clone()).collect(),
    })
}

/// Returns `±factor`, whichever is closer to `reference` in RMSE, and the
/// sign used. Equal distances (`factor · reference = 0`) keep `+`.
pub fn align_sign(factor: &[f64], reference: &[f64]) -> (Vec<f64>, f64) {
    let dot: f64 = factor.iter().zip(reference).map(|(a, b)| a * b).sum();
    let s = if dot < 0.0 { -1.0 } else { 1.0 };
    (factor.iter().map(|x| s * x).collect(), s)
}

impl FactorSeries {
    pub fn n_factors(&self) -> usize {
        self.response.ncols()
    }

    /// `t,resp_…,pred_…` with `t = 1..T`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for l in self.response_labels.iter().chain(&self.predictor_labels) {
            s.push(',');
            s.push_str(l);
        }
        s.push('\n');
        for t in 0..self.response.nrows() {
            let _ = write!(s, "{}", t + 1);
            for v in self.response.row(t).iter().chain(self.predictor.row(t).iter()) {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    /// `mode,row,col,value` over every projection matrix, rows and columns
    /// named by axis label.
    pub fn projections_csv(&self) -> String {
        let mut s = String::from("mode,row,col,value\n");
        for (k, (p, l)) in self.projections.iter().zip(&self.projection_labels).enumerate() {
            for j in 0..p.ncols() {
                for i in 0..p.nrows() {
                    let _ = writeln!(s, "{},{},{},{}", k + 1, l[i], l[j], p[(i, j)]);
                }
            }
        }
        s
    }
}
