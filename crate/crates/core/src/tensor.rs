//! Dense column-major tensors and the multilinear kernels built on them.
//!
//! Storage follows the first-index-fastest convention, so the flat data of a
//! tensor is exactly `vec` of its mode-0 unfolding. Modes are 0-based
//! throughout the crate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::ShapeMismatch(format!(
                "dimensions must be positive, got {shape:?}"
            )));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    /// Builds a tensor by evaluating `f` at every 0-based multi-index.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let len: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            for (k, i) in idx.iter_mut().enumerate() {
                *i += 1;
                if *i < shape[k] {
                    break;
                }
                *i = 0;
            }
        }
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn from_vector(shape: &[usize], v: &Vector) -> Result<Self> {
        Self::new(shape.to_vec(), v.as_slice().to_vec())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut lin = 0;
        let mut stride = 1;
        for (i, d) in idx.iter().zip(&self.shape) {
            debug_assert!(i < d);
            lin += i * stride;
            stride *= d;
        }
        lin
    }

    pub fn multi_index(&self, mut lin: usize) -> Vec<usize> {
        self.shape
            .iter()
            .map(|&d| {
                let i = lin % d;
                lin /= d;
                i
            })
            .collect()
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.linear_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let lin = self.linear_index(idx);
        self.data[lin] = value;
    }

    /// `vec` of the tensor, identical to `vec` of the mode-0 unfolding.
    pub fn to_vector(&self) -> Vector {
        Vector::from_column_slice(&self.data)
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), self.data)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape, other.shape, "max_abs_diff on different shapes");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_mode(t: &DenseTensor, mode: usize) -> Result<()> {
    if mode >= t.order() {
        return Err(Error::ModeOutOfRange {
            mode,
            order: t.order(),
        });
    }
    Ok(())
}

/// Splits the shape around `mode` into (product before, dim, product after).
fn split_dims(shape: &[usize], mode: usize) -> (usize, usize, usize) {
    let left = shape[..mode].iter().product();
    let right = shape[mode + 1..].iter().product();
    (left, shape[mode], right)
}

/// Mode-`mode` matricization: the mode fibers become the columns, remaining
/// indices ordered with the lowest mode varying fastest.
pub fn unfold(t: &DenseTensor, mode: usize) -> Result<Matrix> {
    check_mode(t, mode)?;
    let (left, mid, right) = split_dims(&t.shape, mode);
    let mut out = Matrix::zeros(mid, left * right);
    for r in 0..right {
        for i in 0..mid {
            let src = left * (i + mid * r);
            for l in 0..left {
                out[(i, l + left * r)] = t.data[src + l];
            }
        }
    }
    Ok(out)
}

/// Inverse of [`unfold`].
pub fn fold(m: &Matrix, mode: usize, shape: &[usize]) -> Result<DenseTensor> {
    if mode >= shape.len() {
        return Err(Error::ModeOutOfRange {
            mode,
            order: shape.len(),
        });
    }
    let (left, mid, right) = split_dims(shape, mode);
    if m.nrows() != mid || m.ncols() != left * right {
        return Err(Error::ShapeMismatch(format!(
            "fold: matrix {}x{} does not match shape {shape:?} at mode {mode}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut out = DenseTensor::zeros(shape);
    for r in 0..right {
        for i in 0..mid {
            let dst = left * (i + mid * r);
            for l in 0..left {
                out.data[dst + l] = m[(i, l + left * r)];
            }
        }
    }
    Ok(out)
}

/// Generalized inner product: contracts the trailing modes of `x` against `y`.
pub fn gen_inner(x: &DenseTensor, y: &DenseTensor) -> Result<DenseTensor> {
    let n = x.order();
    let m = y.order();
    if m > n || x.shape[n - m..] != y.shape[..] {
        return Err(Error::ShapeMismatch(format!(
            "gen_inner: trailing dims of {:?} do not match {:?}",
            x.shape, y.shape
        )));
    }
    let lead_shape = x.shape[..n - m].to_vec();
    let lead: usize = lead_shape.iter().product();
    let mut out = vec![0.0; lead];
    for (k, &yk) in y.data.iter().enumerate() {
        if yk == 0.0 {
            continue;
        }
        let col = &x.data[lead * k..lead * (k + 1)];
        for (o, &xv) in out.iter_mut().zip(col) {
            *o += xv * yk;
        }
    }
    Ok(DenseTensor {
        shape: lead_shape,
        data: out,
    })
}

/// n-mode product `t ×_mode m`: replaces dimension `mode` by `m.nrows()`.
pub fn mode_multiply(t: &DenseTensor, m: &Matrix, mode: usize) -> Result<DenseTensor> {
    check_mode(t, mode)?;
    let (left, mid, right) = split_dims(&t.shape, mode);
    if m.ncols() != mid {
        return Err(Error::ShapeMismatch(format!(
            "mode_multiply: matrix has {} columns, mode {mode} has dim {mid}",
            m.ncols()
        )));
    }
    let rows = m.nrows();
    let mut shape = t.shape.clone();
    shape[mode] = rows;
    if left == 1 {
        let x = nalgebra::DMatrixView::from_slice(&t.data, mid, right);
        let out = m * x;
        return Ok(DenseTensor {
            shape,
            data: out.as_slice().to_vec(),
        });
    }
    let coef: Vec<f64> = (0..rows).flat_map(|j| (0..mid).map(move |i| (j, i))).map(|(j, i)| m[(j, i)]).collect();
    let mut data = vec![0.0; left * rows * right];
    for (src, dst) in t.data.chunks_exact(left * mid).zip(data.chunks_exact_mut(left * rows)) {
        for (d, c) in dst.chunks_exact_mut(left).zip(coef.chunks_exact(mid)) {
            for (s, &c) in src.chunks_exact(left).zip(c) {
                if c != 0.0 {
                    for (x, &y) in d.iter_mut().zip(s) {
                        *x += c * y;
                    }
                }
            }
        }
    }
    Ok(DenseTensor { shape, data })
}

/// `unfold(a, mode) · unfold(b, mode)ᵀ` without forming either unfolding.
/// The two tensors must agree on every mode but `mode`.
pub fn mode_gram(a: &DenseTensor, b: &DenseTensor, mode: usize) -> Result<Matrix> {
    check_mode(a, mode)?;
    check_mode(b, mode)?;
    let (left, ma, right) = split_dims(&a.shape, mode);
    let (lb, mb, rb) = split_dims(&b.shape, mode);
    if a.order() != b.order() || left != lb || right != rb {
        return Err(Error::ShapeMismatch(format!(
            "mode_gram: {:?} and {:?} differ off mode {mode}",
            a.shape, b.shape
        )));
    }
    if left == 1 {
        let x = nalgebra::DMatrixView::from_slice(&a.data, ma, right);
        let y = nalgebra::DMatrixView::from_slice(&b.data, mb, right);
        return Ok(x * y.transpose());
    }
    let mut out = vec![0.0; ma * mb];
    for (sa, sb) in a.data.chunks_exact(left * ma).zip(b.data.chunks_exact(left * mb)) {
        for (j, fb) in sb.chunks_exact(left).enumerate() {
            for (i, fa) in sa.chunks_exact(left).enumerate() {
                out[i + ma * j] += fa.iter().zip(fb).map(|(x, y)| x * y).sum::<f64>();
            }
        }
    }
    Ok(Matrix::from_vec(ma, mb, out))
}

/// Applies one matrix per listed mode, in order.
pub fn multi_mode_multiply(t: &DenseTensor, ops: &[(usize, &Matrix)]) -> Result<DenseTensor> {
    let mut out = t.clone();
    for &(mode, m) in ops {
        out = mode_multiply(&out, m, mode)?;
    }
    Ok(out)
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Kronecker product of a list, left to right: `ms[0] ⊗ ms[1] ⊗ ...`.
pub fn kron_all(ms: &[&Matrix]) -> Matrix {
    let mut it = ms.iter();
    let first = match it.next() {
        Some(m) => (*m).clone(),
        None => return Matrix::identity(1, 1),
    };
    it.fold(first, |acc, m| acc.kronecker(*m))
}

pub fn frobenius_norm(t: &DenseTensor) -> f64 {
    t.data.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn vec_of(m: &Matrix) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Matrix {
    Matrix::from_column_slice(rows, cols, v.as_slice())
}
