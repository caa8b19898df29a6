//! Regression designs that isolate one predictor factor:
//! `B̃ᵀ y = D_k(y) θ_k` with `θ_4 = vec(B4ᵀ)`, `θ_5 = vec(B5)`, `θ_6 = vec(B6)`.

use crate::decomp::TuckerFactors;
use crate::tensor::{mode_multiply, unfold, DenseTensor, Matrix};

/// `R5R6 × R5R6` permutation with `P[k, q] = 1` iff `k = r5·R6 + r6` and
/// `q = r6·R5 + r5` (0-based).
pub fn commutation_matrix(r5: usize, r6: usize) -> Matrix {
    let n = r5 * r6;
    let mut p = Matrix::zeros(n, n);
    for a in 0..r5 {
        for b in 0..r6 {
            p[(a * r6 + b, b * r5 + a)] = 1.0;
        }
    }
    p
}

/// `(Q_(0)ᵀ ⊗ I_{R4})` with `Q = Y ×1 B5ᵀ ×2 B6ᵀ`.
pub fn design_b4(f: &TuckerFactors, y: &DenseTensor) -> Matrix {
    let q = mode_multiply(y, &f.factors[4].transpose(), 1).expect("dims checked");
    let q = mode_multiply(&q, &f.factors[5].transpose(), 2).expect("dims checked");
    let q0 = unfold(&q, 0).expect("order three");
    let r4 = f.factors[3].ncols();
    q0.transpose().kronecker(&Matrix::identity(r4, r4))
}

/// `(Pᵀ(I_{R5} ⊗ B6ᵀ) ⊗ B4ᵀ)(I_{R5} ⊗ Y_(1)ᵀ)`, where `Y_(1)` is the mode-1
/// unfolding.
pub fn design_b5(f: &TuckerFactors, y: &DenseTensor) -> Matrix {
    let (b4, b5, b6) = (&f.factors[3], &f.factors[4], &f.factors[5]);
    let (r5, r6) = (b5.ncols(), b6.ncols());
    let p = commutation_matrix(r5, r6);
    let left = (p.transpose() * Matrix::identity(r5, r5).kronecker(&b6.transpose()))
        .kronecker(&b4.transpose());
    let y1t = unfold(y, 1).expect("order three").transpose();
    // Block-diagonal right factor: multiply each column block of `left` by `Y_(1)ᵀ`.
    let rows = left.nrows();
    let blk = y1t.nrows();
    let i2 = y1t.ncols();
    let mut out = Matrix::zeros(rows, r5 * i2);
    for r in 0..r5 {
        let part = left.columns(r * blk, blk) * &y1t;
        out.columns_mut(r * i2, i2).copy_from(&part);
    }
    out
}

/// `I_{R6} ⊗ (B5ᵀ ⊗ B4ᵀ) Y_(2)ᵀ`.
pub fn design_b6(f: &TuckerFactors, y: &DenseTensor) -> Matrix {
    let v = mode_multiply(y, &f.factors[3].transpose(), 0).expect("dims checked");
    let v = mode_multiply(&v, &f.factors[4].transpose(), 1).expect("dims checked");
    let block = unfold(&v, 2).expect("order three").transpose();
    let r6 = f.factors[5].ncols();
    Matrix::identity(r6, r6).kronecker(&block)
}

pub fn predictor_design(k: usize, f: &TuckerFactors, y: &DenseTensor) -> Matrix {
    match k {
        3 => design_b4(f, y),
        4 => design_b5(f, y),
        5 => design_b6(f, y),
        _ => panic!("predictor design is defined for factors 3..6, got {k}"),
    }
}

/// Parameter vector of factor `k` in the layout its conditional uses.
pub fn factor_to_param(k: usize, b: &Matrix) -> crate::tensor::Vector {
    if k == 3 {
        crate::tensor::vec_of(&b.transpose())
    } else {
        crate::tensor::vec_of(b)
    }
}

pub fn factor_from_param(k: usize, theta: &crate::tensor::Vector, rows: usize, rank: usize) -> Matrix {
    if k == 3 {
        crate::tensor::unvec(theta, rank, rows).transpose()
    } else {
        crate::tensor::unvec(theta, rows, rank)
    }
}

/// Position of entry `(i, r)` of factor `k` in its parameter vector.
pub fn param_index(k: usize, i: usize, r: usize, rows: usize, rank: usize) -> usize {
    if k == 3 {
        r + rank * i
    } else {
        i + rows * r
    }
}
