//! Order-four views of a series, periods along the last mode, so per-period
//! multilinear maps run as one kernel call over all periods.

use crate::decomp::TuckerFactors;
use crate::series::TensorSeries;
use crate::tensor::{mode_multiply, DenseTensor, Matrix};

use super::residuals::core_matrix;
use super::state::InterceptTrend;

/// Stacks equally shaped order-three tensors into `[I1, I2, I3, T]`.
pub fn stack(obs: &[DenseTensor]) -> DenseTensor {
    let mut shape = obs.first().map_or(vec![0, 0, 0], |o| o.shape().to_vec());
    let mut data = Vec::with_capacity(obs.iter().map(|o| o.len()).sum());
    for o in obs {
        debug_assert_eq!(o.shape(), &shape[..]);
        data.extend_from_slice(o.data());
    }
    shape.push(obs.len());
    DenseTensor::new(shape, data).expect("consistent stack")
}

pub fn unstack(t: &DenseTensor) -> Vec<DenseTensor> {
    let (slab_shape, n) = t.shape().split_at(t.order() - 1);
    let size: usize = slab_shape.iter().product();
    (0..n[0])
        .map(|s| DenseTensor::new(slab_shape.to_vec(), t.data()[s * size..(s + 1) * size].to_vec()).expect("slab"))
        .collect()
}

/// Scales slab `s` (last mode) by `w[s]`.
pub fn scale_slabs(t: &DenseTensor, w: &[f64]) -> DenseTensor {
    let n = *t.shape().last().expect("non-empty shape");
    assert_eq!(n, w.len(), "one weight per slab");
    let size = t.len() / n.max(1);
    let mut out = t.clone();
    for (slab, &c) in out.data_mut().chunks_mut(size.max(1)).zip(w) {
        slab.iter_mut().for_each(|x| *x *= c);
    }
    out
}

/// Applies matrix `ms[j]` along mode `j` for each `j` in `modes`.
pub fn multiply_modes(t: &DenseTensor, ms: &[&Matrix; 3], modes: impl IntoIterator<Item = usize>) -> DenseTensor {
    let mut out: Option<DenseTensor> = None;
    for j in modes {
        out = Some(mode_multiply(out.as_ref().unwrap_or(t), ms[j], j).expect("dims checked"));
    }
    out.unwrap_or_else(|| t.clone())
}

/// `Y_t ×0 B4ᵀ ×1 B5ᵀ ×2 B6ᵀ` for every slab.
pub fn predictor_factors(f: &TuckerFactors, y: &DenseTensor) -> DenseTensor {
    let bt: Vec<Matrix> = (3..6).map(|k| f.factors[k].transpose()).collect();
    multiply_modes(y, &[&bt[0], &bt[1], &bt[2]], 0..3)
}

/// `⟨G, F_t⟩` for every slab: one `G̃ F` product.
pub fn apply_core(f: &TuckerFactors, fs: &DenseTensor) -> DenseTensor {
    let g = core_matrix(f);
    let t = *fs.shape().last().expect("stacked");
    let x = nalgebra::DMatrixView::from_slice(fs.data(), g.ncols(), t);
    let z = &g * x;
    let r = f.ranks();
    DenseTensor::new(vec![r[0], r[1], r[2], t], z.as_slice().to_vec()).expect("core shape")
}

/// `⟨B, Y_t⟩` for every slab.
pub fn fitted(f: &TuckerFactors, y: &DenseTensor) -> DenseTensor {
    let z = apply_core(f, &predictor_factors(f, y));
    multiply_modes(&z, &[&f.factors[0], &f.factors[1], &f.factors[2]], 0..3)
}

/// `Y_0..Y_{T−1}`.
pub fn lagged(data: &TensorSeries) -> DenseTensor {
    stack(&data.obs()[..data.t_len()])
}

/// `Y_t − A_t`, `t = 1..T`.
pub fn demeaned(data: &TensorSeries, intercept: &InterceptTrend) -> DenseTensor {
    let mut out = stack(&data.obs()[1..]);
    let n = intercept.a0.len();
    for (i, slab) in out.data_mut().chunks_exact_mut(n).enumerate() {
        let t = (i + 1) as f64;
        match &intercept.a1 {
            None => slab.iter_mut().zip(intercept.a0.data()).for_each(|(y, a)| *y -= a),
            Some(a1) => slab
                .iter_mut()
                .zip(intercept.a0.data().iter().zip(a1.data()))
                .for_each(|(y, (a, b))| *y -= a + b * t),
        }
    }
    out
}

/// `E_t = Y_t − A_t − ⟨B, Y_{t−1}⟩`, `t = 1..T`.
pub fn residuals(data: &TensorSeries, f: &TuckerFactors, intercept: &InterceptTrend) -> DenseTensor {
    let mut e = demeaned(data, intercept);
    let fit = fitted(f, &lagged(data));
    e.data_mut().iter_mut().zip(fit.data()).for_each(|(x, y)| *x -= y);
    e
}

/// `vec(E_t)ᵀ (Σ3 ⊗ Σ2 ⊗ Σ1)⁻¹ vec(E_t)` for every slab.
pub fn quad_forms(e: &DenseTensor, inv: &[Matrix; 3]) -> Vec<f64> {
    let w = multiply_modes(e, &[&inv[0], &inv[1], &inv[2]], 0..3);
    let n = *e.shape().last().expect("stacked");
    let size = e.len() / n.max(1);
    e.data()
        .chunks(size.max(1))
        .zip(w.data().chunks(size.max(1)))
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum())
        .collect()
}
