//! Tucker and CP representations of the coefficient tensor, HOSVD
//! identification, and the sign/projection conventions used to report factors.


use crate::error::{Error, Result};
use crate::tensor::{mode_multiply, unfold, DenseTensor, Matrix};

/// `⟦core; B_0, ..., B_{N-1}⟧`, factor `k` of shape `dims[k] × ranks[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TuckerFactors {
    pub core: DenseTensor,
    pub factors: Vec<Matrix>,
}

impl TuckerFactors {
    pub fn new(core: DenseTensor, factors: Vec<Matrix>) -> Result<Self> {
        if core.order() != factors.len() {
            return Err(Error::ShapeMismatch(format!(
                "core of order {} with {} factor matrices",
                core.order(),
                factors.len()
            )));
        }
        for (k, (b, &r)) in factors.iter().zip(core.shape()).enumerate() {
            if b.ncols() != r {
                return Err(Error::ShapeMismatch(format!(
                    "factor {k} has {} columns, core mode {k} has {r}",
                    b.ncols()
                )));
            }
            if r > b.nrows() {
                return Err(Error::RankExceedsDimension {
                    mode: k,
                    rank: r,
                    dim: b.nrows(),
                });
            }
        }
        Ok(Self { core, factors })
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|b| b.nrows()).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.core.shape().to_vec()
    }
}

/// Sum of `rank` outer products; factor `k` is `dims[k] × rank`.
#[derive(Clone, Debug, PartialEq)]
pub struct CpFactors {
    pub factors: Vec<Matrix>,
}

impl CpFactors {
    pub fn new(factors: Vec<Matrix>) -> Result<Self> {
        let rank = factors.first().map(|b| b.ncols()).unwrap_or(0);
        if factors.iter().any(|b| b.ncols() != rank) {
            return Err(Error::ShapeMismatch(
                "CP factors must share a common rank".into(),
            ));
        }
        Ok(Self { factors })
    }

    pub fn rank(&self) -> usize {
        self.factors.first().map(|b| b.ncols()).unwrap_or(0)
    }

    /// Tucker form with a superdiagonal core of ones.
    pub fn to_tucker(&self) -> TuckerFactors {
        let r = self.rank();
        let core = superdiagonal_core(self.factors.len(), r);
        TuckerFactors {
            core,
            factors: self.factors.clone(),
        }
    }
}

pub fn superdiagonal_core(order: usize, rank: usize) -> DenseTensor {
    let shape = vec![rank; order];
    DenseTensor::from_fn(&shape, |idx| {
        if idx.iter().all(|&i| i == idx[0]) {
            1.0
        } else {
            0.0
        }
    })
}

pub fn tucker_reconstruct(f: &TuckerFactors) -> DenseTensor {
    let mut out = f.core.clone();
    for (k, b) in f.factors.iter().enumerate() {
        out = mode_multiply(&out, b, k).expect("factor shapes validated on construction");
    }
    out
}

pub fn cp_reconstruct(f: &CpFactors) -> DenseTensor {
    let dims: Vec<usize> = f.factors.iter().map(|b| b.nrows()).collect();
    let mut out = DenseTensor::zeros(&dims);
    for r in 0..f.rank() {
        // Outer product built up mode by mode over the flat column-major layout.
        let mut acc = vec![1.0];
        for b in &f.factors {
            let col = b.column(r);
            let mut next = Vec::with_capacity(acc.len() * col.len());
            for &c in col.iter() {
                next.extend(acc.iter().map(|a| a * c));
            }
            acc = next;
        }
        for (o, a) in out.data_mut().iter_mut().zip(acc) {
            *o += a;
        }
    }
    out
}

/// Mode-`i` unfolding of the reconstructed tensor computed as
/// `B_i G_(i) (B_{N-1} ⊗ ... ⊗ B_{i+1} ⊗ B_{i-1} ⊗ ... ⊗ B_0)ᵀ`.
pub fn coeff_unfold(f: &TuckerFactors, i: usize) -> Result<Matrix> {
    if i >= f.order() {
        return Err(Error::ModeOutOfRange {
            mode: i,
            order: f.order(),
        });
    }
    let g = unfold(&f.core, i)?;
    let rest = complement_kron(&f.factors, i);
    Ok(&f.factors[i] * g * rest.transpose())
}

/// Kronecker product of all factors except `skip`, highest mode first.
pub fn complement_kron(factors: &[Matrix], skip: usize) -> Matrix {
    let mut acc = Matrix::identity(1, 1);
    for k in (0..factors.len()).rev() {
        if k != skip {
            acc = acc.kronecker(&factors[k]);
        }
    }
    acc
}

/// Leading `rank` eigenvectors of a symmetric PSD matrix, eigenvalues descending.
/// Leading `rank` left singular vectors of `x`. Wide unfoldings are reduced to
/// the square factor `Rᵀ` of `xᵀ = QR` first; the left singular vectors agree.
fn leading_left_singular(x: Matrix, rank: usize) -> Matrix {
    let small = if x.ncols() > x.nrows() { x.transpose().qr().r().transpose() } else { x };
    let svd = small.svd(true, false);
    let u_all = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut u = Matrix::zeros(u_all.nrows(), rank);
    for (c, &k) in order.iter().take(rank).enumerate() {
        u.set_column(c, &u_all.column(k));
    }
    u
}

/// Truncated higher-order SVD: per-mode leading left singular vectors and the
/// core obtained by projecting `t` onto them.
pub fn hosvd(t: &DenseTensor, ranks: &[usize]) -> Result<TuckerFactors> {
    if ranks.len() != t.order() {
        return Err(Error::ShapeMismatch(format!(
            "{} ranks for a tensor of order {}",
            ranks.len(),
            t.order()
        )));
    }
    let mut factors = Vec::with_capacity(t.order());
    for (k, (&r, &d)) in ranks.iter().zip(t.shape()).enumerate() {
        if r > d || r == 0 {
            return Err(Error::RankExceedsDimension {
                mode: k,
                rank: r,
                dim: d,
            });
        }
        factors.push(leading_left_singular(unfold(t, k)?, r));
    }
    let mut core = t.clone();
    for (k, u) in factors.iter().enumerate() {
        core = mode_multiply(&core, &u.transpose(), k)?;
    }
    TuckerFactors::new(core, factors)
}

/// Flips factor columns so the largest-magnitude loading is positive (lowest
/// row wins ties), compensating in the core so the tensor is unchanged.
pub fn sign_normalize(f: &TuckerFactors) -> TuckerFactors {
    let mut out = f.clone();
    for k in 0..out.order() {
        for r in 0..out.factors[k].ncols() {
            let col = out.factors[k].column(r);
            let mut best = 0;
            for i in 1..col.len() {
                if col[i].abs() > col[best].abs() {
                    best = i;
                }
            }
            if col[best] < 0.0 {
                out.factors[k].column_mut(r).neg_mut();
                flip_core_slice(&mut out.core, k, r);
            }
        }
    }
    out
}

fn flip_core_slice(core: &mut DenseTensor, mode: usize, index: usize) {
    let shape = core.shape().to_vec();
    let left: usize = shape[..mode].iter().product();
    let mid = shape[mode];
    let right: usize = shape[mode + 1..].iter().product();
    let data = core.data_mut();
    for r in 0..right {
        let start = left * (index + mid * r);
        for v in &mut data[start..start + left] {
            *v = -*v;
        }
    }
}

/// `B Bᵀ`, invariant to right-rotations of `B`.
pub fn projection_matrix(b: &Matrix) -> Matrix {
    b * b.transpose()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Unrestricted,
    Tucker,
    Cp,
}

/// Free parameters of the coefficient tensor for data dims `(I1, I2, I3)`.
/// `ranks` holds the six Tucker ranks; for CP only `ranks[0]` is read.
pub fn param_count(dims: [usize; 3], ranks: &[usize], kind: ParamKind) -> usize {
    let i: usize = dims.iter().product();
    match kind {
        ParamKind::Unrestricted => i * i,
        ParamKind::Tucker => {
            let core: usize = ranks.iter().product();
            let margins: usize = (0..6).map(|k| dims[k % 3] * ranks[k]).sum();
            core + margins
        }
        ParamKind::Cp => 2 * ranks[0] * dims.iter().sum::<usize>(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::frobenius_norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(r: usize, c: usize, rng: &mut impl Rng) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_tucker(dims: &[usize], ranks: &[usize], rng: &mut impl Rng) -> TuckerFactors {
        let core = DenseTensor::from_fn(ranks, |_| rng.random_range(-1.0..1.0));
        let factors = dims
            .iter()
            .zip(ranks)
            .map(|(&d, &r)| random_matrix(d, r, rng))
            .collect();
        TuckerFactors::new(core, factors).unwrap()
    }

    /// Explicit sum over all rank tuples of core-weighted outer products.
    fn literal_sum(f: &TuckerFactors) -> DenseTensor {
        let dims = f.dims();
        DenseTensor::from_fn(&dims, |idx| {
            let mut s = 0.0;
            for lin in 0..f.core.len() {
                let r = f.core.multi_index(lin);
                let mut p = f.core.data()[lin];
                for k in 0..idx.len() {
                    p *= f.factors[k][(idx[k], r[k])];
                }
                s += p;
            }
            s
        })
    }

    #[test]
    fn reconstruct_unit_basis() {
        let core = DenseTensor::filled(&[1; 6], 1.0);
        let mut factors = Vec::new();
        for (k, &d) in [3usize, 2, 2, 3, 2, 2].iter().enumerate() {
            let mut b = Matrix::zeros(d, 1);
            b[(k % d, 0)] = 1.0;
            factors.push(b);
        }
        let f = TuckerFactors::new(core, factors).unwrap();
        let b = tucker_reconstruct(&f);
        assert_eq!(b.data().iter().filter(|&&x| x != 0.0).count(), 1);
        assert_eq!(b.get(&[0, 1, 0, 0, 0, 1]), 1.0);
    }

    #[test]
    fn reconstruct_matches_literal_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let f = random_tucker(&[3, 2, 2, 3, 2, 2], &[2; 6], &mut rng);
        let a = tucker_reconstruct(&f);
        let b = literal_sum(&f);
        assert!(a.max_abs_diff(&b) <= 1e-12);
    }

    #[test]
    fn cp_embedding_and_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dims = [2usize, 3, 2, 2, 3, 2];
        let cp = CpFactors::new(dims.iter().map(|&d| random_matrix(d, 1, &mut rng)).collect())
            .unwrap();
        let direct = cp_reconstruct(&cp);
        let oracle = DenseTensor::from_fn(&dims, |idx| {
            (0..6).map(|k| cp.factors[k][(idx[k], 0)]).product()
        });
        assert!(direct.max_abs_diff(&oracle) <= 1e-12);

        let cp2 = CpFactors::new(dims.iter().map(|&d| random_matrix(d, 2, &mut rng)).collect())
            .unwrap();
        let via_tucker = tucker_reconstruct(&cp2.to_tucker());
        assert!(cp_reconstruct(&cp2).max_abs_diff(&via_tucker) <= 1e-12);

        let zero = CpFactors::new(dims.iter().map(|&d| Matrix::zeros(d, 2)).collect()).unwrap();
        assert_eq!(frobenius_norm(&cp_reconstruct(&zero)), 0.0);
    }

    #[test]
    fn coeff_unfold_matches_reconstruct_then_unfold() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = random_tucker(&[3, 2, 2, 3, 2, 2], &[2; 6], &mut rng);
        let b = tucker_reconstruct(&f);
        for i in 0..6 {
            let lhs = coeff_unfold(&f, i).unwrap();
            let rhs = unfold(&b, i).unwrap();
            assert!((lhs - rhs).amax() <= 1e-10);
        }
        assert!(coeff_unfold(&f, 6).is_err());
    }

    #[test]
    fn coeff_unfold_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = random_tucker(&[2, 2, 3, 2, 2, 3], &[1; 6], &mut rng);
        let g = f.core.data()[0];
        let b = &f.factors;
        let rest = b[5].kronecker(&b[4]).kronecker(&b[3]).kronecker(&b[2]).kronecker(&b[1]);
        let expected = &b[0] * rest.transpose() * g;
        assert!((coeff_unfold(&f, 0).unwrap() - expected).amax() < 1e-13);
    }

    #[test]
    fn coeff_unfold_identity_factors_permutes_core() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let ranks = [2usize, 2, 1, 2, 2, 1];
        let core = DenseTensor::from_fn(&ranks, |_| rng.random_range(-1.0..1.0));
        let factors = ranks.iter().map(|&r| Matrix::identity(r, r)).collect();
        let f = TuckerFactors::new(core.clone(), factors).unwrap();
        for i in 0..6 {
            let u = coeff_unfold(&f, i).unwrap();
            assert_eq!(u, unfold(&core, i).unwrap());
        }
    }

    #[test]
    fn hosvd_exact_low_rank_and_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let f = random_tucker(&[3, 3, 2, 3, 3, 2], &[2; 6], &mut rng);
        let b = tucker_reconstruct(&f);
        let h = hosvd(&b, &[2; 6]).unwrap();
        assert!(tucker_reconstruct(&h).max_abs_diff(&b) <= 1e-10);
        for u in &h.factors {
            let gram = u.transpose() * u;
            assert!((gram - Matrix::identity(u.ncols(), u.ncols())).amax() <= 1e-10);
        }

        let t = DenseTensor::from_fn(&[3, 2, 4], |_| rng.random_range(-1.0..1.0));
        let full = hosvd(&t, &[3, 2, 4]).unwrap();
        assert!(tucker_reconstruct(&full).max_abs_diff(&t) <= 1e-10);
        assert!(matches!(
            hosvd(&t, &[4, 2, 4]),
            Err(Error::RankExceedsDimension { mode: 0, .. })
        ));
    }

    #[test]
    fn hosvd_error_non_increasing_in_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let t = DenseTensor::from_fn(&[4, 3, 3], |_| rng.random_range(-1.0..1.0));
        for mode in 0..3 {
            let mut prev = f64::INFINITY;
            for r in 1..=t.shape()[mode] {
                let mut ranks = vec![2, 2, 2];
                ranks[mode] = r.min(t.shape()[mode]);
                let h = hosvd(&t, &ranks).unwrap();
                let err = frobenius_norm(&tucker_reconstruct(&h).zip_with(&t, |a, b| a - b).unwrap());
                assert!(err <= prev + 1e-12);
                prev = err;
            }
        }
    }

    #[test]
    fn sign_normalize_examples() {
        let core = DenseTensor::new(vec![2, 1], vec![1.5, -0.5]).unwrap();
        let b0 = Matrix::from_column_slice(2, 2, &[-3.0, 1.0, 0.2, 0.9]);
        let b1 = Matrix::from_column_slice(2, 1, &[2.0, -1.0]);
        let f = TuckerFactors::new(core, vec![b0, b1]).unwrap();
        let n = sign_normalize(&f);
        assert_eq!(n.factors[0].column(0).as_slice(), &[3.0, -1.0]);
        assert_eq!(n.factors[0].column(1).as_slice(), &[0.2, 0.9]);
        assert_eq!(n.factors[1], f.factors[1]);
        assert!(tucker_reconstruct(&n).max_abs_diff(&tucker_reconstruct(&f)) <= 1e-12);
        // Tie in magnitude: the lower row decides.
        let tie = TuckerFactors::new(
            DenseTensor::filled(&[1], 1.0),
            vec![Matrix::from_column_slice(2, 1, &[-1.0, 1.0])],
        )
        .unwrap();
        assert_eq!(sign_normalize(&tie).factors[0].as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn projection_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let q = nalgebra::linalg::QR::new(random_matrix(5, 2, &mut rng)).q();
        let p = projection_matrix(&q);
        assert!((&p * &p - &p).amax() < 1e-10);
        let rot = nalgebra::linalg::QR::new(random_matrix(2, 2, &mut rng)).q();
        assert!((projection_matrix(&(&q * rot)) - p).amax() < 1e-10);
        assert_eq!(projection_matrix(&Matrix::zeros(3, 2)), Matrix::zeros(3, 3));
    }

    #[test]
    fn param_counts() {
        assert_eq!(param_count([20, 20, 10], &[], ParamKind::Unrestricted), 16_000_000);
        // 2^6 core entries plus 2 * 2 * (20 + 20 + 10) margin entries.
        assert_eq!(param_count([20, 20, 10], &[2; 6], ParamKind::Tucker), 64 + 200);
        assert_eq!(param_count([2, 2, 2], &[1], ParamKind::Cp), 12);
    }
}
