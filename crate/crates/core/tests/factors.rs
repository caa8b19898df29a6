use btar::decomp::{hosvd, sign_normalize, tucker_reconstruct, TuckerFactors};
use btar::factors::*;
use btar::model::state::InterceptTrend;
use btar::series::TensorSeries;
use btar::tensor::{kron_all, mode_multiply, unfold, DenseTensor, Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform(shape: &[usize], rng: &mut impl Rng) -> DenseTensor {
    DenseTensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

fn identified(dims: [usize; 3], ranks: [usize; 6], rng: &mut impl Rng) -> TuckerFactors {
    let shape = [dims[0], dims[1], dims[2], dims[0], dims[1], dims[2]];
    sign_normalize(&hosvd(&uniform(&shape, rng), &ranks).unwrap())
}

fn series(dims: [usize; 3], t: usize, rng: &mut impl Rng) -> TensorSeries {
    TensorSeries::new(dims, (0..=t).map(|_| uniform(&dims, rng)).collect()).unwrap()
}

fn random_orthogonal(n: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)).qr().q()
}

/// `sin` of the largest principal angle between the column spaces.
fn max_angle_sin(a: &Matrix, b: &Matrix) -> f64 {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let resid = &qb - &qa * (qa.transpose() * &qb);
    resid.singular_values().max()
}

#[test]
fn sixty_four_factors_at_rank_four() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dims = [5, 4, 4];
    let f = identified(dims, [4; 6], &mut rng);
    let data = series(dims, 12, &mut rng);
    let fs = extract_factors(&data, &f, &InterceptTrend::constant(DenseTensor::zeros(&dims))).unwrap();
    assert_eq!(fs.n_factors(), 64);
    assert_eq!(fs.predictor.ncols(), 64);
    assert_eq!(fs.response.nrows(), 12);
    assert_eq!(fs.response_labels[0], "resp_1_1_1");
    assert_eq!(fs.response_labels[1], "resp_2_1_1");
    assert_eq!(fs.predictor_labels[63], "pred_4_4_4");
    let header = fs.to_csv().lines().next().unwrap().split(',').count();
    assert_eq!(header, 1 + 128);
}

#[test]
fn vectorized_and_matricized_forms_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dims = [4, 3, 2];
    let f = identified(dims, [2, 2, 1, 3, 1, 2], &mut rng);
    let data = series(dims, 6, &mut rng);
    let a = InterceptTrend {
        a0: uniform(&dims, &mut rng),
        a1: Some(uniform(&dims, &mut rng)),
    };
    let resp = response_factors(&data, &f, &a).unwrap();
    let pred = predictor_factors(&data, &f).unwrap();
    let bm = kron_all(&[&f.factors[2], &f.factors[1], &f.factors[0]]);
    let bp = kron_all(&[&f.factors[5], &f.factors[4], &f.factors[3]]);
    for t in 1..=6 {
        let d = data.y(t).zip_with(&a.at(t), |x, y| x - y).unwrap();
        // vec(B1ᵀ D_(1) (B3 ⊗ B2)) against (B3 ⊗ B2 ⊗ B1)ᵀ vec(D).
        let mat = f.factors[0].transpose() * unfold(&d, 0).unwrap() * kron_all(&[&f.factors[2], &f.factors[1]]);
        let vec_form = bm.transpose() * d.to_vector();
        let got = resp.row(t - 1).transpose();
        assert!((Vector::from_column_slice(mat.as_slice()) - &got).amax() < 1e-10);
        assert!((vec_form - &got).amax() < 1e-10);
        let p = bp.transpose() * data.y(t - 1).to_vector();
        assert!((p - pred.row(t - 1).transpose()).amax() < 1e-10);
    }
}

#[test]
fn orthonormal_loadings_recover_coordinates() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dims = [4, 3, 3];
    let ranks = [2, 2, 2, 1, 1, 1];
    let f = identified(dims, ranks, &mut rng);
    let bm = kron_all(&[&f.factors[2], &f.factors[1], &f.factors[0]]);
    assert!((bm.transpose() * &bm - Matrix::identity(8, 8)).amax() < 1e-12);
    let a0 = uniform(&dims, &mut rng);
    let coords: Vec<Vector> = (0..5).map(|_| Vector::from_fn(8, |_, _| rng.random_range(-1.0..1.0))).collect();
    let mut obs = vec![uniform(&dims, &mut rng)];
    for c in &coords {
        let y = bm.clone() * c + a0.to_vector();
        obs.push(DenseTensor::from_vector(&dims, &y).unwrap());
    }
    let data = TensorSeries::new(dims, obs).unwrap();
    let resp = response_factors(&data, &f, &InterceptTrend::constant(a0.clone())).unwrap();
    for (t, c) in coords.iter().enumerate() {
        let r = resp.row(t).transpose();
        assert!((&r - c).amax() < 1e-12);
        // Projecting the coordinates back reproduces y_t − a_t.
        let back = &bm * r;
        let d = data.y(t + 1).to_vector() - a0.to_vector();
        assert!((back - d).amax() < 1e-12);
    }
}

#[test]
fn factor_subspaces_and_projections_are_rotation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dims = [4, 3, 3];
    let f = identified(dims, [2, 3, 2, 2, 2, 3], &mut rng);
    let data = series(dims, 20, &mut rng);
    let a = InterceptTrend::constant(uniform(&dims, &mut rng));
    let base = extract_factors(&data, &f, &a).unwrap();
    for k in 0..6 {
        let q = random_orthogonal(f.ranks()[k], &mut rng);
        let mut g = f.clone();
        g.factors[k] = &f.factors[k] * &q;
        g.core = mode_multiply(&f.core, &q.transpose(), k).unwrap();
        assert!(tucker_reconstruct(&g).max_abs_diff(&tucker_reconstruct(&f)) < 1e-12);
        let rot = extract_factors(&data, &g, &a).unwrap();
        assert!(max_angle_sin(&base.response, &rot.response) < 1e-8, "mode {k} response");
        assert!(max_angle_sin(&base.predictor, &rot.predictor) < 1e-8, "mode {k} predictor");
        for (p, r) in base.projections.iter().zip(&rot.projections) {
            assert!((p - r).amax() < 1e-10);
        }
    }
}

#[test]
fn factors_are_standardized_and_labels_carried() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dims = [2, 2, 1];
    let f = identified(dims, [1, 2, 1, 2, 1, 1], &mut rng);
    let mut data = series(dims, 30, &mut rng);
    data.set_labels([
        vec!["USA".into(), "JPN".into()],
        vec!["CHN".into(), "DEU".into()],
        vec!["steel".into()],
    ])
    .unwrap();
    let fs = extract_factors(&data, &f, &InterceptTrend::constant(DenseTensor::zeros(&dims))).unwrap();
    for c in fs.response.column_iter().chain(fs.predictor.column_iter()) {
        let m = c.mean();
        let sd = ((c.add_scalar(-m)).norm_squared() / 29.0).sqrt();
        assert!(m.abs() < 1e-12 && (sd - 1.0).abs() < 1e-12);
    }
    let csv = fs.projections_csv();
    assert!(csv.lines().any(|l| l.starts_with("1,USA,JPN,")));
    assert!(csv.lines().any(|l| l.starts_with("5,DEU,CHN,")));
    assert!(csv.lines().any(|l| l.starts_with("3,steel,steel,")));
    assert_eq!(csv.lines().count(), 1 + 2 * (4 + 4 + 1));
}

#[test]
fn mismatched_factors_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let f = identified([3, 2, 2], [1; 6], &mut rng);
    let data = series([2, 2, 2], 5, &mut rng);
    let a = InterceptTrend::constant(DenseTensor::zeros(&[2, 2, 2]));
    assert!(extract_factors(&data, &f, &a).is_err());
    assert!(response_factors(&data, &f, &a).is_err());
}

#[test]
fn sign_alignment() {
    let f = [1.0, -2.0, 0.5];
    assert_eq!(align_sign(&f, &f), (f.to_vec(), 1.0));
    let neg: Vec<f64> = f.iter().map(|x| -x).collect();
    assert_eq!(align_sign(&f, &neg), (neg.clone(), -1.0));
    // Orthogonal reference: both signs are equally distant and + is kept.
    assert_eq!(align_sign(&f, &[2.0, 1.0, 0.0]).1, 1.0);
    let noisy = [-0.9, 2.1, -0.4];
    assert_eq!(align_sign(&f, &noisy).1, -1.0);
}
