mod common;

use btar::decomp::{hosvd, tucker_reconstruct, TuckerFactors};
use btar::model::simulate::simulate;
use btar::model::state::{ModelSpec, Regime, VolLatent, VolatilityState};
use btar::sampler::shrinkage::{sample_eta, MhCounter};
use btar::sampler::{identify, run_gibbs, Draw, PosteriorDraws, SamplerConfig};
use btar::tensor::{frobenius_norm, DenseTensor, Matrix};
use btar::Error;
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

fn small_problem(seed: u64, regime: Regime) -> (ModelSpec, btar::series::TensorSeries) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = ModelSpec {
        regime,
        ..ModelSpec::new([2, 2, 2], [1; 6])
    };
    let mut state = random_state(&spec, 30, &mut rng);
    state.factors.factors.iter_mut().for_each(|b| *b *= 0.4);
    state.vol = VolatilityState::homoskedastic(30);
    let data = simulate(&state, 30, &DenseTensor::zeros(&[2, 2, 2]), &mut rng).unwrap();
    (spec, data)
}

#[test]
fn burn_plus_one_keeps_one_draw() {
    let (spec, data) = small_problem(1, Regime::Homoskedastic);
    let cfg = SamplerConfig {
        n_iter: 11,
        n_burn: 10,
        thin: 1,
        ..SamplerConfig::new(spec)
    };
    assert_eq!(run_gibbs(&data, &cfg).unwrap().draws.len(), 1);
    let cfg = SamplerConfig {
        n_iter: 30,
        n_burn: 10,
        thin: 3,
        ..cfg
    };
    assert_eq!(run_gibbs(&data, &cfg).unwrap().draws.len(), cfg.n_draws());
    assert_eq!(cfg.n_draws(), 6);
}

#[test]
fn fixed_seed_is_bit_identical() {
    for regime in [Regime::Homoskedastic, Regime::Outlier, Regime::Csv] {
        let (mut spec, data) = small_problem(2, regime);
        spec.shrinkage = true;
        spec.trend = true;
        let cfg = SamplerConfig {
            n_iter: 60,
            n_burn: 20,
            seed: 5,
            ..SamplerConfig::new(spec)
        };
        let a = run_gibbs(&data, &cfg).unwrap();
        let b = run_gibbs(&data, &cfg).unwrap();
        assert_eq!(a, b);
        let c = run_gibbs(&data, &SamplerConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(a.draws, c.draws);
    }
}

#[test]
fn invalid_config_is_rejected() {
    let (spec, data) = small_problem(3, Regime::Homoskedastic);
    let bad = SamplerConfig {
        n_iter: 10,
        n_burn: 10,
        ..SamplerConfig::new(spec.clone())
    };
    assert!(matches!(run_gibbs(&data, &bad), Err(Error::Config(_))));
    let bad = SamplerConfig {
        thin: 0,
        ..SamplerConfig::new(spec.clone())
    };
    assert!(matches!(run_gibbs(&data, &bad), Err(Error::Config(_))));
    let bad = SamplerConfig::new(ModelSpec::new([2, 2, 2], [3, 1, 1, 1, 1, 1]));
    assert!(run_gibbs(&data, &bad).is_err());
}

#[test]
fn acceptance_counters_are_rates() {
    let (mut spec, data) = small_problem(4, Regime::Csv);
    spec.shrinkage = true;
    spec.ranks = [2, 1, 1, 2, 1, 1];
    let cfg = SamplerConfig {
        n_iter: 200,
        n_burn: 100,
        ..SamplerConfig::new(spec)
    };
    let d = run_gibbs(&data, &cfg).unwrap();
    for c in [d.stats.eta, d.stats.vol.h, d.stats.vol.phi] {
        assert!(c.proposed > 0 && c.accepted <= c.proposed);
        let r = c.rate().unwrap();
        assert!((0.0..=1.0).contains(&r));
    }
    assert!(d.draws.iter().all(|x| x.log_lik.is_finite()));
}

#[test]
fn normalized_draws_have_unit_average_diagonals() {
    let (spec, data) = small_problem(5, Regime::Homoskedastic);
    let cfg = SamplerConfig {
        n_iter: 40,
        n_burn: 20,
        ..SamplerConfig::new(spec)
    };
    for d in run_gibbs(&data, &cfg).unwrap().draws {
        for k in 1..3 {
            let s = &d.cov.sigma[k];
            assert!((s.trace() / s.nrows() as f64 - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn eta_step_leaves_beta_prior_invariant() {
    // Zero-row factor: the margin likelihood is flat, so the random-walk step
    // targets Beta(1, α). 50,000 independent chains started in the prior.
    let b = Matrix::zeros(0, 3);
    let alpha = 0.5;
    let beta = Beta::new(1.0, alpha).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut counter = MhCounter::default();
    let n = 50_000;
    let mut finals = vec![Vec::with_capacity(n); 2];
    let mut moved = 0usize;
    for _ in 0..n {
        let mut m = btar::model::state::ModeShrinkage::initial(3);
        m.alpha = alpha;
        m.eta = (0..2).map(|_| beta.sample(&mut rng)).collect();
        let start = m.eta.clone();
        for _ in 0..200 {
            sample_eta(&mut m, &b, 0.01, &mut counter, &mut rng);
        }
        if m.eta != start {
            moved += 1;
        }
        for r in 0..2 {
            finals[r].push(m.eta[r]);
        }
    }
    assert!(moved > n * 9 / 10);
    let cdf = |x: f64| 1.0 - (1.0 - x).powf(alpha);
    for f in &mut finals {
        f.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ks = f
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = cdf(x);
                (c - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - c).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "KS distance {ks}");
    }
}

#[test]
fn geweke_outlier_regime() {
    let spec = ModelSpec {
        regime: Regime::Outlier,
        shrinkage: true,
        ..ModelSpec::new([2, 2, 2], [1; 6])
    };
    for row in geweke(&spec, &geweke_priors(), 20, 20_000, 21) {
        println!(
            "{}: {:.4} ± {:.4} vs {:.4} ± {:.4}",
            row.name, row.marginal.0, row.marginal.1, row.successive.0, row.successive.1
        );
        assert!(row.z().abs() < 4.0, "{}: z = {:.2}", row.name, row.z());
    }
}

#[test]
fn csv_recovers_volatility_spike() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let t_len = 200;
    let spec = ModelSpec {
        regime: Regime::Csv,
        ..ModelSpec::new([3, 3, 2], [1; 6])
    };
    let mut state = random_state(&spec, t_len, &mut rng);
    state.factors.factors.iter_mut().for_each(|b| *b *= 0.3);
    state.cov = btar::model::state::ErrorCov::identity([3, 3, 2]);
    let mut h = vec![0.0; t_len];
    for t in 1..t_len {
        h[t] = 0.9 * h[t - 1] + 0.1 * rng.sample::<f64, _>(rand_distr::StandardNormal);
    }
    for (t, x) in h.iter_mut().enumerate() {
        *x += 2.5 * (-((t as f64 - t_len as f64 / 2.0).abs()) / 6.0).exp();
    }
    state.vol = VolatilityState {
        omega: vec![1.0; t_len],
        latent: VolLatent::Csv { h: h.clone(), phi: 0.9, sigma2: 0.01 },
    };
    state.vol.sync_omega();
    let data = simulate(&state, t_len, &DenseTensor::zeros(&[3, 3, 2]), &mut rng).unwrap();
    let cfg = SamplerConfig {
        n_iter: 2000,
        n_burn: 1000,
        seed: 3,
        ..SamplerConfig::new(spec)
    };
    let draws = run_gibbs(&data, &cfg).unwrap();
    let mut post = vec![0.0; t_len];
    for d in &draws.draws {
        if let VolLatent::Csv { h, .. } = &d.vol.latent {
            for (p, x) in post.iter_mut().zip(h) {
                *p += (x / 2.0).exp() / draws.draws.len() as f64;
            }
        }
    }
    let truth: Vec<f64> = h.iter().map(|x| (x / 2.0).exp()).collect();
    let r = pearson(&post, &truth);
    assert!(r > 0.8, "correlation {r}");
}

#[test]
fn outlier_regime_flags_injected_shock() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let t_len = 120;
    let spec = ModelSpec {
        regime: Regime::Outlier,
        ..ModelSpec::new([3, 3, 2], [1; 6])
    };
    let mut state = random_state(&spec, t_len, &mut rng);
    state.factors.factors.iter_mut().for_each(|b| *b *= 0.3);
    let shock = 60;
    let mut o = vec![1.0; t_len];
    o[shock] = 8.0;
    state.vol = VolatilityState {
        omega: vec![1.0; t_len],
        latent: VolLatent::Outlier { o, p_out: 0.02 },
    };
    state.vol.sync_omega();
    let data = simulate(&state, t_len, &DenseTensor::zeros(&[3, 3, 2]), &mut rng).unwrap();
    let cfg = SamplerConfig {
        n_iter: 1500,
        n_burn: 500,
        seed: 4,
        ..SamplerConfig::new(spec)
    };
    let draws = run_gibbs(&data, &cfg).unwrap();
    let n = draws.draws.len() as f64;
    let mut p = vec![0.0; t_len];
    for d in &draws.draws {
        if let VolLatent::Outlier { o, .. } = &d.vol.latent {
            for (p, x) in p.iter_mut().zip(o) {
                if *x > 1.0 {
                    *p += 1.0 / n;
                }
            }
        }
    }
    assert!(p[shock] > 0.9, "P(outlier) at shock = {}", p[shock]);
    let rest = (p.iter().sum::<f64>() - p[shock]) / (t_len - 1) as f64;
    assert!(rest < 0.2, "mean P(outlier) elsewhere = {rest}");
}

fn constant_draws(f: &TuckerFactors, spec: ModelSpec) -> PosteriorDraws {
    let dims = spec.dims;
    let draw = Draw {
        factors: f.clone(),
        intercept: btar::model::state::InterceptTrend::constant(DenseTensor::zeros(&dims)),
        cov: btar::model::state::ErrorCov::identity(dims),
        vol: VolatilityState::homoskedastic(1),
        shrink: None,
        log_lik: 0.0,
    };
    PosteriorDraws {
        spec,
        draws: vec![draw; 3],
        stats: Default::default(),
    }
}

#[test]
fn identify_recovers_exact_low_rank_tensor() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let ranks = [2, 1, 2, 2, 2, 1];
    let f = random_factors([3, 3, 2], ranks, &mut rng);
    let b = tucker_reconstruct(&f);
    let id = identify(&constant_draws(&f, ModelSpec::new([3, 3, 2], ranks)), &ranks).unwrap();
    assert!(tucker_reconstruct(&id).max_abs_diff(&b) < 1e-10);
    for (k, u) in id.factors.iter().enumerate() {
        let g = u.transpose() * u;
        assert!((g - Matrix::identity(ranks[k], ranks[k])).amax() < 1e-10);
        // Subspace agrees with the HOSVD of the tensor itself.
        let h = hosvd(&b, &ranks).unwrap();
        let p1 = u * u.transpose();
        let p2 = &h.factors[k] * h.factors[k].transpose();
        assert!((p1 - p2).amax() < 1e-8);
    }
}

#[test]
fn identify_error_is_monotone_in_ranks() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let f = random_factors([3, 2, 2], [3, 2, 2, 3, 2, 2], &mut rng);
    let draws = constant_draws(&f, ModelSpec::new([3, 2, 2], [3, 2, 2, 3, 2, 2]));
    let b = tucker_reconstruct(&f);
    let err = |r: &[usize; 6]| {
        let id = identify(&draws, r).unwrap();
        frobenius_norm(&tucker_reconstruct(&id).zip_with(&b, |x, y| x - y).unwrap())
    };
    let full = [3, 2, 2, 3, 2, 2];
    let e_full = err(&full);
    assert!(e_full < 1e-9);
    for k in 0..6 {
        for r in 1..full[k] {
            let mut smaller = full;
            smaller[k] = r;
            assert!(err(&smaller) >= e_full - 1e-12);
            let mut smallest = smaller;
            smallest[(k + 1) % 6] = 1;
            assert!(err(&smallest) >= err(&smaller) - 1e-9);
        }
    }
}
