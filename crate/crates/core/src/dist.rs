//! Scalar distributions not covered by `rand_distr`: the generalized inverse
//! Gaussian, a two-sided truncated normal, and a few log-density helpers.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln Γ_p(a)`, the multivariate log-gamma function.
pub fn ln_mvgamma(p: usize, a: f64) -> f64 {
    let pf = p as f64;
    pf * (pf - 1.0) / 4.0 * std::f64::consts::PI.ln()
        + (0..p).map(|j| ln_gamma(a - j as f64 / 2.0)).sum::<f64>()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn ln_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (x - mean).powi(2) / (2.0 * var)
}

/// Gamma with shape `k` and rate `rate`.
pub fn gamma_sample<R: Rng + ?Sized>(k: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(k, 1.0 / rate).expect("positive gamma parameters").sample(rng)
}

/// Inverse gamma with shape `a` and scale `b` (density ∝ x^{-a-1} e^{-b/x}).
pub fn inv_gamma_sample<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    1.0 / gamma_sample(a, b, rng)
}

pub fn ln_inv_gamma_pdf(x: f64, a: f64, b: f64) -> f64 {
    a * b.ln() - ln_gamma(a) - (a + 1.0) * x.ln() - b / x
}

pub fn ln_gamma_pdf(x: f64, k: f64, rate: f64) -> f64 {
    k * rate.ln() - ln_gamma(k) + (k - 1.0) * x.ln() - rate * x
}

pub fn ln_beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p()
}

/// Generalized inverse Gaussian with density
/// `∝ x^{λ−1} exp(−(χ/x + ψx)/2)`.
pub fn gig_sample<R: Rng + ?Sized>(lambda: f64, chi: f64, psi: f64, rng: &mut R) -> f64 {
    const TINY: f64 = 1e-300;
    if chi <= TINY && lambda > 0.0 {
        return gamma_sample(lambda, psi / 2.0, rng);
    }
    if psi <= TINY && lambda < 0.0 {
        return inv_gamma_sample(-lambda, chi / 2.0, rng);
    }
    let omega = (chi * psi).sqrt();
    let scale = (chi / psi).sqrt();
    let x = if lambda >= 0.0 {
        gig_unit(lambda, omega, rng)
    } else {
        1.0 / gig_unit(-lambda, omega, rng)
    };
    scale * x
}

/// Devroye's (2014) rejection sampler for density `∝ x^{λ−1} e^{−ω(x+1/x)/2}`,
/// `λ ≥ 0`, `ω > 0`, run on the log scale.
fn gig_unit<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let alpha = (omega * omega + lambda * lambda).sqrt() - lambda;
    let psi = |x: f64| -alpha * (x.cosh() - 1.0) - lambda * (x.exp() - x - 1.0);
    let dpsi = |x: f64| -alpha * x.sinh() - lambda * (x.exp() - 1.0);

    let p1 = -psi(1.0);
    let t = if (0.5..=2.0).contains(&p1) {
        1.0
    } else if p1 > 2.0 {
        (2.0 / (alpha + lambda)).sqrt()
    } else {
        (4.0 / (alpha + 2.0 * lambda)).ln()
    };
    let pm1 = -psi(-1.0);
    let s = if (0.5..=2.0).contains(&pm1) {
        1.0
    } else if pm1 > 2.0 {
        (4.0 / (alpha * 1f64.cosh() + lambda)).sqrt()
    } else {
        let a = 1.0 / alpha;
        let cand = (1.0 + a + (a * a + 2.0 * a).sqrt()).ln();
        if lambda > 0.0 {
            cand.min(1.0 / lambda)
        } else {
            cand
        }
    };

    let eta = -psi(t);
    let zeta = -dpsi(t);
    let theta = -psi(-s);
    let xi = dpsi(-s);
    let p = 1.0 / xi;
    let r = 1.0 / zeta;
    let td = t - r * eta;
    let sd = s - p * theta;
    let q = td + sd;
    let total = p + q + r;

    loop {
        let u: f64 = rng.random();
        let v: f64 = 1.0 - rng.random::<f64>();
        let w: f64 = rng.random();
        let x = if u < q / total {
            -sd + q * v
        } else if u < (q + r) / total {
            td - r * v.ln()
        } else {
            -sd + p * v.ln()
        };
        let envelope = if x > td {
            (-eta - zeta * (x - t)).exp()
        } else if x < -sd {
            (-theta + xi * (x + s)).exp()
        } else {
            1.0
        };
        if w * envelope <= psi(x).exp() {
            let c = lambda / omega;
            return (c + (1.0 + c * c).sqrt()) * x.exp();
        }
    }
}

/// Normal `N(mean, sd²)` truncated to `(lo, hi)`.
pub fn truncated_normal<R: Rng + ?Sized>(mean: f64, sd: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    mean + sd * truncated_std_normal(a, b, rng)
}

fn truncated_std_normal<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if a <= 0.0 && b >= 0.0 {
        if b - a > 2.5 {
            loop {
                let z: f64 = rng.sample(StandardNormal);
                if z > a && z < b {
                    return z;
                }
            }
        }
        loop {
            let z = a + (b - a) * rng.random::<f64>();
            if rng.random::<f64>() <= (-0.5 * z * z).exp() {
                return z;
            }
        }
    } else if a > 0.0 {
        positive_tail(a, b, rng)
    } else {
        -positive_tail(-b, -a, rng)
    }
}

/// Standard normal restricted to `(a, b)` with `0 < a < b`.
fn positive_tail<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if (b - a) * (b + a) < 2.0 {
        loop {
            let z = a + (b - a) * rng.random::<f64>();
            if rng.random::<f64>() <= (0.5 * (a * a - z * z)).exp() {
                return z;
            }
        }
    }
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = rng.sample(Exp1);
        let z = a + e / rate;
        if z >= b {
            continue;
        }
        if rng.random::<f64>() <= (-0.5 * (z - rate).powi(2)).exp() {
            return z;
        }
    }
}

/// Log density of `N(mean, sd²)` truncated to `(lo, hi)`.
pub fn ln_truncated_normal_pdf(x: f64, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let mass = normal_cdf((hi - mean) / sd) - normal_cdf((lo - mean) / sd);
    ln_normal_pdf(x, mean, sd * sd) - mass.ln()
}

/// Draws an index with probability proportional to `exp(log_w[k])`.
pub fn sample_log_weights<R: Rng + ?Sized>(log_w: &[f64], rng: &mut R) -> usize {
    let m = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, wk) in w.iter().enumerate() {
        if u < *wk {
            return k;
        }
        u -= wk;
    }
    w.len() - 1
}
