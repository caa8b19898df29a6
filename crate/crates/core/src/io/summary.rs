//! Posterior summaries (`name,mean,q05,q50,q95`) and the raw draw dump.
//!
//! Summary parameter names, all indices 1-based:
//! `B_i1_i2_i3_j1_j2_j3` coefficient tensor entries, `A0_i1_i2_i3` and
//! `A1_…` intercept and trend, `Sigma{k}_{i}_{j}` (upper triangle, normalized
//! scale), `sd_{t}` = `exp(h_t/2)` or `√ω_t`, `p_out`, `phi`, `sigma2`,
//! `tau_{k}` and `loglik`.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use crate::decomp::tucker_reconstruct;
use crate::error::{Error, Result};
use crate::model::state::VolLatent;
use crate::sampler::{Draw, PosteriorDraws};
use crate::tensor::DenseTensor;

pub const SUMMARY_HEADER: &str = "name,mean,q05,q50,q95";
pub const DRAWS_MAGIC: &[u8] = b"BTAR-DRAWS v1\n";

/// Values buffered per pass over the draws while summarizing the coefficients.
const CHUNK_VALUES: usize = 1 << 22;

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

impl SummaryRow {
    fn from_values(name: String, mut v: Vec<f64>) -> Self {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.sort_by(f64::total_cmp);
        SummaryRow {
            name,
            mean,
            q05: quantile_sorted(&v, 0.05),
            q50: quantile_sorted(&v, 0.5),
            q95: quantile_sorted(&v, 0.95),
        }
    }
}

/// Linear interpolation between order statistics (`h = (n − 1)p`).
pub fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

fn index_name(prefix: &str, idx: &[usize]) -> String {
    let mut s = prefix.to_string();
    for i in idx {
        let _ = write!(s, "_{}", i + 1);
    }
    s
}

/// Per-draw scalar parameters other than the coefficient tensor.
fn scalar_params(draws: &[Draw]) -> Vec<(String, Vec<f64>)> {
    let first = &draws[0];
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    let mut push = |name: String, f: &dyn Fn(&Draw) -> f64| out.push((name, draws.iter().map(f).collect()));

    let a0 = &first.intercept.a0;
    for lin in 0..a0.len() {
        let idx = a0.multi_index(lin);
        push(index_name("A0", &idx), &|d| d.intercept.a0.data()[lin]);
    }
    if first.intercept.a1.is_some() {
        for lin in 0..a0.len() {
            let idx = a0.multi_index(lin);
            push(index_name("A1", &idx), &|d| d.intercept.a1.as_ref().expect("trend in every draw").data()[lin]);
        }
    }
    for k in 0..3 {
        let n = first.cov.sigma[k].nrows();
        for j in 0..n {
            for i in 0..=j {
                push(format!("Sigma{}_{}_{}", k + 1, i + 1, j + 1), &|d| d.cov.sigma[k][(i, j)]);
            }
        }
    }
    if !matches!(first.vol.latent, VolLatent::None) {
        for t in 0..first.vol.omega.len() {
            push(format!("sd_{}", t + 1), &|d| d.vol.omega[t].sqrt());
        }
    }
    match first.vol.latent {
        VolLatent::None => {}
        VolLatent::Outlier { .. } => push("p_out".into(), &|d| match &d.vol.latent {
            VolLatent::Outlier { p_out, .. } => *p_out,
            _ => f64::NAN,
        }),
        VolLatent::Csv { .. } => {
            push("phi".into(), &|d| match &d.vol.latent {
                VolLatent::Csv { phi, .. } => *phi,
                _ => f64::NAN,
            });
            push("sigma2".into(), &|d| match &d.vol.latent {
                VolLatent::Csv { sigma2, .. } => *sigma2,
                _ => f64::NAN,
            });
        }
    }
    if let Some(sh) = &first.shrink {
        for k in 0..sh.modes.len() {
            push(format!("tau_{}", k + 1), &|d| d.shrink.as_ref().map_or(f64::NAN, |s| s.modes[k].tau));
        }
    }
    push("loglik".into(), &|d| d.log_lik);
    out
}

pub fn summarize(draws: &PosteriorDraws) -> Result<Vec<SummaryRow>> {
    let first = draws
        .draws
        .first()
        .ok_or_else(|| Error::Config("no retained draws to summarize".into()))?;
    let n_draws = draws.draws.len();
    let shape = first.factors.dims();
    let n_coeff: usize = shape.iter().product();
    let template = DenseTensor::zeros(&shape);
    let chunk = (CHUNK_VALUES / n_draws).clamp(1, n_coeff);
    let mut rows = Vec::new();
    for start in (0..n_coeff).step_by(chunk) {
        let end = (start + chunk).min(n_coeff);
        let mut cols = vec![Vec::with_capacity(n_draws); end - start];
        for d in &draws.draws {
            let b = tucker_reconstruct(&d.factors);
            for (c, v) in cols.iter_mut().zip(&b.data()[start..end]) {
                c.push(*v);
            }
        }
        for (off, c) in cols.into_iter().enumerate() {
            rows.push(SummaryRow::from_values(index_name("B", &template.multi_index(start + off)), c));
        }
    }
    for (name, v) in scalar_params(&draws.draws) {
        rows.push(SummaryRow::from_values(name, v));
    }
    Ok(rows)
}

pub fn summary_to_string(rows: &[SummaryRow]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.name, r.mean, r.q05, r.q50, r.q95);
    }
    s
}

pub fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    super::atomic_write(path, summary_to_string(rows).as_bytes())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let source = path.display().to_string();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SUMMARY_HEADER => {}
        _ => {
            return Err(Error::Parse {
                path: source,
                line: 1,
                msg: format!("expected header '{SUMMARY_HEADER}'"),
            })
        }
    }
    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let num = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| Error::Parse {
                path: source.clone(),
                line: n + 1,
                msg: format!("bad number '{s}'"),
            })
        };
        if f.len() != 5 {
            return Err(Error::Parse {
                path: source,
                line: n + 1,
                msg: format!("expected 5 fields, found {}", f.len()),
            });
        }
        rows.push(SummaryRow {
            name: f[0].to_string(),
            mean: num(f[1])?,
            q05: num(f[2])?,
            q50: num(f[3])?,
            q95: num(f[4])?,
        });
    }
    Ok(rows)
}

/// Flattened raw draw: core, factors `B1..B6` (column-major), `A0`, `A1` if
/// present, `Σ1..Σ3`, `ω`, log likelihood.
pub fn draw_vector(d: &Draw) -> Vec<f64> {
    let mut v = d.factors.core.data().to_vec();
    for b in &d.factors.factors {
        v.extend_from_slice(b.as_slice());
    }
    v.extend_from_slice(d.intercept.a0.data());
    if let Some(a1) = &d.intercept.a1 {
        v.extend_from_slice(a1.data());
    }
    for s in &d.cov.sigma {
        v.extend_from_slice(s.as_slice());
    }
    v.extend_from_slice(&d.vol.omega);
    v.push(d.log_lik);
    v
}

/// Magic line, then draw count and parameter count as little-endian `u64`,
/// then the values draw by draw as little-endian `f64`.
pub fn write_draws_bin(rows: &[Vec<f64>], path: &Path) -> Result<()> {
    let n_param = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n_param) {
        return Err(Error::ShapeMismatch("draw vectors differ in length".into()));
    }
    let mut buf = Vec::with_capacity(DRAWS_MAGIC.len() + 16 + 8 * rows.len() * n_param);
    buf.write_all(DRAWS_MAGIC)?;
    buf.write_all(&(rows.len() as u64).to_le_bytes())?;
    buf.write_all(&(n_param as u64).to_le_bytes())?;
    for v in rows.iter().flatten() {
        buf.write_all(&v.to_le_bytes())?;
    }
    super::atomic_write(path, &buf)
}

pub fn read_draws_bin(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut f = std::fs::File::open(path)?;
    let bad = |msg: &str| Error::Parse {
        path: path.display().to_string(),
        line: 1,
        msg: msg.into(),
    };
    let mut magic = vec![0u8; DRAWS_MAGIC.len()];
    f.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if magic != DRAWS_MAGIC {
        return Err(bad("not a draws file"));
    }
    let mut word = [0u8; 8];
    f.read_exact(&mut word).map_err(|_| bad("truncated header"))?;
    let n_draws = u64::from_le_bytes(word) as usize;
    f.read_exact(&mut word).map_err(|_| bad("truncated header"))?;
    let n_param = u64::from_le_bytes(word) as usize;
    let mut rest = Vec::new();
    f.read_to_end(&mut rest)?;
    if rest.len() != 8 * n_draws * n_param {
        return Err(bad("payload length does not match the counts"));
    }
    let vals: Vec<f64> = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(if n_param == 0 {
        vec![Vec::new(); n_draws]
    } else {
        vals.chunks(n_param).map(<[f64]>::to_vec).collect()
    })
}

fn means_with_prefix(rows: &[SummaryRow], prefix: &str, shape: &[usize]) -> Result<Option<DenseTensor>> {
    let map: std::collections::HashMap<&str, f64> = rows.iter().map(|r| (r.name.as_str(), r.mean)).collect();
    let mut t = DenseTensor::zeros(shape);
    let mut found = 0;
    for lin in 0..t.len() {
        if let Some(v) = map.get(index_name(prefix, &t.multi_index(lin)).as_str()) {
            t.data_mut()[lin] = *v;
            found += 1;
        }
    }
    match found {
        0 => Ok(None),
        n if n == t.len() => Ok(Some(t)),
        n => Err(Error::Config(format!("summary has {n} of {} {prefix} entries", t.len()))),
    }
}

/// Posterior-mean coefficient tensor and intercept recorded in a summary.
pub fn posterior_means(rows: &[SummaryRow], dims: [usize; 3]) -> Result<(DenseTensor, crate::model::state::InterceptTrend)> {
    let shape = [dims[0], dims[1], dims[2], dims[0], dims[1], dims[2]];
    let missing = |p: &str| Error::Config(format!("summary has no {p} entries for dims {dims:?}"));
    let b = means_with_prefix(rows, "B", &shape)?.ok_or_else(|| missing("B"))?;
    let a0 = means_with_prefix(rows, "A0", &dims)?.ok_or_else(|| missing("A0"))?;
    let a1 = means_with_prefix(rows, "A1", &dims)?;
    Ok((b, crate::model::state::InterceptTrend { a0, a1 }))
}
