//! Long-format tensor-series CSV.
//!
//! ```text
//! # dims=2,2,1 T=3
//! # labels1=a,b
//! t,i1,i2,i3,value
//! 1,1,1,1,0.5
//! ...
//! ```
//!
//! `T` counts every stored period; period 1 is the presample `Y_0`. Indices
//! are 1-based. Label lines are optional and default to `1..I_k`.

use std::collections::HashMap;
use std::fmt::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::series::{default_labels, TensorSeries};
use crate::tensor::DenseTensor;

const COLUMNS: &str = "t,i1,i2,i3,value";

pub fn series_to_string(series: &TensorSeries) -> String {
    let d = series.dims();
    let mut out = format!("# dims={},{},{} T={}\n", d[0], d[1], d[2], series.obs().len());
    if series.labels() != &default_labels(d) {
        for (k, l) in series.labels().iter().enumerate() {
            let _ = writeln!(out, "# labels{}={}", k + 1, l.join(","));
        }
    }
    out.push_str(COLUMNS);
    out.push('\n');
    for (t, y) in series.obs().iter().enumerate() {
        for i3 in 0..d[2] {
            for i2 in 0..d[1] {
                for i1 in 0..d[0] {
                    // `{}` prints the shortest string that parses back to the same f64.
                    let _ = writeln!(out, "{},{},{},{},{}", t + 1, i1 + 1, i2 + 1, i3 + 1, y.get(&[i1, i2, i3]));
                }
            }
        }
    }
    out
}

pub fn export(series: &TensorSeries, path: &Path) -> Result<()> {
    for l in series.labels().iter().flatten() {
        if l.contains([',', '\n', '\r']) {
            return Err(Error::Config(format!("label '{l}' contains a separator")));
        }
    }
    if series.obs().iter().any(|y| y.data().iter().any(|v| !v.is_finite())) {
        return Err(Error::Config("series holds non-finite values".into()));
    }
    super::atomic_write(path, series_to_string(series).as_bytes())
}

pub fn ingest(path: &Path) -> Result<TensorSeries> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_series(&text, &path.display().to_string())
}

pub fn parse_series(text: &str, source: &str) -> Result<TensorSeries> {
    let err = |line: usize, msg: String| Error::Parse {
        path: source.to_string(),
        line,
        msg,
    };
    let mut dims: Option<([usize; 3], usize)> = None;
    let mut labels: [Option<Vec<String>>; 3] = [None, None, None];
    let mut values: HashMap<[usize; 4], f64> = HashMap::new();
    let mut seen_columns = false;

    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let meta = meta.trim();
            if meta.starts_with("dims=") {
                dims = Some(parse_manifest(meta).map_err(|m| err(line_no, m))?);
            } else if let Some(rest) = meta.strip_prefix("labels") {
                let (axis, list) = rest.split_once('=').ok_or_else(|| err(line_no, "expected labelsK=...".into()))?;
                let k: usize = axis.parse().map_err(|_| err(line_no, format!("bad label axis '{axis}'")))?;
                if !(1..=3).contains(&k) {
                    return Err(err(line_no, format!("label axis {k} out of range")));
                }
                labels[k - 1] = Some(list.split(',').map(|s| s.trim().to_string()).collect());
            }
            continue;
        }
        if !seen_columns {
            if line.replace(' ', "") != COLUMNS {
                return Err(err(line_no, format!("expected column line '{COLUMNS}'")));
            }
            seen_columns = true;
            continue;
        }
        let (d, t_len) = dims.ok_or_else(|| err(line_no, "data before '# dims=' header".into()))?;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(err(line_no, format!("expected 5 fields, found {}", fields.len())));
        }
        let mut key = [0usize; 4];
        let bounds = [t_len, d[0], d[1], d[2]];
        for j in 0..4 {
            let v: usize = fields[j]
                .parse()
                .map_err(|_| err(line_no, format!("bad index '{}'", fields[j])))?;
            if v == 0 || v > bounds[j] {
                return Err(err(line_no, format!("index {v} outside 1..={}", bounds[j])));
            }
            key[j] = v;
        }
        let value: f64 = fields[4]
            .parse()
            .map_err(|_| err(line_no, format!("bad value '{}'", fields[4])))?;
        if !value.is_finite() {
            return Err(err(line_no, format!("non-finite value '{}'", fields[4])));
        }
        if values.insert(key, value).is_some() {
            return Err(Error::DuplicateCell(format!("{key:?} at {source}:{line_no}")));
        }
    }

    let (d, t_len) = dims.ok_or_else(|| err(0, "missing '# dims=I1,I2,I3 T=N' header".into()))?;
    let expected = t_len * d.iter().product::<usize>();
    if values.len() != expected {
        let mut missing = Vec::new();
        let mut total = 0;
        for t in 1..=t_len {
            for i3 in 1..=d[2] {
                for i2 in 1..=d[1] {
                    for i1 in 1..=d[0] {
                        if !values.contains_key(&[t, i1, i2, i3]) {
                            total += 1;
                            if missing.len() < 10 {
                                missing.push(format!("({t},{i1},{i2},{i3})"));
                            }
                        }
                    }
                }
            }
        }
        return Err(Error::MissingCells {
            total,
            shown: missing.len(),
            keys: missing.join(" "),
        });
    }
    let obs = (1..=t_len)
        .map(|t| DenseTensor::from_fn(&d, |i| values[&[t, i[0] + 1, i[1] + 1, i[2] + 1]]))
        .collect();
    let defaults = default_labels(d);
    let [l1, l2, l3] = labels;
    let labels = [
        l1.unwrap_or_else(|| defaults[0].clone()),
        l2.unwrap_or_else(|| defaults[1].clone()),
        l3.unwrap_or_else(|| defaults[2].clone()),
    ];
    TensorSeries::with_labels(d, obs, labels)
}

fn parse_manifest(meta: &str) -> std::result::Result<([usize; 3], usize), String> {
    let mut dims = None;
    let mut t_len = None;
    for part in meta.split_whitespace() {
        if let Some(v) = part.strip_prefix("dims=") {
            let d: Vec<usize> = v
                .split(',')
                .map(|x| x.parse().map_err(|_| format!("bad dimension '{x}'")))
                .collect::<std::result::Result<_, _>>()?;
            let d: [usize; 3] = d.try_into().map_err(|_| "dims needs three entries".to_string())?;
            if d.contains(&0) {
                return Err("dimensions must be positive".into());
            }
            dims = Some(d);
        } else if let Some(v) = part.strip_prefix("T=") {
            t_len = Some(v.parse::<usize>().map_err(|_| format!("bad T '{v}'"))?);
        } else {
            return Err(format!("unknown manifest field '{part}'"));
        }
    }
    match (dims, t_len) {
        (Some(d), Some(t)) if t > 0 => Ok((d, t)),
        (Some(_), Some(_)) => Err("T must be positive".into()),
        _ => Err("manifest needs dims= and T=".into()),
    }
}
