//! Moving averages, year-over-year changes and standardization applied cell
//! by cell along time.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::series::TensorSeries;
use crate::tensor::DenseTensor;

/// Denominators at or below this magnitude count as zero in a YoY change.
pub const ZERO_DENOMINATOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PreprocessStep {
    /// Trailing mean over `k` periods.
    MovingAverage(usize),
    /// `(x_t − x_{t−s}) / x_{t−s}`.
    YearOverYear(usize),
    /// Per-cell mean 0 and sample standard deviation 1.
    Standardize,
}

impl PreprocessStep {
    /// Periods removed by this step.
    pub fn lost_periods(&self) -> usize {
        match *self {
            PreprocessStep::MovingAverage(k) => k.saturating_sub(1),
            PreprocessStep::YearOverYear(s) => s,
            PreprocessStep::Standardize => 0,
        }
    }

    pub fn defaults() -> Vec<PreprocessStep> {
        vec![
            PreprocessStep::MovingAverage(3),
            PreprocessStep::YearOverYear(12),
            PreprocessStep::Standardize,
        ]
    }

    /// Parses `ma:3,yoy:12,standardize`; `none` is the empty pipeline.
    pub fn parse_list(s: &str) -> Result<Vec<PreprocessStep>> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(Vec::new());
        }
        s.split(',').map(|p| p.trim().parse()).collect()
    }

    pub fn format_list(steps: &[PreprocessStep]) -> String {
        if steps.is_empty() {
            return "none".into();
        }
        steps.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
    }
}

impl fmt::Display for PreprocessStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PreprocessStep::MovingAverage(k) => write!(f, "ma:{k}"),
            PreprocessStep::YearOverYear(s) => write!(f, "yoy:{s}"),
            PreprocessStep::Standardize => f.write_str("standardize"),
        }
    }
}

impl FromStr for PreprocessStep {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = s.split_once(':').unwrap_or((s, ""));
        let lag = || -> Result<usize> {
            match arg.parse::<usize>() {
                Ok(v) if v > 0 => Ok(v),
                _ => Err(Error::Config(format!("step '{s}' needs a positive integer argument"))),
            }
        };
        match name {
            "ma" => Ok(PreprocessStep::MovingAverage(lag()?)),
            "yoy" => Ok(PreprocessStep::YearOverYear(lag()?)),
            "standardize" | "std" if arg.is_empty() => Ok(PreprocessStep::Standardize),
            _ => Err(Error::Config(format!("unknown preprocessing step '{s}'"))),
        }
    }
}

/// A cell whose output was set by a degenerate-input rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Flag {
    pub step: PreprocessStep,
    /// 0-based period of the step's output; `None` for whole-series flags.
    pub period: Option<usize>,
    pub cell: [usize; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Preprocessed {
    pub series: TensorSeries,
    pub flags: Vec<Flag>,
}

/// Runs `steps` in order over every stored period of `series`.
pub fn preprocess(series: &TensorSeries, steps: &[PreprocessStep]) -> Result<Preprocessed> {
    let lost: usize = steps.iter().map(PreprocessStep::lost_periods).sum();
    let n_in = series.obs().len();
    if n_in < lost + 2 {
        return Err(Error::TooShort(format!(
            "{n_in} periods cannot absorb {lost} lost to preprocessing and leave two"
        )));
    }
    let d = series.dims();
    let n_cells = series.n_cells();
    // One Vec per cell, column-major over (i1, i2, i3).
    let mut cols: Vec<Vec<f64>> = (0..n_cells)
        .map(|c| series.obs().iter().map(|y| y.data()[c]).collect())
        .collect();
    let mut flags = Vec::new();
    let cell_of = |c: usize| [c % d[0], (c / d[0]) % d[1], c / (d[0] * d[1])];

    for &step in steps {
        for (c, x) in cols.iter_mut().enumerate() {
            *x = match step {
                PreprocessStep::MovingAverage(k) => x.windows(k).map(|w| w.iter().sum::<f64>() / k as f64).collect(),
                PreprocessStep::YearOverYear(s) => (s..x.len())
                    .map(|t| {
                        let base = x[t - s];
                        if base.abs() <= ZERO_DENOMINATOR {
                            flags.push(Flag {
                                step,
                                period: Some(t - s),
                                cell: cell_of(c),
                            });
                            0.0
                        } else {
                            (x[t] - base) / base
                        }
                    })
                    .collect(),
                PreprocessStep::Standardize => {
                    let n = x.len() as f64;
                    let mean = x.iter().sum::<f64>() / n;
                    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                    if sd <= ZERO_DENOMINATOR {
                        flags.push(Flag {
                            step,
                            period: None,
                            cell: cell_of(c),
                        });
                        vec![0.0; x.len()]
                    } else {
                        x.iter().map(|v| (v - mean) / sd).collect()
                    }
                }
            };
        }
    }
    for f in &flags {
        log::warn!("{} set cell {:?} at period {:?} to zero", f.step, f.cell, f.period);
    }
    let n_out = cols[0].len();
    let obs = (0..n_out)
        .map(|t| DenseTensor::new(d.to_vec(), cols.iter().map(|c| c[t]).collect()).expect("cell count"))
        .collect();
    Ok(Preprocessed {
        series: series.map_obs(obs)?,
        flags,
    })
}
