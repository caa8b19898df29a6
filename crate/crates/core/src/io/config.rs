//! Flat `key = value` run configuration.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::prior::Priors;
use crate::model::state::{CoeffForm, ModelSpec, Regime};
use crate::sampler::SamplerConfig;

use super::preprocess::PreprocessStep;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub ranks: Option<[usize; 6]>,
    pub form: CoeffForm,
    pub regime: Regime,
    pub trend: bool,
    pub shrinkage: bool,
    pub n_iter: usize,
    pub n_burn: usize,
    pub thin: usize,
    pub seed: u64,
    pub eta_step: f64,
    pub preprocess: Vec<PreprocessStep>,
    pub out: Option<PathBuf>,
    /// Also write every retained draw to `draws.bin`.
    pub raw_draws: bool,
    pub priors: Priors,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            ranks: None,
            form: CoeffForm::Tucker,
            regime: Regime::Homoskedastic,
            trend: false,
            shrinkage: false,
            n_iter: 4000,
            n_burn: 2000,
            thin: 2,
            seed: 0,
            eta_step: 0.01,
            preprocess: Vec::new(),
            out: None,
            raw_draws: false,
            priors: Priors::default(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "data",
    "ranks",
    "form",
    "regime",
    "trend",
    "shrinkage",
    "n_iter",
    "n_burn",
    "thin",
    "seed",
    "eta_step",
    "preprocess",
    "out",
    "raw_draws",
    "alpha_tau",
    "beta_tau",
    "factor_var",
    "core_var",
    "intercept_var",
    "iw_df_extra",
    "iw_scale",
    "p_out_a",
    "p_out_b",
    "phi_mean",
    "phi_sd",
    "sigma2_shape",
    "sigma2_scale",
];

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::Config(format!("{key} = '{value}': expected {what}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, what))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(bad(key, value, "a boolean")),
    }
}

/// `"2"` means all six ranks equal 2; otherwise six comma-separated values.
pub fn parse_ranks(value: &str) -> Result<[usize; 6]> {
    let v: Vec<usize> = value
        .split(',')
        .map(|x| x.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad("ranks", value, "positive integers"))?;
    match v.len() {
        1 => Ok([v[0]; 6]),
        6 => Ok(v.try_into().expect("length checked")),
        _ => Err(bad("ranks", value, "one or six integers")),
    }
}

fn form_name(f: CoeffForm) -> &'static str {
    match f {
        CoeffForm::Tucker => "tucker",
        CoeffForm::Cp => "cp",
    }
}

impl RunConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let wrap = |msg: String| Error::Parse {
                path: source.into(),
                line: n + 1,
                msg,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| wrap(format!("expected key = value, found '{line}'")))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(wrap(format!("duplicate key '{k}'")));
            }
            cfg.set(k, v.trim()).map_err(|e| wrap(e.to_string()))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        // Relative paths are taken relative to the config file.
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Sets one key; unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.priors;
        match key {
            "data" => self.data = Some(PathBuf::from(value)),
            "ranks" => self.ranks = Some(parse_ranks(value)?),
            "form" => {
                self.form = match value {
                    "tucker" => CoeffForm::Tucker,
                    "cp" => CoeffForm::Cp,
                    _ => return Err(bad(key, value, "tucker or cp")),
                }
            }
            "regime" => self.regime = value.parse()?,
            "trend" => self.trend = flag(key, value)?,
            "shrinkage" => self.shrinkage = flag(key, value)?,
            "n_iter" => self.n_iter = num(key, value, "an integer")?,
            "n_burn" => self.n_burn = num(key, value, "an integer")?,
            "thin" => self.thin = num(key, value, "an integer")?,
            "seed" => self.seed = num(key, value, "an unsigned integer")?,
            "eta_step" => self.eta_step = num(key, value, "a number")?,
            "preprocess" => self.preprocess = PreprocessStep::parse_list(value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "raw_draws" => self.raw_draws = flag(key, value)?,
            "alpha_tau" => p.alpha_tau = num(key, value, "a number")?,
            "beta_tau" => p.beta_tau = num(key, value, "a number")?,
            "factor_var" => p.factor_var = num(key, value, "a number")?,
            "core_var" => p.core_var = num(key, value, "a number")?,
            "intercept_var" => p.intercept_var = num(key, value, "a number")?,
            "iw_df_extra" => p.iw_df_extra = num(key, value, "a number")?,
            "iw_scale" => p.iw_scale = num(key, value, "a number")?,
            "p_out_a" => p.p_out_a = num(key, value, "a number")?,
            "p_out_b" => p.p_out_b = num(key, value, "a number")?,
            "phi_mean" => p.phi_mean = num(key, value, "a number")?,
            "phi_sd" => p.phi_sd = num(key, value, "a number")?,
            "sigma2_shape" => p.sigma2_shape = num(key, value, "a number")?,
            "sigma2_scale" => p.sigma2_scale = num(key, value, "a number")?,
            _ => return Err(Error::Config(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    /// Every key with its current value, parseable by [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let p = &self.priors;
        let path = |x: &Option<PathBuf>| x.as_ref().map(|p| p.display().to_string());
        let ranks = self.ranks.map(|r| r.map(|x| x.to_string()).join(","));
        let values: Vec<(&str, Option<String>)> = vec![
            ("data", path(&self.data)),
            ("ranks", ranks),
            ("form", Some(form_name(self.form).into())),
            ("regime", Some(self.regime.to_string())),
            ("trend", Some(self.trend.to_string())),
            ("shrinkage", Some(self.shrinkage.to_string())),
            ("n_iter", Some(self.n_iter.to_string())),
            ("n_burn", Some(self.n_burn.to_string())),
            ("thin", Some(self.thin.to_string())),
            ("seed", Some(self.seed.to_string())),
            ("eta_step", Some(self.eta_step.to_string())),
            ("preprocess", Some(PreprocessStep::format_list(&self.preprocess))),
            ("out", path(&self.out)),
            ("raw_draws", Some(self.raw_draws.to_string())),
            ("alpha_tau", Some(p.alpha_tau.to_string())),
            ("beta_tau", Some(p.beta_tau.to_string())),
            ("factor_var", Some(p.factor_var.to_string())),
            ("core_var", Some(p.core_var.to_string())),
            ("intercept_var", Some(p.intercept_var.to_string())),
            ("iw_df_extra", Some(p.iw_df_extra.to_string())),
            ("iw_scale", Some(p.iw_scale.to_string())),
            ("p_out_a", Some(p.p_out_a.to_string())),
            ("p_out_b", Some(p.p_out_b.to_string())),
            ("phi_mean", Some(p.phi_mean.to_string())),
            ("phi_sd", Some(p.phi_sd.to_string())),
            ("sigma2_shape", Some(p.sigma2_shape.to_string())),
            ("sigma2_scale", Some(p.sigma2_scale.to_string())),
        ];
        values
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| format!("{k} = {v}\n")))
            .collect()
    }

    /// Checks everything that does not depend on the data.
    pub fn validate(&self) -> Result<()> {
        if self.data.is_none() {
            return Err(Error::Config("no data file given".into()));
        }
        let ranks = self.ranks.ok_or_else(|| Error::Config("no ranks given".into()))?;
        if ranks.contains(&0) {
            return Err(Error::Config(format!("ranks must be positive: {ranks:?}")));
        }
        let p = &self.priors;
        for (name, v) in [
            ("alpha_tau", p.alpha_tau),
            ("beta_tau", p.beta_tau),
            ("factor_var", p.factor_var),
            ("core_var", p.core_var),
            ("intercept_var", p.intercept_var),
            ("iw_scale", p.iw_scale),
            ("p_out_a", p.p_out_a),
            ("p_out_b", p.p_out_b),
            ("phi_sd", p.phi_sd),
            ("sigma2_shape", p.sigma2_shape),
            ("sigma2_scale", p.sigma2_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(p.iw_df_extra > 0.0) {
            return Err(Error::Config("iw_df_extra must be positive".into()));
        }
        if self.n_burn >= self.n_iter {
            return Err(Error::Config(format!(
                "n_burn ({}) must be below n_iter ({})",
                self.n_burn, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if !(self.eta_step > 0.0) {
            return Err(Error::Config("eta_step must be positive".into()));
        }
        Ok(())
    }

    pub fn model_spec(&self, dims: [usize; 3]) -> ModelSpec {
        ModelSpec {
            form: self.form,
            regime: self.regime,
            trend: self.trend,
            shrinkage: self.shrinkage,
            ..ModelSpec::new(dims, self.ranks.unwrap_or([1; 6]))
        }
    }

    pub fn sampler_config(&self, dims: [usize; 3]) -> SamplerConfig {
        SamplerConfig {
            n_iter: self.n_iter,
            n_burn: self.n_burn,
            thin: self.thin,
            seed: self.seed,
            spec: self.model_spec(dims),
            priors: self.priors.clone(),
            eta_step: self.eta_step,
        }
    }
}
