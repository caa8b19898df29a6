//! `btar` command line: argument parsing, run orchestration and exit codes.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{self, DgpCell, DgpKind, DgpSpec, Estimator, FitSettings, MinnesotaHyper, SuiteSpec};
use crate::decomp::{hosvd, sign_normalize};
use crate::error::{Error, Result};
use crate::factors::extract_factors;
use crate::io::config::parse_ranks;
use crate::io::summary::{draw_vector, summary_to_string};
use crate::io::{self, atomic_write, RunConfig};
use crate::sampler::run_gibbs;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// File names inside a fit output directory.
pub const SUMMARY_FILE: &str = "summary.csv";
pub const RUN_CONFIG_FILE: &str = "run.cfg";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const DRAWS_FILE: &str = "draws.bin";
pub const FACTORS_FILE: &str = "factors.csv";
pub const PROJECTIONS_FILE: &str = "projections.csv";
pub const VOLATILITY_FILE: &str = "volatility.csv";

#[derive(Parser, Debug)]
#[command(name = "btar", about = "Bayesian tensor autoregression", version)]
struct Cli {
    /// RNG seed (overrides the config file's `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel work.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a benchmark DGP and write a tensor-series file.
    Simulate(SimulateArgs),
    /// Run the Gibbs sampler and write posterior summaries to a directory.
    Fit(FitArgs),
    /// Run the Monte Carlo comparison and write the results CSV.
    Benchmark(BenchArgs),
    /// Extract response and predictor factor series from a fit directory.
    Factors(FitDirArgs),
    /// Write the posterior mean of the time-varying standard deviation.
    Volatility(FitDirArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value = "lowrank")]
    dgp: String,
    #[arg(long, default_value = "5,5,5")]
    dims: String,
    #[arg(long, default_value = "2")]
    ranks: String,
    /// Modelled periods; the file holds `T + 1` including the presample.
    #[arg(long = "T", default_value_t = 200)]
    t_len: usize,
    #[arg(long, default_value_t = 5.0)]
    norm: f64,
    #[arg(long, default_value_t = 0.1)]
    intercept: f64,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// `key = value` run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    ranks: Option<String>,
    #[arg(long)]
    regime: Option<String>,
    #[arg(long)]
    form: Option<String>,
    #[arg(long)]
    trend: bool,
    #[arg(long)]
    shrinkage: bool,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burn: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Steps such as `ma:3,yoy:12,standardize`, or `none`.
    #[arg(long)]
    preprocess: Option<String>,
    #[arg(long)]
    raw_draws: bool,
    /// Any configuration key, `KEY=VALUE`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated DGP kinds.
    #[arg(long, default_value = "lowrank")]
    dgp: String,
    #[arg(long, default_value = "5,5,5")]
    dims: String,
    #[arg(long, default_value = "2")]
    ranks: String,
    /// Ranks fitted by the BTAR estimators (default: the DGP ranks).
    #[arg(long)]
    fit_ranks: Option<String>,
    /// Comma-separated sample sizes.
    #[arg(long = "T", default_value = "200")]
    t_values: String,
    #[arg(long, default_value = "BVAR-Minn,BTAR-CP,BTAR-TK,BTAR-TK-MSB")]
    estimators: String,
    /// Rank of a bare `BTAR-CP`.
    #[arg(long, default_value_t = 2)]
    cp_rank: usize,
    /// Seeds `seed..seed + replications`.
    #[arg(long, default_value_t = 10)]
    replications: u64,
    #[arg(long, default_value_t = 4000)]
    iters: usize,
    #[arg(long, default_value_t = 2000)]
    burn: usize,
    #[arg(long, default_value_t = 2)]
    thin: usize,
    #[arg(long)]
    kappa1: Option<f64>,
    #[arg(long)]
    kappa2: Option<f64>,
}

#[derive(Args, Debug)]
struct FitDirArgs {
    /// Directory written by `fit`.
    fit_dir: PathBuf,
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Error::Config(format!("cannot build a {n}-thread pool: {e}"))),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("btar: {e}");
            exit_code(&e)
        }
    }
}

/// Input and configuration problems map to 2, failures while computing or
/// writing results to 3.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Parse { .. }
        | Error::MissingCells { .. }
        | Error::DuplicateCell(_)
        | Error::ShapeMismatch(_)
        | Error::RankExceedsDimension { .. }
        | Error::TooShort(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::Fit(a) => fit(cli, a),
        Command::Benchmark(a) => benchmark(cli, a),
        Command::Factors(a) => factors(cli, a),
        Command::Volatility(a) => volatility(cli, a),
    }
}

fn parse_dims(s: &str) -> Result<[usize; 3]> {
    let v: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("bad dims '{s}'")))?;
    v.try_into().map_err(|_| Error::Config(format!("dims '{s}' needs three entries")))
}

fn require_out(cli: &Cli, what: &str) -> Result<PathBuf> {
    cli.out.clone().ok_or_else(|| Error::Config(format!("--out {what} is required")))
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let out = require_out(cli, "FILE")?;
    let spec = DgpSpec {
        frob_norm: a.norm,
        intercept: a.intercept,
        ..DgpSpec::new(a.dgp.parse()?, parse_dims(&a.dims)?, parse_ranks(&a.ranks)?, a.t_len, cli.seed.unwrap_or(0))
    };
    let dgp = bench::generate(&spec)?;
    io::export(&dgp.series, &out)?;
    log::info!("wrote {} ({} periods)", out.display(), dgp.series.obs().len());
    Ok(())
}

fn resolve_config(cli: &Cli, a: &FitArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut set = |k: &str, v: &str| cfg.set(k, v);
    if let Some(v) = &a.data {
        set("data", &v.display().to_string())?;
    }
    for (k, v) in [
        ("ranks", &a.ranks),
        ("regime", &a.regime),
        ("form", &a.form),
        ("preprocess", &a.preprocess),
    ] {
        if let Some(v) = v {
            set(k, v)?;
        }
    }
    for (k, v) in [("n_iter", a.iters), ("n_burn", a.burn), ("thin", a.thin)] {
        if let Some(v) = v {
            set(k, &v.to_string())?;
        }
    }
    for (k, on) in [("trend", a.trend), ("shrinkage", a.shrinkage), ("raw_draws", a.raw_draws)] {
        if on {
            set(k, "true")?;
        }
    }
    for kv in &a.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        set(k.trim(), v.trim())?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    if cfg.out.is_none() {
        return Err(Error::Config("no output directory: pass --out DIR".into()));
    }
    Ok(cfg)
}

/// Reads and preprocesses the data named by a run configuration.
pub fn load_data(cfg: &RunConfig) -> Result<crate::series::TensorSeries> {
    let path = cfg.data.as_ref().ok_or_else(|| Error::Config("no data file given".into()))?;
    let raw = io::ingest(path)?;
    Ok(io::preprocess(&raw, &cfg.preprocess)?.series)
}

fn fit(cli: &Cli, a: &FitArgs) -> Result<()> {
    let mut cfg = resolve_config(cli, a)?;
    let data_path = cfg.data.clone().expect("validated");
    cfg.data = Some(
        std::fs::canonicalize(&data_path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", data_path.display())))?,
    );
    let data = load_data(&cfg)?;
    let config = cfg.sampler_config(data.dims());
    let draws = run_gibbs(&data, &config)?;
    let out = cfg.out.clone().expect("checked");
    std::fs::create_dir_all(&out)?;
    atomic_write(&out.join(SUMMARY_FILE), summary_to_string(&io::summarize(&draws)?).as_bytes())?;
    let mut saved = cfg.clone();
    saved.out = None;
    atomic_write(&out.join(RUN_CONFIG_FILE), saved.to_text().as_bytes())?;
    let s = &draws.stats;
    let rate = |r: Option<f64>| r.map_or_else(|| "NA".to_string(), |v| v.to_string());
    let diag = format!(
        "statistic,value\ndraws,{}\neta_acceptance,{}\nh_acceptance,{}\nphi_acceptance,{}\n",
        draws.draws.len(),
        rate(s.eta.rate()),
        rate(s.vol.h.rate()),
        rate(s.vol.phi.rate()),
    );
    atomic_write(&out.join(DIAGNOSTICS_FILE), diag.as_bytes())?;
    if cfg.raw_draws {
        let rows: Vec<Vec<f64>> = draws.draws.iter().map(draw_vector).collect();
        io::write_draws_bin(&rows, &out.join(DRAWS_FILE))?;
    }
    log::info!("fit written to {}", out.display());
    Ok(())
}

fn benchmark(cli: &Cli, a: &BenchArgs) -> Result<()> {
    let dims = parse_dims(&a.dims)?;
    let ranks = parse_ranks(&a.ranks)?;
    let fit_ranks = a.fit_ranks.as_deref().map(parse_ranks).transpose()?;
    let dgps = a
        .dgp
        .split(',')
        .map(|k| {
            Ok(DgpCell {
                kind: k.trim().parse::<DgpKind>()?,
                dims,
                ranks,
                fit_ranks,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let t_values = a
        .t_values
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| Error::Config(format!("bad T '{t}'"))))
        .collect::<Result<Vec<usize>>>()?;
    let estimators = a
        .estimators
        .split(',')
        .map(|e| Estimator::parse(e, a.cp_rank))
        .collect::<Result<Vec<_>>>()?;
    let base = cli.seed.unwrap_or(0);
    let mut hyper = MinnesotaHyper::default();
    if let Some(k) = a.kappa1 {
        hyper.kappa1 = k;
    }
    if let Some(k) = a.kappa2 {
        hyper.kappa2 = k;
    }
    let suite = SuiteSpec {
        dgps,
        t_values,
        estimators,
        seeds: (base..base + a.replications).collect(),
        fit: FitSettings {
            n_iter: a.iters,
            n_burn: a.burn,
            thin: a.thin,
        },
        hyper,
        threads: None,
    };
    let rows = bench::run_experiment(&suite)?;
    let csv = bench::to_csv(&rows);
    match &cli.out {
        Some(p) => atomic_write(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn load_fit(dir: &Path) -> Result<(RunConfig, Vec<io::SummaryRow>)> {
    let cfg = RunConfig::load(&dir.join(RUN_CONFIG_FILE))?;
    let rows = io::read_summary(&dir.join(SUMMARY_FILE))?;
    Ok((cfg, rows))
}

fn factors(cli: &Cli, a: &FitDirArgs) -> Result<()> {
    let (cfg, rows) = load_fit(&a.fit_dir)?;
    let data = load_data(&cfg)?;
    let (mean, intercept) = io::posterior_means(&rows, data.dims())?;
    let ranks = cfg.ranks.ok_or_else(|| Error::Config("run.cfg has no ranks".into()))?;
    let identified = sign_normalize(&hosvd(&mean, &ranks)?);
    let fs = extract_factors(&data, &identified, &intercept)?;
    let out = cli.out.clone().unwrap_or_else(|| a.fit_dir.clone());
    std::fs::create_dir_all(&out)?;
    atomic_write(&out.join(FACTORS_FILE), fs.to_csv().as_bytes())?;
    atomic_write(&out.join(PROJECTIONS_FILE), fs.projections_csv().as_bytes())?;
    Ok(())
}

fn volatility(cli: &Cli, a: &FitDirArgs) -> Result<()> {
    let rows = io::read_summary(&a.fit_dir.join(SUMMARY_FILE))?;
    let mut sd: Vec<(usize, &io::SummaryRow)> = rows
        .iter()
        .filter_map(|r| r.name.strip_prefix("sd_").and_then(|t| t.parse().ok()).map(|t| (t, r)))
        .collect();
    if sd.is_empty() {
        return Err(Error::Config("fit has no volatility component (homoskedastic regime)".into()));
    }
    sd.sort_by_key(|(t, _)| *t);
    let mut csv = String::from("t,mean,q05,q50,q95\n");
    for (t, r) in sd {
        csv.push_str(&format!("{t},{},{},{},{}\n", r.mean, r.q05, r.q50, r.q95));
    }
    let out = cli.out.clone().unwrap_or_else(|| a.fit_dir.join(VOLATILITY_FILE));
    atomic_write(&out, csv.as_bytes())
}

