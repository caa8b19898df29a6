use std::path::Path;
use std::process::Command;

use btar::cli::run;
use btar::io::{ingest, read_summary};

fn btar(args: &[&str]) -> i32 {
    run(std::iter::once("btar").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate_small(dir: &Path, name: &str, seed: &str) -> std::path::PathBuf {
    let data = dir.join(name);
    let code = btar(&[
        "simulate", "--dgp", "lowrank", "--dims", "3,2,2", "--ranks", "2,1,1,1,2,1", "--T", "40", "--seed", seed, "--out",
        p(&data),
    ]);
    assert_eq!(code, 0);
    data
}

#[test]
fn simulate_writes_a_valid_series_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.csv");
    let code = btar(&[
        "simulate", "--dgp", "lowrank", "--dims", "5,5,5", "--ranks", "2,2,2,2,2,2", "--T", "200", "--out", p(&out),
    ]);
    assert_eq!(code, 0);
    let s = ingest(&out).unwrap();
    assert_eq!(s.dims(), [5, 5, 5]);
    assert_eq!(s.t_len(), 200);
    let head = std::fs::read_to_string(&out).unwrap();
    assert!(head.starts_with("# dims=5,5,5 T=201\nt,i1,i2,i3,value\n"));
    for kind in ["lowrank_sparse", "dense_var"] {
        let o = dir.path().join(format!("{kind}.csv"));
        assert_eq!(btar(&["simulate", "--dgp", kind, "--dims", "2,2,2", "--T", "30", "--out", p(&o)]), 0);
    }
}

#[test]
fn fit_then_factors_gives_rank_product_columns() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate_small(dir.path(), "d.csv", "3");
    let fit = dir.path().join("fit");
    let code = btar(&[
        "fit", "--data", p(&data), "--ranks", "2,1,1,1,2,1", "--iters", "80", "--burn", "40", "--thin", "2", "--raw-draws",
        "--out", p(&fit),
    ]);
    assert_eq!(code, 0);
    for f in ["summary.csv", "run.cfg", "diagnostics.csv", "draws.bin"] {
        assert!(fit.join(f).exists(), "{f}");
    }
    let draws = btar::io::read_draws_bin(&fit.join("draws.bin")).unwrap();
    assert_eq!(draws.len(), 20);
    let rows = read_summary(&fit.join("summary.csv")).unwrap();
    assert_eq!(rows.iter().filter(|r| r.name.starts_with("B_")).count(), 144);
    assert!(rows.iter().all(|r| r.q05 <= r.q50 && r.q50 <= r.q95));

    assert_eq!(btar(&["factors", p(&fit)]), 0);
    let csv = std::fs::read_to_string(fit.join("factors.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    // t, R1R2R3 = 2 response and R4R5R6 = 2 predictor columns.
    assert_eq!(header, vec!["t", "resp_1_1_1", "resp_2_1_1", "pred_1_1_1", "pred_1_2_1"]);
    assert_eq!(csv.lines().count(), 1 + 40);
    assert!(fit.join("projections.csv").exists());

    let other = dir.path().join("elsewhere");
    assert_eq!(btar(&["factors", p(&fit), "--out", p(&other)]), 0);
    assert_eq!(std::fs::read(other.join("factors.csv")).unwrap(), csv.as_bytes());
}

#[test]
fn repeated_seeded_fits_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate_small(dir.path(), "d.csv", "1");
    let run_fit = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let code = btar(&[
            "fit", "--data", p(&data), "--ranks", "1", "--regime", "csv", "--iters", "60", "--burn", "30", "--seed", seed, "--out",
            p(&out),
        ]);
        assert_eq!(code, 0);
        std::fs::read(out.join("summary.csv")).unwrap()
    };
    let a = run_fit("a", "7");
    let b = run_fit("b", "7");
    let c = run_fit("c", "8");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    simulate_small(dir.path(), "d.csv", "2");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "data = d.csv\nranks = 1\nregime = outlier\nn_iter = 500\nn_burn = 250\n").unwrap();
    let out = dir.path().join("fit");
    let code = btar(&[
        "fit", "--config", p(&cfg), "--iters", "50", "--burn", "25", "--set", "core_var=5", "--out", p(&out),
    ]);
    assert_eq!(code, 0);
    let saved = btar::io::RunConfig::load(&out.join("run.cfg")).unwrap();
    assert_eq!((saved.n_iter, saved.n_burn), (50, 25));
    assert_eq!(saved.priors.core_var, 5.0);
    assert_eq!(saved.regime, btar::model::state::Regime::Outlier);

    assert_eq!(btar(&["volatility", p(&out)]), 0);
    let vol = std::fs::read_to_string(out.join("volatility.csv")).unwrap();
    assert!(vol.starts_with("t,mean,q05,q50,q95\n1,"));
    assert_eq!(vol.lines().count(), 1 + 40);
    assert!(vol.lines().skip(1).all(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap() >= 1.0));
}

#[test]
fn volatility_needs_a_volatility_regime() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate_small(dir.path(), "d.csv", "4");
    let out = dir.path().join("fit");
    assert_eq!(btar(&["fit", "--data", p(&data), "--ranks", "1", "--iters", "20", "--burn", "10", "--out", p(&out)]), 0);
    assert_eq!(btar(&["volatility", p(&out)]), 2);
}

#[test]
fn benchmark_writes_csv_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let code = btar(&[
        "benchmark", "--dgp", "lowrank", "--dims", "2,2,2", "--ranks", "1", "--T", "30", "--estimators", "BVAR-Minn,BTAR-TK",
        "--replications", "2", "--iters", "40", "--burn", "20", "--thin", "1", "--threads", "2", "--out", p(&out),
    ]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("dgp,dims,ranks,T,estimator,seed,rmse,relative_rmse,wall_ms"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn usage_and_config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(btar(&["frobnicate"]), 2);
    assert_eq!(btar(&["simulate", "--bogus", "1"]), 2);
    assert_eq!(btar(&[]), 2);
    assert_eq!(btar(&["--help"]), 0);
    assert_eq!(btar(&["simulate", "--T", "10"]), 2, "missing --out");
    assert_eq!(btar(&["simulate", "--dgp", "weird", "--out", p(&dir.path().join("x"))]), 2);
    let missing = dir.path().join("nope.csv");
    assert_eq!(btar(&["fit", "--data", p(&missing), "--ranks", "1", "--out", p(dir.path())]), 2);
    let data = simulate_small(dir.path(), "d.csv", "5");
    assert_eq!(btar(&["fit", "--data", p(&data), "--ranks", "4", "--iters", "10", "--burn", "5", "--out", p(dir.path())]), 2);
    assert_eq!(btar(&["fit", "--data", p(&data), "--ranks", "1", "--set", "colour=red", "--out", p(dir.path())]), 2);
    assert_eq!(btar(&["fit", "--data", p(&data), "--out", p(dir.path())]), 2, "no ranks");
    assert_eq!(btar(&["factors", p(&dir.path().join("no-fit"))]), 2);
}

#[test]
fn output_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate_small(dir.path(), "d.csv", "6");
    // A regular file where the output directory should go.
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "x").unwrap();
    let code = btar(&["fit", "--data", p(&data), "--ranks", "1", "--iters", "10", "--burn", "5", "--out", p(&blocker)]);
    assert_eq!(code, 3);
}

#[test]
fn binary_reports_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_btar");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let ok = Command::new(exe)
        .args(["simulate", "--dims", "2,2,1", "--ranks", "1", "--T", "5", "--out", p(&out)])
        .status()
        .unwrap();
    assert_eq!(ok.code(), Some(0));
    let bad = Command::new(exe).arg("nonsense").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("Usage"));
}
