use std::path::PathBuf;
use std::process::Command;

use projclt_cli::run_with;

fn args(list: &[&str]) -> Vec<String> {
    std::iter::once("projclt").chain(list.iter().copied()).map(String::from).collect()
}

fn run(list: &[&str], env_threads: Option<&str>) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_with(&args(list), env_threads.map(String::from), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn two_point_prints_atoms() {
    let (code, out, _) = run(&["two-point", "--sigma2", "1", "--beta3", "2"], None);
    assert_eq!(code, 0);
    assert!(out.contains("m = 2.4142136"), "{out}");
    assert!(out.contains("m' = -0.4142136"), "{out}");
    assert!(out.contains("t = 0.1464466"), "{out}");
}

#[test]
fn two_point_requires_both_moments() {
    let (code, _, err) = run(&["two-point", "--sigma2", "1"], None);
    assert_eq!(code, 2);
    assert!(err.contains("beta3"));
    let (code, _, err) = run(&["two-point", "--sigma2", "-1", "--beta3", "0"], None);
    assert_eq!(code, 2);
    assert!(err.contains("sigma2"), "{err}");
    let (code, out, _) = run(&["two-point", "--sigma2", "1", "--beta3", "-2"], None);
    assert_eq!(code, 0);
    assert!(out.contains("m = 0.4142136"), "{out}");
}

#[test]
fn sweep_writes_rows_and_fit_footer() {
    let path = tmp("r.csv");
    let p = path.to_str().unwrap();
    let (code, _, err) = run(
        &["sweep", "--model", "iid-rademacher", "--method", "cf", "--n", "64,128,256", "--seed", "7", "--out", p],
        None,
    );
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(!text.contains('\r'));
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "n,mean,se,floor_flag");
    assert_eq!(data.len(), 4);
    assert!(text.lines().any(|l| l.starts_with("# fit: ")));
    assert!(text.contains("# config: seed=7"));
}

#[test]
fn sweep_rejects_small_n() {
    let (code, _, err) = run(&["sweep", "--n", "1,2"], None);
    assert_eq!(code, 2);
    assert!(err.contains("n >= 2"), "{err}");
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_projclt");
    let status = Command::new(bin).args(["sweep", "--n", "1,2"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = Command::new(bin).args(["frobnicate"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let out = Command::new(bin).args(["two-point", "--sigma2", "1", "--beta3", "2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("m = 2.4142136"));
}

#[test]
fn unknown_keys_are_config_errors() {
    let cfg = tmp("bad.cfg");
    std::fs::write(&cfg, "model = iid\nwibble = 3\n").unwrap();
    let (code, _, err) = run(&["sweep", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(code, 2);
    assert!(err.contains("wibble"));
    let (code, _, err) = run(&["sweep", "--set", "zeta=1"], None);
    assert_eq!(code, 2);
    assert!(err.contains("zeta"));
    let (code, _, err) = run(&["two-point", "--sigma2", "1", "--beta3", "0", "--n", "4"], None);
    assert_eq!(code, 2);
    assert!(err.contains("`n`"));
    let (code, _, err) = run(&["sweep", "--n", "8", "--set", "kappa=abc"], None);
    assert_eq!(code, 2);
    assert!(err.contains("kappa"));
}

#[test]
fn flags_override_config_file() {
    let cfg = tmp("sweep.cfg");
    std::fs::write(&cfg, "# sweep settings\nmethod = synthetic:0.5\nn = 8,16\nseed = 3\n").unwrap();
    let (code, out, err) = run(&["sweep", "--config", cfg.to_str().unwrap(), "--n", "8,16,32"], None);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("# config: n=8,16,32"));
    assert!(out.contains("# config: seed=3"));
    assert_eq!(out.lines().filter(|l| !l.starts_with('#')).count(), 4);
    let fit = out.lines().find(|l| l.starts_with("# fit: ")).unwrap();
    let slope: f64 = fit.split("slope=").nth(1).unwrap().parse().unwrap();
    assert!((slope + 1.0).abs() < 1e-12, "{fit}");
}

#[test]
fn json_output_round_trips() {
    let (code, out, _) = run(&["sweep", "--method", "synthetic:0.7", "--n", "4,8,16", "--format", "json"], None);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["config"]["method"], "synthetic(0.7/n)");
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1]["mean"].as_f64().unwrap(), 0.7 / 8.0);
    let again = serde_json::to_string(&v["rows"]).unwrap();
    let back: serde_json::Value = serde_json::from_str(&again).unwrap();
    assert_eq!(back, v["rows"]);
}

#[test]
fn output_is_identical_across_reruns_and_threads() {
    let base = ["dist", "--model", "markov", "--set", "N=40", "--method", "empirical", "--n", "16,32", "--rtheta", "4", "--rx", "3000", "--seed", "11"];
    let (c1, a, _) = run(&[&base[..], &["--threads", "1"]].concat(), None);
    let (c2, b, _) = run(&[&base[..], &["--threads", "4"]].concat(), None);
    let (c3, c, _) = run(&base, Some("2"));
    assert_eq!((c1, c2, c3), (0, 0, 0));
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(a.lines().filter(|l| !l.starts_with('#')).count(), 9);
}

#[test]
fn thread_setting_comes_from_the_environment() {
    let (code, _, err) = run(&["two-point", "--sigma2", "1", "--beta3", "0"], Some("none"));
    assert_eq!(code, 2);
    assert!(err.contains("threads"));
    let (code, _, _) = run(&["two-point", "--sigma2", "1", "--beta3", "0", "--threads", "auto"], Some("none"));
    assert_eq!(code, 0);
}

#[test]
fn gamma_for_markov_and_arch() {
    let (code, out, err) = run(&["gamma", "--model", "markov", "--set", "N=30", "--vmax", "6", "--ell-max", "2"], None);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("lag,g02,g12,g22,g13,gamma"));
    assert!(out.contains("# condition: "));
    assert!(out.contains("# beta_mixing_upper_bound_surrogate: "));
    let (code, out, err) = run(
        &["gamma", "--model", "arch-gaussian", "--set", "J=8", "--vmax", "4", "--ell-max", "1", "--rx", "200", "--format", "json"],
        None,
    );
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    assert!(v["rows"][0]["se_g02"].is_number());
    let (code, _, err) = run(&["gamma", "--model", "iid"], None);
    assert_eq!(code, 2);
    assert!(err.contains("model"));
}

#[test]
fn regress_reports_route_gap() {
    let (code, out, err) = run(&["regress", "--n", "2,5", "--rx", "500", "--model", "iid-gaussian"], None);
    assert_eq!(code, 0, "{err}");
    let rows: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "n,noise,replicates,kappa,se,max_route_gap,seed");
    for row in &rows[1..] {
        let gap: f64 = row.split(',').nth(5).unwrap().parse().unwrap();
        assert!(gap < 1e-10);
    }
}

#[test]
fn runtime_errors_exit_one() {
    let (code, _, _) = run(&["sweep", "--method", "synthetic:1", "--n", "4,8", "--out", "/nonexistent-dir/x.csv"], None);
    assert_eq!(code, 1);
    let (code, _, err) = run(&["dist", "--model", "markov", "--method", "cf"], None);
    assert_eq!(code, 2);
    assert!(err.contains("method"));
}

#[test]
fn selftest_passes() {
    let (code, out, _) = run(&["selftest"], None);
    assert_eq!(code, 0, "{out}");
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 4);
}
