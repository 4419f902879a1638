use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sqsdp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqsdp"))
        .args(args)
        .env("SQSDP_OUT_DIR", out)
        .output()
        .unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn solve_scalar_reaches_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let o = sqsdp(&["solve", "scalar-degenerate", "--perturb", "1e-2", "--seed", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(&dir.path().join("report.json"));
    assert_eq!(rep["status"], "kkt_reached");
    assert!(rep["final_sigma"].as_f64().unwrap() <= 1e-10);
    assert_eq!(rep["csv_schema"], "sqsdp-iterations/1");
    // the echoed config covers every default
    let solver = &rep["config"]["solver"];
    for key in ["tol_sigma", "max_iters", "hessian", "nu", "subproblem", "seed"] {
        assert!(solver.get(key).is_some(), "missing {key}");
    }
    let csv = fs::read_to_string(dir.path().join("iterations.csv")).unwrap();
    assert!(csv.starts_with("k,sigma,log10_sigma,err,log10_err,norm_delta,alpha,beta,gamma,"));
}

#[test]
fn max_iters_zero_stops_unless_already_kkt() {
    let dir = tempfile::tempdir().unwrap();
    let o = sqsdp(&["solve", "nonlinear-3x3", "--x0", "0.1,-0.1,0.1", "--max-iters", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = sqsdp(
        &["solve", "scalar-degenerate", "--x0", "0", "--z0", "0", "--max-iters", "0"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn unknown_problem_is_a_usage_error_listing_ids() {
    let dir = tempfile::tempdir().unwrap();
    let o = sqsdp(&["solve", "no-such-problem"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("scalar-degenerate") && err.contains("nonlinear-3x3"), "{err}");
}

#[test]
fn bad_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sqsdp(&["solve", "beta-2x2", "--hessian", "bfgs"], dir.path()).status.code(), Some(1));
    assert_eq!(sqsdp(&["solve", "beta-2x2", "--x0", "1,2,3"], dir.path()).status.code(), Some(1));
    assert_eq!(sqsdp(&["solve", "beta-2x2", "--z0", "1,2,3,4"], dir.path()).status.code(), Some(1));
    assert_eq!(sqsdp(&["frobnicate"], dir.path()).status.code(), Some(1));
}

#[test]
fn identical_commands_give_identical_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["solve", "nonlinear-3x3", "--perturb", "5e-2", "--seed", "9", "--hessian", "perturbed:0.5"];
    assert_eq!(sqsdp(&args, a.path()).status.code(), Some(0));
    assert_eq!(sqsdp(&args, b.path()).status.code(), Some(0));
    assert_eq!(
        fs::read(a.path().join("iterations.csv")).unwrap(),
        fs::read(b.path().join("iterations.csv")).unwrap()
    );
    assert_eq!(
        fs::read(a.path().join("report.json")).unwrap(),
        fs::read(b.path().join("report.json")).unwrap()
    );
}

#[test]
fn out_flag_overrides_environment() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let o = sqsdp(
        &["solve", "beta-2x2", "--perturb", "1e-2", "--out", flag_dir.path().to_str().unwrap()],
        env_dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_dir.path().join("report.json").exists());
    assert!(!env_dir.path().join("report.json").exists());
}

#[test]
fn solve_from_file_and_probe_without_reference() {
    let dir = tempfile::tempdir().unwrap();
    let text = sqsdp::problems::builtin_source("scalar-degenerate").unwrap();
    let cut = text.find("[reference]").unwrap();
    let path = dir.path().join("noref.toml");
    fs::write(&path, &text[..cut]).unwrap();
    let p = path.to_str().unwrap();

    let o = sqsdp(&["solve", p, "--x0", "0.3", "--z0", "0.1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&dir.path().join("report.json"))["config"]["reference_known"], false);

    let o = sqsdp(&["probe", p, "--what", "spectrum"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("reference"));
    assert_eq!(sqsdp(&["solve", p, "--perturb", "1e-2"], dir.path()).status.code(), Some(1));
}

#[test]
fn bench_default_suite_is_quadratic() {
    let dir = tempfile::tempdir().unwrap();
    let o = sqsdp(&["bench", "--trials", "3"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&dir.path().join("bench_summary.json"));
    let rows = summary["rows"].as_array().unwrap();
    assert_eq!(rows.len(), sqsdp::problems::registry_ids().len());
    for r in rows {
        assert_eq!(r["rate_class"], "quadratic", "{r}");
        assert_eq!(r["converged"], 3);
    }
    let csv = fs::read_to_string(dir.path().join("bench_summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), rows.len() + 1);
    assert!(dir.path().join("runs/beta-2x2/r1e-1_t2.csv").exists());
}

#[test]
fn bench_perturbed_hessian_is_superlinear_on_the_equality_problem() {
    let dir = tempfile::tempdir().unwrap();
    let o = sqsdp(
        &["bench", "--suite", "nondegenerate-2x2", "--trials", "10", "--hessian", "perturbed:0.5"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let summary = json(&dir.path().join("bench_summary.json"));
    let row = &summary["rows"][0];
    assert_eq!(row["rate_class"], "superlinear");
    assert_eq!(row["quadratic_runs"], 0);
}

#[test]
fn bench_rejects_empty_suite_and_flags_short_windows() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sqsdp(&["bench", "--suite", ""], dir.path()).status.code(), Some(1));
    assert_eq!(sqsdp(&["bench", "--suite", "nope"], dir.path()).status.code(), Some(1));
    // from 1e-3 the error leaves the rate window within two steps
    let o = sqsdp(&["bench", "--suite", "beta-2x2", "--radii", "1e-3", "--trials", "2"], dir.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rate window"));
}

#[test]
fn probes_report_spectrum_and_curvature() {
    let dir = tempfile::tempdir().unwrap();
    let o = sqsdp(&["probe", "scalar-degenerate", "--what", "spectrum"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let rep = json(&dir.path().join("probe.json"));
    assert_eq!(rep["partition"], serde_json::json!([0, 1, 0]));
    assert_eq!(rep["strict_complementarity"], false);
    assert!(rep["sosc"].is_null());

    let o = sqsdp(&["probe", "nondegenerate-2x2", "--what", "sosc", "--dirs", "50"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let rep = json(&dir.path().join("probe.json"));
    assert!(rep["sosc"]["min_curvature"].as_f64().unwrap() > 0.0);

    let o = sqsdp(
        &["probe", "affine-qsdp", "--what", "error-bound,spectrum", "--samples", "20"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let rep = json(&dir.path().join("probe.json"));
    assert_eq!(rep["radii"].as_array().unwrap().len(), 3);
}

#[test]
fn list_shows_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let o = sqsdp(&["list"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for id in sqsdp::problems::registry_ids() {
        assert!(text.contains(id));
    }
}
