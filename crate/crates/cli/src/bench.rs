use std::path::PathBuf;

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use sqsdp::outer::{self, HessianMode, RateClass, SolveReport, SolveStatus, SolverConfig};
use sqsdp::problems::{self, ProblemSpec, Tag};

use crate::args;
use crate::artifact::{self, CSV_SCHEMA};
use crate::{CliError, EXIT_BENCH_RATE, EXIT_OK};

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// `all`, a tag (srcq, sosc, strict_complementarity, beta_nonempty) or
    /// comma-separated registry ids.
    #[arg(long, default_value = "all")]
    pub suite: String,
    /// Perturbation radii of the starting points, comma separated.
    #[arg(long, default_value = "1e-1", value_delimiter = ',')]
    pub radii: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    /// Trial `t` draws its start with seed `seed + t`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "exact", value_parser = args::parse_hessian)]
    pub hessian: HessianMode,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    /// Worker threads (default: one per core).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, env = "SQSDP_OUT_DIR")]
    pub out: Option<PathBuf>,
}

fn select(suite: &str) -> Result<Vec<ProblemSpec>, CliError> {
    let all = problems::registry();
    let chosen: Vec<ProblemSpec> = if suite == "all" {
        all
    } else if let Some(tag) = Tag::parse(suite) {
        all.into_iter().filter(|s| s.has_tag(tag)).collect()
    } else {
        let mut out = Vec::new();
        for id in suite.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            out.push(problems::builtin(id).ok_or_else(|| {
                CliError::usage(
                    "suite",
                    format!("unknown problem '{id}'; known ids: {}", problems::registry_ids().join(", ")),
                )
            })?);
        }
        out
    };
    if chosen.is_empty() {
        return Err(CliError::usage("suite", format!("suite '{suite}' selects no problems")));
    }
    Ok(chosen)
}

struct Run {
    problem: usize,
    radius: usize,
    trial: usize,
    report: SolveReport,
}

#[derive(Serialize, Clone)]
pub struct SummaryRow {
    pub problem: String,
    pub radius: f64,
    pub trials: usize,
    pub converged: usize,
    pub median_iterations: f64,
    /// Most frequent class among runs with enough data in the rate window.
    pub rate_class: String,
    pub max_quadratic_ratio: Option<f64>,
    pub classified_runs: usize,
    pub quadratic_runs: usize,
    pub superlinear_runs: usize,
    pub other_runs: usize,
    /// Tagged SRCQ and SOSC, so the exact-Hessian runs must be quadratic.
    pub regular: bool,
    pub pass: bool,
}

#[derive(Serialize)]
struct BenchConfigEcho<'a> {
    suite: &'a str,
    problems: Vec<&'a str>,
    radii: &'a [f64],
    trials: usize,
    seed: u64,
    hessian: String,
    solver: &'a SolverConfig,
    rate_window: (f64, f64, usize),
}

#[derive(Serialize)]
struct BenchSummary<'a> {
    schema: &'static str,
    csv_schema: &'static str,
    config: BenchConfigEcho<'a>,
    rows: &'a [SummaryRow],
    failures: Vec<String>,
}

fn median(mut v: Vec<usize>) -> f64 {
    v.sort_unstable();
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2] as f64,
        _ => (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0,
    }
}

/// Most frequent classified rate; ties go to the slower class.
fn majority(classes: &[RateClass]) -> RateClass {
    let order = [RateClass::None, RateClass::Linear, RateClass::Superlinear, RateClass::Quadratic];
    let mut best = RateClass::InsufficientData;
    let mut best_n = 0;
    for c in order {
        let n = classes.iter().filter(|&&x| x == c).count();
        if n > best_n {
            best = c;
            best_n = n;
        }
    }
    best
}

fn summarize(spec: &ProblemSpec, radius: f64, runs: &[&Run], exact: bool) -> SummaryRow {
    let classes: Vec<RateClass> = runs
        .iter()
        .map(|r| r.report.rate.class)
        .filter(|c| *c != RateClass::InsufficientData)
        .collect();
    let count = |c: RateClass| classes.iter().filter(|&&x| x == c).count();
    let converged = runs.iter().filter(|r| r.report.status == SolveStatus::KktReached).count();
    let class = majority(&classes);
    let regular = spec.is_regular();
    let pass = !(exact && regular)
        || (converged == runs.len() && !classes.is_empty() && count(RateClass::Quadratic) == classes.len());
    SummaryRow {
        problem: spec.id.clone(),
        radius,
        trials: runs.len(),
        converged,
        median_iterations: median(runs.iter().map(|r| r.report.iterations()).collect()),
        rate_class: class.as_str().to_string(),
        max_quadratic_ratio: runs
            .iter()
            .filter_map(|r| r.report.rate.max_quadratic_ratio)
            .fold(None, |m: Option<f64>, q| Some(m.map_or(q, |m| m.max(q)))),
        classified_runs: classes.len(),
        quadratic_runs: count(RateClass::Quadratic),
        superlinear_runs: count(RateClass::Superlinear),
        other_runs: classes.len() - count(RateClass::Quadratic) - count(RateClass::Superlinear),
        regular,
        pass,
    }
}

fn summary_csv(rows: &[SummaryRow]) -> std::io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "problem",
        "radius",
        "trials",
        "converged",
        "median_iterations",
        "rate_class",
        "max_quadratic_ratio",
        "classified_runs",
        "quadratic_runs",
        "superlinear_runs",
        "other_runs",
        "regular",
        "pass",
    ])?;
    for r in rows {
        w.write_record([
            r.problem.clone(),
            format!("{:e}", r.radius),
            r.trials.to_string(),
            r.converged.to_string(),
            r.median_iterations.to_string(),
            r.rate_class.clone(),
            r.max_quadratic_ratio.map(|q| format!("{q:e}")).unwrap_or_default(),
            r.classified_runs.to_string(),
            r.quadratic_runs.to_string(),
            r.superlinear_runs.to_string(),
            r.other_runs.to_string(),
            r.regular.to_string(),
            r.pass.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))
}

pub fn run(a: &BenchArgs) -> Result<i32, CliError> {
    let specs = select(&a.suite)?;
    if a.radii.is_empty() || a.radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(CliError::usage("radii", "--radii needs at least one positive finite value"));
    }
    if a.trials == 0 {
        return Err(CliError::usage("trials", "--trials must be at least 1"));
    }
    for s in &specs {
        if s.reference_point().is_none() {
            return Err(CliError::usage("suite", format!("problem '{}' has no reference point", s.id)));
        }
    }
    let cfg = SolverConfig {
        tol_sigma: a.tol,
        max_iters: a.max_iters,
        hessian: a.hessian,
        seed: a.seed,
        ..Default::default()
    };
    let out = args::out_dir(&a.out);

    let jobs: Vec<(usize, usize, usize)> = (0..specs.len())
        .flat_map(|p| (0..a.radii.len()).flat_map(move |r| (0..a.trials).map(move |t| (p, r, t))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::usage("jobs", e.to_string()))?;
    let runs: Vec<Run> = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, r, t)| -> Result<Run, CliError> {
                let spec = &specs[p];
                let vstar = spec.reference_point().unwrap();
                let seed = a.seed.wrapping_add(t as u64);
                let v0 = outer::perturb(vstar, a.radii[r], &mut ChaCha8Rng::seed_from_u64(seed));
                let report = outer::run_with_reference(spec, &v0, &SolverConfig { seed, ..cfg.clone() }, Some(vstar))
                    .map_err(|e| CliError::usage("bench", e.to_string()))?;
                let path = out
                    .join("runs")
                    .join(&spec.id)
                    .join(format!("r{:e}_t{t}.csv", a.radii[r]));
                artifact::iterations_csv(&report)
                    .and_then(|b| artifact::write_atomic(&path, &b))
                    .map_err(|e| CliError::usage("write", format!("{}: {e}", path.display())))?;
                Ok(Run {
                    problem: p,
                    radius: r,
                    trial: t,
                    report,
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    let exact = a.hessian == HessianMode::Exact;
    let mut rows = Vec::new();
    for (p, spec) in specs.iter().enumerate() {
        for (ri, &radius) in a.radii.iter().enumerate() {
            let mut group: Vec<&Run> = runs.iter().filter(|x| x.problem == p && x.radius == ri).collect();
            group.sort_by_key(|x| x.trial);
            rows.push(summarize(spec, radius, &group, exact));
        }
    }
    let failures: Vec<String> = rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| {
            let why = if r.converged < r.trials {
                format!("{}/{} runs reached the KKT tolerance", r.converged, r.trials)
            } else if r.classified_runs == 0 {
                "no run had enough records in the rate window; use a larger radius".to_string()
            } else {
                format!("{}/{} classified runs quadratic", r.quadratic_runs, r.classified_runs)
            };
            format!("{} at radius {:e}: {why}", r.problem, r.radius)
        })
        .collect();

    let summary = BenchSummary {
        schema: "sqsdp-bench/1",
        csv_schema: CSV_SCHEMA,
        config: BenchConfigEcho {
            suite: &a.suite,
            problems: specs.iter().map(|s| s.id.as_str()).collect(),
            radii: &a.radii,
            trials: a.trials,
            seed: a.seed,
            hessian: args::hessian_label(a.hessian),
            solver: &cfg,
            rate_window: (outer::RATE_WINDOW_LO, outer::RATE_WINDOW_HI, outer::MIN_RATE_RECORDS),
        },
        rows: &rows,
        failures: failures.clone(),
    };
    let write = |name: &str, bytes: std::io::Result<Vec<u8>>| {
        let path = out.join(name);
        bytes
            .and_then(|b| artifact::write_atomic(&path, &b))
            .map_err(|e| CliError::usage("write", format!("{}: {e}", path.display())))
    };
    write("bench_summary.csv", summary_csv(&rows))?;
    write("bench_summary.json", artifact::json(&summary))?;

    println!(
        "{:<20} {:>8} {:>9} {:>8} {:<18} {:>12}",
        "problem", "radius", "converged", "med_it", "rate", "max_q_ratio"
    );
    for r in &rows {
        println!(
            "{:<20} {:>8.0e} {:>5}/{:<3} {:>8} {:<18} {:>12}",
            r.problem,
            r.radius,
            r.converged,
            r.trials,
            r.median_iterations,
            r.rate_class,
            r.max_quadratic_ratio.map(|q| format!("{q:.3e}")).unwrap_or_else(|| "-".into())
        );
    }
    for f in &failures {
        eprintln!("rate check failed: {f}");
    }
    Ok(if failures.is_empty() { EXIT_OK } else { EXIT_BENCH_RATE })
}
