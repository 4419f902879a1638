use std::path::PathBuf;

use clap::Args;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use sqsdp::model::PrimalDualPoint;
use sqsdp::outer::{self, HessianMode, IterationRecord, RateSummary, SolveStatus, SolverConfig};
use sqsdp::subqp::SubproblemConfig;
use sqsdp::symkernel::SymMat;

use crate::args::{self, Resolved};
use crate::artifact::{self, CSV_SCHEMA};
use crate::{status_label, CliError, EXIT_FAILURE, EXIT_MAX_ITERS, EXIT_OK};

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Registry id or path to a problem file.
    pub problem: String,
    /// Initial x, comma separated (default zeros).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "perturb")]
    pub x0: Option<Vec<f64>>,
    /// Initial y, comma separated (default zeros).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "perturb")]
    pub y0: Option<Vec<f64>>,
    /// Initial Z as d*d row-major entries (default zero).
    #[arg(long = "z0", alias = "Z0", value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "perturb")]
    pub z0: Option<Vec<f64>>,
    /// Start at v* plus a random perturbation of this sum-norm size.
    #[arg(long)]
    pub perturb: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// exact, fd, or perturbed:<exponent>[:<scale>].
    #[arg(long, default_value = "exact", value_parser = args::parse_hessian)]
    pub hessian: HessianMode,
    /// Stop once the KKT residual is at most this.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    /// Radius of the optional trust ball on the primal step.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Shift an indefinite H to be positive definite in each subproblem.
    #[arg(long)]
    pub convexify: bool,
    #[arg(long, env = "SQSDP_OUT_DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct StartEcho {
    perturb: Option<f64>,
    seed: u64,
    x0: Vec<f64>,
    y0: Vec<f64>,
    z0: Vec<f64>,
}

#[derive(Serialize)]
struct RateWindowEcho {
    lo: f64,
    hi: f64,
    min_records: usize,
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    problem: &'a str,
    source: &'a str,
    hessian: String,
    solver: &'a SolverConfig,
    start: StartEcho,
    reference_known: bool,
    rate_window: RateWindowEcho,
}

#[derive(Serialize)]
struct PointEcho {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
}

impl From<&PrimalDualPoint> for PointEcho {
    fn from(v: &PrimalDualPoint) -> Self {
        PointEcho {
            x: v.x.iter().copied().collect(),
            y: v.y.iter().copied().collect(),
            z: v.z.to_row_major(),
        }
    }
}

#[derive(Serialize)]
struct SolveArtifact<'a> {
    schema: &'static str,
    csv_schema: &'static str,
    config: ConfigEcho<'a>,
    status: SolveStatus,
    iterations: usize,
    final_sigma: f64,
    final_point: PointEcho,
    rate: &'a RateSummary,
    history: &'a [IterationRecord],
}

fn initial_point(a: &SolveArgs, r: &Resolved) -> Result<PrimalDualPoint, CliError> {
    let dims = r.spec.dims;
    if let Some(radius) = a.perturb {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(CliError::usage("start", format!("--perturb must be finite and >= 0, got {radius}")));
        }
        let vstar = args::require_reference(r, "--perturb")?;
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        return Ok(outer::perturb(vstar, radius, &mut rng));
    }
    let vec_of = |v: &Option<Vec<f64>>, len: usize, flag: &str| -> Result<DVector<f64>, CliError> {
        match v {
            None => Ok(DVector::zeros(len)),
            Some(v) if v.len() == len => Ok(DVector::from_column_slice(v)),
            Some(v) => Err(CliError::usage("start", format!("{flag} has {} entries, expected {len}", v.len()))),
        }
    };
    let x = vec_of(&a.x0, dims.n, "--x0")?;
    let y = vec_of(&a.y0, dims.m, "--y0")?;
    let z = match &a.z0 {
        None => SymMat::zeros(dims.d),
        Some(v) if v.len() == dims.d * dims.d => {
            let z = SymMat::from_row_slice(dims.d, v);
            if z.to_row_major().iter().zip(v).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + b.abs())) {
                return Err(CliError::usage("start", "--z0 is not symmetric"));
            }
            z
        }
        Some(v) => {
            return Err(CliError::usage(
                "start",
                format!("--z0 has {} entries, expected {} (d*d row-major)", v.len(), dims.d * dims.d),
            ))
        }
    };
    Ok(PrimalDualPoint::new(x, y, z))
}

pub fn run(a: &SolveArgs) -> Result<i32, CliError> {
    let r = args::resolve_problem(&a.problem)?;
    let v0 = initial_point(a, &r)?;
    let cfg = SolverConfig {
        tol_sigma: a.tol,
        max_iters: a.max_iters,
        hessian: a.hessian,
        nu: a.nu,
        subproblem: SubproblemConfig {
            convexify: a.convexify,
            ..Default::default()
        },
        seed: a.seed,
    };
    let reference = r.spec.reference_point();
    let report =
        outer::run_with_reference(&r.spec, &v0, &cfg, reference).map_err(|e| CliError::usage("solve", e.to_string()))?;

    let out = args::out_dir(&a.out);
    let echo = SolveArtifact {
        schema: "sqsdp-report/1",
        csv_schema: CSV_SCHEMA,
        config: ConfigEcho {
            problem: &r.spec.id,
            source: &r.source,
            hessian: args::hessian_label(a.hessian),
            solver: &cfg,
            start: StartEcho {
                perturb: a.perturb,
                seed: a.seed,
                x0: v0.x.iter().copied().collect(),
                y0: v0.y.iter().copied().collect(),
                z0: v0.z.to_row_major(),
            },
            reference_known: reference.is_some(),
            rate_window: RateWindowEcho {
                lo: outer::RATE_WINDOW_LO,
                hi: outer::RATE_WINDOW_HI,
                min_records: outer::MIN_RATE_RECORDS,
            },
        },
        status: report.status,
        iterations: report.iterations(),
        final_sigma: report.final_sigma(),
        final_point: (&report.final_point).into(),
        rate: &report.rate,
        history: &report.history,
    };
    let write = |name: &str, bytes: std::io::Result<Vec<u8>>| {
        let path = out.join(name);
        bytes
            .and_then(|b| artifact::write_atomic(&path, &b))
            .map_err(|e| CliError::usage("write", format!("{}: {e}", path.display())))
    };
    write("iterations.csv", artifact::iterations_csv(&report))?;
    write("report.json", artifact::json(&echo))?;

    println!(
        "{}: status={} iterations={} final_sigma={:e} rate={} out={}",
        r.spec.id,
        status_label(report.status),
        report.iterations(),
        report.final_sigma(),
        report.rate.class.as_str(),
        out.display()
    );
    Ok(match report.status {
        SolveStatus::KktReached => EXIT_OK,
        SolveStatus::MaxIters => EXIT_MAX_ITERS,
        SolveStatus::SubproblemFailure | SolveStatus::NumericalFailure => EXIT_FAILURE,
    })
}
