//! The outer iteration: `v_{k+1} = (x_k + ξ̄, ζ̄, Σ̄)` where `(ξ̄, ζ̄, Σ̄)`
//! solves the stabilized subproblem at `v_k` with penalty `σ_k = σ(v_k)`.
//!
//! There is no globalization; the method is local and divergence from poor
//! starting points is reported, not repaired.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{contract, Result};
use crate::model::{self, NsdpProblem, PrimalDualPoint};
use crate::subqp::{StabilizedSubproblem, SubproblemConfig, SubproblemPoint, SubproblemStatus};
use crate::symkernel;

/// How `H(v)` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HessianMode {
    /// `∇²ₓₓL(v)`.
    Exact,
    /// `∇²ₓₓL(v) + scale·σ(v)^exponent·I`.
    Perturbed { exponent: f64, scale: f64 },
    /// Central differences of `∇ₓL`.
    FiniteDifference,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    pub tol_sigma: f64,
    pub max_iters: usize,
    pub hessian: HessianMode,
    pub nu: Option<f64>,
    pub subproblem: SubproblemConfig,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_sigma: 1e-10,
            max_iters: 50,
            hessian: HessianMode::Exact,
            nu: None,
            subproblem: SubproblemConfig::default(),
            seed: 0,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol_sigma > 0.0) {
            return Err(contract(format!("tol_sigma must be positive, got {:e}", self.tol_sigma)));
        }
        if let HessianMode::Perturbed { exponent, scale } = self.hessian {
            if !exponent.is_finite() || !scale.is_finite() || scale < 0.0 {
                return Err(contract("perturbed hessian needs finite exponent and scale >= 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    KktReached,
    MaxIters,
    SubproblemFailure,
    /// `σ(v_k)` became non-finite or the eigensolver failed on an iterate.
    NumericalFailure,
}

/// Statistics of the subproblem solved at one iterate.
#[derive(Debug, Clone, Serialize)]
pub struct SubproblemStats {
    pub newton_iters: usize,
    pub splitting_iters: usize,
    pub residual: f64,
    pub status: SubproblemStatus,
    pub ball_multiplier: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub sigma: f64,
    /// `‖v_k − v*‖` when a reference point is known.
    pub err: Option<f64>,
    /// `‖(ξ̄, ζ̄ − y_k, Σ̄ − Z_k)‖`; absent on the final record.
    pub norm_delta: Option<f64>,
    /// `(|α|, |β|, |γ|)` of `X(x_k) − Z_k`.
    pub partition: (usize, usize, usize),
    pub subproblem: Option<SubproblemStats>,
    #[serde(skip)]
    pub point: PrimalDualPoint,
    #[serde(skip)]
    pub step: Option<SubproblemPoint>,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub final_point: PrimalDualPoint,
    pub history: Vec<IterationRecord>,
    pub rate: RateSummary,
}

impl SolveReport {
    pub fn final_sigma(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.sigma)
    }

    /// Number of subproblems solved.
    pub fn iterations(&self) -> usize {
        self.history.iter().filter(|r| r.step.is_some()).count()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.sigma).collect()
    }

    /// `‖v_k − v*‖` for every record, when known.
    pub fn errors(&self) -> Option<Vec<f64>> {
        self.history.iter().map(|r| r.err).collect()
    }
}

/// `H(v)` under the configured mode.
pub fn hessian<P: NsdpProblem + ?Sized>(prob: &P, v: &PrimalDualPoint, sigma: f64, mode: HessianMode) -> DMatrix<f64> {
    match mode {
        HessianMode::Exact => model::hess_lagrangian(prob, v),
        HessianMode::Perturbed { exponent, scale } => {
            let n = prob.dims().n;
            let eps = if scale == 0.0 { 0.0 } else { scale * sigma.powf(exponent) };
            model::hess_lagrangian(prob, v) + DMatrix::identity(n, n) * eps
        }
        HessianMode::FiniteDifference => {
            let n = prob.dims().n;
            let mut h = DMatrix::zeros(n, n);
            let mut vp = v.clone();
            for j in 0..n {
                let step = model::fd_step(v.x[j]);
                vp.x[j] = v.x[j] + step;
                let gp = model::grad_lagrangian(prob, &vp);
                vp.x[j] = v.x[j] - step;
                let gm = model::grad_lagrangian(prob, &vp);
                vp.x[j] = v.x[j];
                h.set_column(j, &((gp - gm) / (2.0 * step)));
            }
            (&h + h.transpose()) * 0.5
        }
    }
}

fn partition_sizes<P: NsdpProblem + ?Sized>(prob: &P, v: &PrimalDualPoint) -> (usize, usize, usize) {
    let m = &prob.x_mat(&v.x) - &v.z;
    match symkernel::eig(&m) {
        Ok(dec) => symkernel::partition(&dec, symkernel::default_tol(&m)).sizes(),
        Err(_) => (0, 0, 0),
    }
}

/// Run the outer iteration from `v0`.
pub fn run<P: NsdpProblem + ?Sized>(prob: &P, v0: &PrimalDualPoint, cfg: &SolverConfig) -> Result<SolveReport> {
    run_with_reference(prob, v0, cfg, None)
}

/// As [`run`], additionally recording `‖v_k − v*‖` against `reference`.
pub fn run_with_reference<P: NsdpProblem + ?Sized>(
    prob: &P,
    v0: &PrimalDualPoint,
    cfg: &SolverConfig,
    reference: Option<&PrimalDualPoint>,
) -> Result<SolveReport> {
    cfg.validate()?;
    if v0.dims() != prob.dims() {
        return Err(contract(format!(
            "initial point has dims {:?}, problem has {:?}",
            v0.dims(),
            prob.dims()
        )));
    }
    if let Some(r) = reference {
        if r.dims() != prob.dims() {
            return Err(contract("reference point dimensions do not match the problem"));
        }
    }

    let mut v = v0.clone();
    let mut history = Vec::new();
    let status = loop {
        let k = history.len();
        let sigma = model::kkt_residual(prob, &v).unwrap_or(f64::NAN);
        let mut rec = IterationRecord {
            k,
            sigma,
            err: reference.map(|r| v.dist(r)),
            norm_delta: None,
            partition: partition_sizes(prob, &v),
            subproblem: None,
            point: v.clone(),
            step: None,
        };
        if !sigma.is_finite() || !v.is_finite() {
            history.push(rec);
            break SolveStatus::NumericalFailure;
        }
        if sigma <= cfg.tol_sigma {
            history.push(rec);
            break SolveStatus::KktReached;
        }
        if k >= cfg.max_iters {
            history.push(rec);
            break SolveStatus::MaxIters;
        }

        let h = hessian(prob, &v, sigma, cfg.hessian);
        let sp = StabilizedSubproblem::build(prob, &v, h, sigma, cfg.nu)?;
        let sol = sp.solve(&cfg.subproblem);
        rec.subproblem = Some(SubproblemStats {
            newton_iters: sol.newton_iters,
            splitting_iters: sol.splitting_iters,
            residual: sol.kkt_res,
            status: sol.status,
            ball_multiplier: sol.ball_multiplier,
        });
        rec.norm_delta = Some(
            sol.point.xi.norm() + (&sol.point.zeta - &v.y).norm() + (&sol.point.big_sigma - &v.z).frob_norm(),
        );
        if sol.status == SubproblemStatus::Failed {
            rec.step = Some(sol.point);
            history.push(rec);
            break SolveStatus::SubproblemFailure;
        }
        let next = PrimalDualPoint::new(&v.x + &sol.point.xi, sol.point.zeta.clone(), sol.point.big_sigma.clone());
        rec.step = Some(sol.point);
        history.push(rec);
        v = next;
    };

    let rate = match reference {
        Some(_) => {
            let errs: Vec<f64> = history.iter().filter_map(|r| r.err).collect();
            rate_estimate(&errs, RateSource::Error)
        }
        None => rate_estimate(&history.iter().map(|r| r.sigma).collect::<Vec<_>>(), RateSource::Sigma),
    };
    Ok(SolveReport {
        status,
        final_point: v,
        history,
        rate,
    })
}

/// Lower edge of the rate window; smaller values are roundoff-dominated.
pub const RATE_WINDOW_LO: f64 = 1e-11;
pub const RATE_WINDOW_HI: f64 = 1e-1;
pub const MIN_RATE_RECORDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateClass {
    Quadratic,
    Superlinear,
    Linear,
    None,
    InsufficientData,
}

impl RateClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            RateClass::Quadratic => "quadratic",
            RateClass::Superlinear => "superlinear",
            RateClass::Linear => "linear",
            RateClass::None => "none",
            RateClass::InsufficientData => "insufficient_data",
        }
    }
}

/// Which sequence the rate was measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSource {
    /// `‖v_k − v*‖`.
    Error,
    /// `σ(v_k)`, a proxy when `v*` is unknown.
    Sigma,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateSummary {
    pub class: RateClass,
    pub source: RateSource,
    /// Number of consecutive records inside the window.
    pub window_len: usize,
    /// `e_{k+1}/e_k` over the window.
    pub linear_ratios: Vec<f64>,
    /// `e_{k+1}/e_k²` over the window.
    pub quadratic_ratios: Vec<f64>,
    pub max_quadratic_ratio: Option<f64>,
    /// `max/min` of the quadratic ratios.
    pub quadratic_spread: Option<f64>,
}

/// Classify the convergence of a sequence of errors.
///
/// Only pairs `(e_k, e_{k+1})` with both values in
/// `[RATE_WINDOW_LO, RATE_WINDOW_HI]` are used, and at least
/// `MIN_RATE_RECORDS` values must lie in the window.
///
/// - quadratic: `max/min` of `e_{k+1}/e_k²` is at most 100 and the last
///   ratio `e_{k+1}/e_k` is at least 10× below the one before;
/// - superlinear: `e_{k+1}/e_k` strictly decreasing, ending below `1e-2`;
/// - linear: all `e_{k+1}/e_k < 1`; otherwise none.
pub fn rate_estimate(errs: &[f64], source: RateSource) -> RateSummary {
    let in_window = |e: f64| (RATE_WINDOW_LO..=RATE_WINDOW_HI * (1.0 + 1e-9)).contains(&e);
    let window_len = errs.iter().filter(|&&e| in_window(e)).count();
    let pairs: Vec<(f64, f64)> = errs
        .windows(2)
        .filter(|w| in_window(w[0]) && in_window(w[1]))
        .map(|w| (w[0], w[1]))
        .collect();
    let linear_ratios: Vec<f64> = pairs.iter().map(|&(a, b)| b / a).collect();
    let quadratic_ratios: Vec<f64> = pairs.iter().map(|&(a, b)| b / (a * a)).collect();
    let max_q = quadratic_ratios.iter().cloned().fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
    let min_q = quadratic_ratios.iter().cloned().fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.min(r))));
    let spread = match (max_q, min_q) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    };

    let class = if window_len < MIN_RATE_RECORDS || linear_ratios.len() < 2 {
        RateClass::InsufficientData
    } else {
        let l = linear_ratios.len();
        let tail_drops = linear_ratios[l - 1] <= linear_ratios[l - 2] / 10.0;
        let decreasing = linear_ratios.windows(2).all(|w| w[1] < w[0]);
        if spread.is_some_and(|s| s <= 100.0) && tail_drops {
            RateClass::Quadratic
        } else if decreasing && linear_ratios[l - 1] < 1e-2 {
            RateClass::Superlinear
        } else if linear_ratios.iter().all(|&r| r < 1.0) {
            RateClass::Linear
        } else {
            RateClass::None
        }
    };
    RateSummary {
        class,
        source,
        window_len,
        linear_ratios,
        quadratic_ratios,
        max_quadratic_ratio: max_q,
        quadratic_spread: spread,
    }
}

/// `σ_{k+1}/σ_k²` for consecutive records with `σ_k ∈ [lo, hi]`.
pub fn sigma_quadratic_ratios(sigmas: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    sigmas
        .windows(2)
        .filter(|w| w[0] >= lo && w[0] <= hi)
        .map(|w| w[1] / (w[0] * w[0]))
        .collect()
}

/// Draw `v* + r·u` with `u` uniform on the unit sphere of the sum norm's
/// product structure: a Gaussian direction normalized in the sum norm.
pub fn perturb<R: rand::Rng + ?Sized>(vstar: &PrimalDualPoint, radius: f64, rng: &mut R) -> PrimalDualPoint {
    use rand_distr::StandardNormal;
    let dims = vstar.dims();
    loop {
        let mut gauss = |len: usize| DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal));
        let dx = gauss(dims.n);
        let dy = gauss(dims.m);
        let dzv = gauss(dims.d * dims.d);
        let dz = symkernel::SymMat::new(DMatrix::from_column_slice(dims.d, dims.d, dzv.as_slice()));
        let dir = PrimalDualPoint::new(dx, dy, dz);
        let norm = dir.norm();
        if norm > 1e-12 {
            let s = radius / norm;
            return PrimalDualPoint::new(
                &vstar.x + &dir.x * s,
                &vstar.y + &dir.y * s,
                &vstar.z + &dir.z.scale(s),
            );
        }
    }
}
