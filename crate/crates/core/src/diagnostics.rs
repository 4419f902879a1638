//! Numerical probes of the structure of a KKT point: two-sided error bounds,
//! the complementarity spectrum, sampled second-order curvature, and the
//! reading of a subproblem solution as a perturbed KKT point.
//!
//! Probes produce evidence, not certificates.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{contract, Result};
use crate::model::{self, NsdpProblem, Perturbation, PrimalDualPoint};
use crate::outer;
use crate::subqp::{StabilizedSubproblem, SubproblemPoint};
use crate::symkernel::{self, IndexPartition, SymMat};

/// `σ(v*)` must not exceed this for probes that need a KKT point.
pub const KKT_TOL: f64 = 1e-10;

/// Thresholds defining the critical-cone approximation.
pub const CONE_TOL: f64 = 1e-8;
const CONE_ROUNDS: usize = 50;
const MIN_PROJECTED_NORM: f64 = 1e-6;

/// Extremes of the two error-bound ratios at one radius.
#[derive(Debug, Clone, Serialize)]
pub struct RadiusStats {
    pub radius: f64,
    pub samples: usize,
    /// `min/max σ(v)/‖v − v*‖`.
    pub min_sigma_over_dist: f64,
    pub max_sigma_over_dist: f64,
    /// `min/max ‖v − v*‖/σ(v)`.
    pub min_dist_over_sigma: f64,
    pub max_dist_over_sigma: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SoscResult {
    pub sampled: usize,
    pub accepted: usize,
    /// Minimum of `⟨(∇²ₓₓL + ℋ)d, d⟩` over accepted unit directions; `None`
    /// when no direction was accepted.
    pub min_curvature: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub problem: String,
    pub reference_x: Vec<f64>,
    pub reference_y: Vec<f64>,
    pub reference_z: Vec<f64>,
    pub seed: u64,
    pub radii: Vec<RadiusStats>,
    /// `(|α|, |β|, |γ|)` of `X(x*) − Z*`.
    pub partition: Option<(usize, usize, usize)>,
    pub strict_complementarity: Option<bool>,
    pub sosc: Option<SoscResult>,
    pub notes: Vec<String>,
}

impl ProbeReport {
    pub fn new(problem: &str, vstar: &PrimalDualPoint, seed: u64) -> Self {
        ProbeReport {
            problem: problem.to_string(),
            reference_x: vstar.x.iter().copied().collect(),
            reference_y: vstar.y.iter().copied().collect(),
            reference_z: vstar.z.to_row_major(),
            seed,
            radii: Vec::new(),
            partition: None,
            strict_complementarity: None,
            sosc: None,
            notes: Vec::new(),
        }
    }
}

fn require_kkt<P: NsdpProblem + ?Sized>(prob: &P, vstar: &PrimalDualPoint) -> Result<()> {
    let res = model::kkt_residual(prob, vstar)?;
    if !(res <= KKT_TOL) {
        return Err(contract(format!("reference is not a KKT point: sigma(v*) = {res:e}")));
    }
    Ok(())
}

/// Sample `samples` points at exact sum-norm distance `r` from `v*` for every
/// radius and record the extremes of `σ(v)/‖v − v*‖` and its reciprocal.
pub fn error_bound_probe<P: NsdpProblem + ?Sized>(
    prob: &P,
    vstar: &PrimalDualPoint,
    radii: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<RadiusStats>> {
    require_kkt(prob, vstar)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        if !(r > 0.0) {
            return Err(contract(format!("radius must be positive, got {r:e}")));
        }
        let mut st = RadiusStats {
            radius: r,
            samples,
            min_sigma_over_dist: f64::INFINITY,
            max_sigma_over_dist: 0.0,
            min_dist_over_sigma: f64::INFINITY,
            max_dist_over_sigma: 0.0,
        };
        for _ in 0..samples {
            let v = outer::perturb(vstar, r, &mut rng);
            let dist = v.dist(vstar);
            let sigma = model::kkt_residual(prob, &v)?;
            let a = sigma / dist;
            let b = dist / sigma;
            st.min_sigma_over_dist = st.min_sigma_over_dist.min(a);
            st.max_sigma_over_dist = st.max_sigma_over_dist.max(a);
            st.min_dist_over_sigma = st.min_dist_over_sigma.min(b);
            st.max_dist_over_sigma = st.max_dist_over_sigma.max(b);
        }
        out.push(st);
    }
    Ok(out)
}

/// Partition of the spectrum of `X(x) − Z` and whether `β` is empty.
pub fn complementarity_spectrum<P: NsdpProblem + ?Sized>(prob: &P, v: &PrimalDualPoint) -> Result<(IndexPartition, bool)> {
    let m = &prob.x_mat(&v.x) - &v.z;
    let dec = symkernel::eig(&m)?;
    let part = symkernel::partition(&dec, symkernel::default_tol(&m));
    let strict = part.beta.is_empty();
    Ok((part, strict))
}

/// Linear map `d ↦ svec(Eᵀ(𝒜d)E)` as a matrix, `E` spanning the kernel of `X*`.
fn face_map(a: &[SymMat], e: &DMatrix<f64>) -> DMatrix<f64> {
    let k = e.ncols();
    let p = SymMat::svec_len(k);
    let mut out = DMatrix::zeros(p, a.len());
    for (j, aj) in a.iter().enumerate() {
        out.set_column(j, &aj.congruence(e).svec());
    }
    out
}

const POLISH_ROUNDS: usize = 80;
/// Eigenvalues of the face block below this fraction of its norm are taken as active.
const POLISH_ACTIVE: f64 = 1e-3;

/// Alternating projection approaches thin cones slowly. Guess the active
/// face from the near-zero eigenvectors `U` of `W = Eᵀ(𝒜d)E` and project `d`
/// onto `{Bᵀd = 0, Uᵀ(Eᵀ(𝒜d)E)U = 0}`. On a degenerate face the
/// error only halves per round, hence the generous round count.
fn polish(d: &DVector<f64>, b: &DMatrix<f64>, fmap: &DMatrix<f64>, k: usize) -> Result<DVector<f64>> {
    let n = d.len();
    let mut d = d.clone();
    for _ in 0..POLISH_ROUNDS {
        let w = SymMat::from_svec(k, (fmap * &d).as_slice());
        let scale = w.frob_norm();
        if scale == 0.0 {
            break;
        }
        let dec = symkernel::eig(&w)?;
        let active: Vec<usize> = (0..k).filter(|&i| dec.values[i] <= POLISH_ACTIVE * scale).collect();
        if active.is_empty() {
            break;
        }
        let u = dec.columns(&active);
        let q = SymMat::svec_len(active.len());
        let mut rows = DMatrix::zeros(b.ncols() + q, n);
        rows.view_mut((0, 0), (b.ncols(), n)).copy_from(&b.transpose());
        for j in 0..n {
            let col = SymMat::from_svec(k, fmap.column(j).as_slice()).congruence(&u).svec();
            rows.view_mut((b.ncols(), j), (q, 1)).copy_from(&col);
        }
        let rp = rows.clone().pseudo_inverse(1e-12).map_err(|e| contract(e.to_string()))?;
        d = &d - rp * (&rows * &d);
    }
    Ok(d)
}

/// Sample unit directions in an approximation of the critical cone at `v*`
/// and return the least curvature `⟨(∇²ₓₓL(v*) + ℋ(x*, Z*))d, d⟩` among them.
///
/// Random Gaussian directions are driven toward the cone by alternating
/// projection onto `{d : ∇fᵀd = 0, ∇gᵀd = 0}` and onto the tangent-cone block
/// `Eᵀ(𝒜d)E ⪰ 0` (the latter by a least-norm correction), then accepted
/// only if all defining residuals are at most `CONE_TOL` after normalization.
pub fn sosc_probe<P: NsdpProblem + ?Sized>(
    prob: &P,
    vstar: &PrimalDualPoint,
    num_dirs: usize,
    seed: u64,
) -> Result<SoscResult> {
    require_kkt(prob, vstar)?;
    let n = prob.dims().n;
    let x = &vstar.x;
    let xv = prob.x_mat(x);
    let xdec = symkernel::eig(&xv)?;
    let xpart = symkernel::partition(&xdec, symkernel::default_tol(&xv));
    let e = xdec.columns(&xpart.beta_gamma());
    let a = model::a_mats(prob, x);

    let grad_f = prob.grad_f(x);
    let mut b = DMatrix::zeros(n, prob.dims().m + 1);
    b.set_column(0, &grad_f);
    if prob.dims().m > 0 {
        b.view_mut((0, 1), (n, prob.dims().m)).copy_from(&prob.jac_g(x));
    }
    let b_pinv = b.clone().pseudo_inverse(1e-12).map_err(|e| contract(e.to_string()))?;
    let project_linear = |d: &DVector<f64>| d - &b * (&b_pinv * d);

    let fmap = if e.ncols() > 0 { Some(face_map(&a, &e)) } else { None };
    let fmap_pinv = match &fmap {
        Some(f) => Some(f.clone().pseudo_inverse(1e-12).map_err(|e| contract(e.to_string()))?),
        None => None,
    };
    let project_face = |d: &DVector<f64>| -> Result<DVector<f64>> {
        let (Some(f), Some(fp)) = (&fmap, &fmap_pinv) else {
            return Ok(d.clone());
        };
        let w = SymMat::from_svec(e.ncols(), (f * d).as_slice());
        let neg = symkernel::proj_psd(&-&w)?;
        if neg.is_zero() {
            return Ok(d.clone());
        }
        Ok(d + fp * neg.svec())
    };
    let residuals = |d: &DVector<f64>| -> Result<bool> {
        let lin = grad_f.dot(d).abs() <= CONE_TOL
            && (prob.dims().m == 0 || (prob.jac_g(x).transpose() * d).norm() <= CONE_TOL);
        let cone = symkernel::tangent_cone_residual(&xdec, &xpart, &model::combine(&a, d, xv.dim()))? <= CONE_TOL;
        Ok(lin && cone)
    };

    let curvature = model::hess_lagrangian(prob, vstar) + model::curvature_term(prob, x, &vstar.z, symkernel::default_tol(&xv))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted = 0;
    let mut min_curv: Option<f64> = None;
    for _ in 0..num_dirs {
        let mut d = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        d /= d.norm();
        for _ in 0..CONE_ROUNDS {
            d = project_linear(&d);
            d = project_face(&d)?;
        }
        d = project_linear(&d);
        if let Some(f) = &fmap {
            d = polish(&d, &b, f, e.ncols())?;
        }
        let norm = d.norm();
        if !(norm >= MIN_PROJECTED_NORM) {
            continue;
        }
        d /= norm;
        if !residuals(&d)? {
            continue;
        }
        accepted += 1;
        let c = d.dot(&(&curvature * &d));
        min_curv = Some(min_curv.map_or(c, |m| m.min(c)));
    }
    Ok(SoscResult {
        sampled: num_dirs,
        accepted,
        min_curvature: min_curv,
    })
}

/// Residual of the KKT system at `(x, ζ̄, Σ̄)` perturbed by
/// `r = Hξ̄`, `s = ∇gᵀξ̄ + σ(ζ̄ − y)`, `T = 𝒜ξ̄ + σ(Σ̄ − Z)`.
///
/// Any subproblem solution is an exact KKT point of this perturbed system
/// up to its own residual, so the two values agree to rounding.
pub fn perturbed_kkt_closure<P: NsdpProblem + ?Sized>(
    prob: &P,
    v: &PrimalDualPoint,
    sp: &StabilizedSubproblem,
    w: &SubproblemPoint,
) -> Result<f64> {
    let u = Perturbation {
        r: &sp.h * &w.xi,
        s: sp.jac_g.transpose() * &w.xi + (&w.zeta - &v.y) * sp.sigma,
        t: &model::combine(&sp.a_ops, &w.xi, sp.x_val.dim()) + &(&w.big_sigma - &v.z).scale(sp.sigma),
    };
    let shifted = PrimalDualPoint::new(v.x.clone(), w.zeta.clone(), w.big_sigma.clone());
    model::perturbed_kkt_residual(prob, &shifted, &u)
}

/// Settings for [`probe`].
#[derive(Debug, Clone, Serialize)]
pub struct ProbeConfig {
    pub radii: Vec<f64>,
    pub samples_per_radius: usize,
    pub num_dirs: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            radii: vec![1e-2, 1e-3, 1e-4],
            samples_per_radius: 200,
            num_dirs: 200,
            seed: 0,
        }
    }
}

/// Which probes to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeSelection {
    pub error_bound: bool,
    pub spectrum: bool,
    pub sosc: bool,
}

impl ProbeSelection {
    pub const ALL: ProbeSelection = ProbeSelection {
        error_bound: true,
        spectrum: true,
        sosc: true,
    };
}

/// Run the selected probes at `v*`.
pub fn probe<P: NsdpProblem + ?Sized>(
    prob: &P,
    id: &str,
    vstar: &PrimalDualPoint,
    what: ProbeSelection,
    cfg: &ProbeConfig,
) -> Result<ProbeReport> {
    let mut rep = ProbeReport::new(id, vstar, cfg.seed);
    if what.spectrum {
        let (part, strict) = complementarity_spectrum(prob, vstar)?;
        rep.partition = Some(part.sizes());
        rep.strict_complementarity = Some(strict);
        if part.fragile {
            rep.notes.push("an eigenvalue of X - Z lies within 10x of the partition tolerance".into());
        }
    }
    if what.error_bound {
        rep.radii = error_bound_probe(prob, vstar, &cfg.radii, cfg.samples_per_radius, cfg.seed)?;
    }
    if what.sosc {
        let s = sosc_probe(prob, vstar, cfg.num_dirs, cfg.seed)?;
        if s.accepted == 0 {
            rep.notes.push("sosc: no sampled direction was accepted into the critical cone; result indeterminate".into());
        }
        rep.sosc = Some(s);
    }
    Ok(rep)
}
