//! The stabilized QSDP subproblem and its solvers.
//!
//! At a primal-dual point `v = (x, y, Z)` with residual `σ > 0` the subproblem is
//!
//! ```text
//! minimize    ∇f(x)ᵀξ + ½ξᵀHξ + (σ/2)‖ζ‖² + (σ/2)‖Σ‖²_F
//! subject to  g(x) + ∇g(x)ᵀξ + σ(ζ − y) = 0
//!             X(x) + 𝒜(x)ξ + σ(Σ − Z) ⪰ 0
//! ```
//!
//! and its KKT system, in the unknowns `w = (ξ, ζ, Σ)`, reads
//!
//! ```text
//! F₁ = Hξ + ∇f − ∇g ζ − 𝒜*Σ                  = 0
//! F₂ = g + ∇gᵀξ + σ(ζ − y)                    = 0
//! F₃ = S − 𝒫(S − Σ),  S = X + 𝒜ξ + σ(Σ − Z)   = 0
//! ```
//!
//! [`StabilizedSubproblem::solve`] runs a globalized semismooth Newton method
//! on `F`, falling back to an accelerated projected-gradient method on the
//! dual of `Σ` when Newton stalls.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{contract, Result};
use crate::model::{self, NsdpProblem, PrimalDualPoint};
use crate::symkernel::{self, ProjectionDerivative, SymMat};

/// Frozen problem data defining one subproblem.
#[derive(Debug, Clone)]
pub struct StabilizedSubproblem {
    pub grad_f: DVector<f64>,
    pub h: DMatrix<f64>,
    pub g_val: DVector<f64>,
    /// `∇g(x)`, `n×m`.
    pub jac_g: DMatrix<f64>,
    pub x_val: SymMat,
    pub a_ops: Vec<SymMat>,
    pub sigma: f64,
    pub y_ref: DVector<f64>,
    pub z_ref: SymMat,
    /// Radius of the optional trust ball `‖ξ‖ ≤ ν`.
    pub nu: Option<f64>,
}

/// A candidate `(ξ, ζ, Σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemPoint {
    pub xi: DVector<f64>,
    pub zeta: DVector<f64>,
    pub big_sigma: SymMat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SubproblemStatus {
    Converged,
    FallbackUsed,
    Failed,
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub point: SubproblemPoint,
    pub kkt_res: f64,
    pub newton_iters: usize,
    pub splitting_iters: usize,
    pub status: SubproblemStatus,
    /// Set when the ball constraint was binding; holds its multiplier.
    pub ball_multiplier: Option<f64>,
}

impl SubproblemSolution {
    pub fn ball_active(&self) -> bool {
        self.ball_multiplier.is_some()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SubproblemConfig {
    /// Absolute tolerance on the subproblem KKT residual. `None` selects
    /// [`default_tolerance`] from the subproblem's `σ`.
    pub tol: Option<f64>,
    pub max_newton_iters: usize,
    /// Newton gives up after this many steps without improving its best residual.
    pub stall_window: usize,
    pub max_splitting_iters: usize,
    /// Shift `H` so its smallest eigenvalue is at least `1e-8`.
    pub convexify: bool,
}

impl Default for SubproblemConfig {
    fn default() -> Self {
        SubproblemConfig {
            tol: None,
            max_newton_iters: 100,
            stall_window: 10,
            max_splitting_iters: 20_000,
            convexify: false,
        }
    }
}

/// `max(1e-12, 1e-4·σ²)`.
pub fn default_tolerance(sigma: f64) -> f64 {
    (1e-4 * sigma * sigma).max(1e-12)
}

/// Residuals of the two subproblem constraints.
#[derive(Debug, Clone, Copy)]
pub struct ConstraintResidual {
    /// `‖g + ∇gᵀξ + σ(ζ − y)‖`.
    pub equality: f64,
    /// Frobenius distance of the conic slack to the PSD cone.
    pub conic: f64,
}

const ARMIJO_SLOPE: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;
const TAU_START: f64 = 1e-8;

impl StabilizedSubproblem {
    /// Snapshot the data of the subproblem at `v`.
    pub fn build<P: NsdpProblem + ?Sized>(
        prob: &P,
        v: &PrimalDualPoint,
        h: DMatrix<f64>,
        sigma: f64,
        nu: Option<f64>,
    ) -> Result<Self> {
        if v.dims() != prob.dims() {
            return Err(contract(format!(
                "point has dims {:?}, problem has {:?}",
                v.dims(),
                prob.dims()
            )));
        }
        StabilizedSubproblem {
            grad_f: prob.grad_f(&v.x),
            h,
            g_val: prob.g(&v.x),
            jac_g: prob.jac_g(&v.x),
            x_val: prob.x_mat(&v.x),
            a_ops: model::a_mats(prob, &v.x),
            sigma,
            y_ref: v.y.clone(),
            z_ref: v.z.clone(),
            nu,
        }
        .validated()
    }

    /// Check the structural invariants of hand-assembled data.
    pub fn validated(self) -> Result<Self> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(contract(format!("subproblem needs sigma > 0, got {:e}", self.sigma)));
        }
        if let Some(nu) = self.nu {
            if !(nu > 0.0) {
                return Err(contract(format!("ball radius must be positive, got {nu:e}")));
            }
        }
        let (n, m, d) = self.dims();
        let ok = self.h.shape() == (n, n)
            && self.g_val.len() == m
            && self.jac_g.shape() == (n, m)
            && self.a_ops.len() == n
            && self.a_ops.iter().all(|a| a.dim() == d)
            && self.y_ref.len() == m
            && self.z_ref.dim() == d;
        if !ok {
            return Err(contract(format!("inconsistent subproblem dimensions for n={n} m={m} d={d}")));
        }
        Ok(self)
    }

    /// `(n, m, d)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.grad_f.len(), self.y_ref.len(), self.x_val.dim())
    }

    fn apply_a(&self, xi: &DVector<f64>) -> SymMat {
        model::combine(&self.a_ops, xi, self.x_val.dim())
    }

    /// Conic slack `X + 𝒜ξ + σ(Σ − Z)`.
    pub fn slack(&self, w: &SubproblemPoint) -> SymMat {
        let mut s = &self.x_val + &self.apply_a(&w.xi);
        s += &(&w.big_sigma - &self.z_ref).scale(self.sigma);
        s
    }

    /// `y − (g + ∇gᵀξ)/σ`: the unique `ζ` satisfying the equality constraint.
    pub fn eliminate_zeta(&self, xi: &DVector<f64>) -> DVector<f64> {
        if self.y_ref.is_empty() {
            return DVector::zeros(0);
        }
        &self.y_ref - (&self.g_val + self.jac_g.transpose() * xi) / self.sigma
    }

    /// The point `ξ = 0`, `ζ = y − g/σ`, `Σ = Z − (X − 𝒫(X − σZ))/σ`, which
    /// satisfies both constraints for every subproblem.
    pub fn feasible_point(&self) -> Result<SubproblemPoint> {
        let n = self.grad_f.len();
        let shifted = &self.x_val - &self.z_ref.scale(self.sigma);
        let proj = symkernel::proj_psd(&shifted)?;
        let big_sigma = &self.z_ref - &(&self.x_val - &proj).scale(1.0 / self.sigma);
        Ok(SubproblemPoint {
            xi: DVector::zeros(n),
            zeta: self.eliminate_zeta(&DVector::zeros(n)),
            big_sigma,
        })
    }

    pub fn constraint_residuals(&self, w: &SubproblemPoint) -> Result<ConstraintResidual> {
        let eq = &self.g_val + self.jac_g.transpose() * &w.xi + (&w.zeta - &self.y_ref) * self.sigma;
        let slack = self.slack(w);
        let conic = symkernel::proj_psd(&-&slack)?.frob_norm();
        Ok(ConstraintResidual {
            equality: eq.norm(),
            conic,
        })
    }

    /// The three KKT blocks `(F₁, F₂, F₃)`.
    pub fn residual_blocks(&self, w: &SubproblemPoint) -> Result<(DVector<f64>, DVector<f64>, SymMat)> {
        self.blocks_with(&self.h, w)
    }

    fn blocks_with(&self, h: &DMatrix<f64>, w: &SubproblemPoint) -> Result<(DVector<f64>, DVector<f64>, SymMat)> {
        let mut f1 = h * &w.xi + &self.grad_f;
        if !self.y_ref.is_empty() {
            f1 -= &self.jac_g * &w.zeta;
        }
        f1 -= model::adjoint(&self.a_ops, &w.big_sigma);
        let f2 = &self.g_val + self.jac_g.transpose() * &w.xi + (&w.zeta - &self.y_ref) * self.sigma;
        let s = self.slack(w);
        let f3 = &s - &symkernel::proj_psd(&(&s - &w.big_sigma))?;
        Ok((f1, f2, f3))
    }

    /// Sum norm `‖F₁‖ + ‖F₂‖ + ‖F₃‖_F`; infinite when `w` is not finite.
    pub fn kkt_residual(&self, w: &SubproblemPoint) -> f64 {
        self.residual_with(&self.h, w)
    }

    fn residual_with(&self, h: &DMatrix<f64>, w: &SubproblemPoint) -> f64 {
        match self.blocks_with(h, w) {
            Ok((f1, f2, f3)) => {
                let r = f1.norm() + f2.norm() + f3.frob_norm();
                if r.is_finite() {
                    r
                } else {
                    f64::INFINITY
                }
            }
            Err(_) => f64::INFINITY,
        }
    }

    fn tolerance(&self, cfg: &SubproblemConfig) -> f64 {
        cfg.tol.unwrap_or_else(|| default_tolerance(self.sigma))
    }

    fn effective_h(&self, cfg: &SubproblemConfig) -> DMatrix<f64> {
        if !cfg.convexify {
            return self.h.clone();
        }
        let lmin = symkernel::min_eigenvalue(&SymMat::new(self.h.clone())).unwrap_or(f64::NEG_INFINITY);
        let shift = if lmin.is_finite() { (1e-8 - lmin).max(0.0) } else { 0.0 };
        &self.h + DMatrix::identity(self.h.nrows(), self.h.ncols()) * shift
    }

    /// Solve the subproblem KKT system. Never panics; failures surface in
    /// [`SubproblemSolution::status`].
    pub fn solve(&self, cfg: &SubproblemConfig) -> SubproblemSolution {
        let h = self.effective_h(cfg);
        let sol = self.solve_with(&h, cfg);
        match self.nu {
            Some(nu) if sol.point.xi.norm() > nu => self.solve_in_ball(&h, nu, cfg, sol),
            _ => sol,
        }
    }

    /// Newton from `(0, y, Z)`, then splitting from Newton's best point if needed.
    fn solve_with(&self, h: &DMatrix<f64>, cfg: &SubproblemConfig) -> SubproblemSolution {
        let tol = self.tolerance(cfg);
        let start = SubproblemPoint {
            xi: DVector::zeros(self.grad_f.len()),
            zeta: self.y_ref.clone(),
            big_sigma: self.z_ref.clone(),
        };
        let newton = NewtonSolver::new(self, h).run(start, tol, cfg);
        if newton.res <= tol {
            return SubproblemSolution {
                point: newton.point,
                kkt_res: newton.res,
                newton_iters: newton.iters,
                splitting_iters: 0,
                status: SubproblemStatus::Converged,
                ball_multiplier: None,
            };
        }
        let split = self.splitting_with(h, Some(&newton.point.big_sigma), tol, cfg);
        let splitting_iters = split.as_ref().map_or(0, |s| s.2);
        let (point, res, status) = match split {
            Some((p, r, _)) if r <= tol => (p, r, SubproblemStatus::FallbackUsed),
            Some((p, r, _)) if r < newton.res => (p, r, SubproblemStatus::Failed),
            _ => (newton.point, newton.res, SubproblemStatus::Failed),
        };
        SubproblemSolution {
            point,
            kkt_res: res,
            newton_iters: newton.iters,
            splitting_iters,
            status,
            ball_multiplier: None,
        }
    }

    /// Enforce `‖ξ‖ ≤ ν` by finding the multiplier `κ ≥ 0` of the ball
    /// constraint, i.e. solving with `H + κI` until `‖ξ‖ = ν`.
    fn solve_in_ball(
        &self,
        h: &DMatrix<f64>,
        nu: f64,
        cfg: &SubproblemConfig,
        unconstrained: SubproblemSolution,
    ) -> SubproblemSolution {
        let n = h.nrows();
        let shifted = |kappa: f64| {
            let hk = h + DMatrix::identity(n, n) * kappa;
            self.solve_with(&hk, cfg)
        };
        let mut lo = 0.0;
        let mut hi = (h.norm() + self.grad_f.norm() / nu).max(1.0);
        let mut best = shifted(hi);
        let mut grow = 0;
        while best.point.xi.norm() > nu && grow < 60 {
            lo = hi;
            hi *= 2.0;
            best = shifted(hi);
            grow += 1;
        }
        if best.point.xi.norm() > nu {
            let mut out = unconstrained;
            out.status = SubproblemStatus::Failed;
            return out;
        }
        let mut newton_total = best.newton_iters;
        for _ in 0..100 {
            if hi - lo <= 1e-14 * hi || best.point.xi.norm() >= nu * (1.0 - 1e-10) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let trial = shifted(mid);
            newton_total += trial.newton_iters;
            if trial.point.xi.norm() > nu {
                lo = mid;
            } else {
                hi = mid;
                best = trial;
            }
        }
        best.newton_iters = newton_total;
        best.ball_multiplier = Some(hi);
        best
    }

    /// Accelerated projected gradient on the dual of `Σ`, started from `Σ₀`
    /// (default `Z`). Requires `H + ∇g∇gᵀ/σ ≻ 0`; returns `Failed` otherwise.
    pub fn solve_splitting(&self, cfg: &SubproblemConfig, start: Option<&SymMat>) -> SubproblemSolution {
        let h = self.effective_h(cfg);
        let tol = self.tolerance(cfg);
        match self.splitting_with(&h, start, tol, cfg) {
            Some((point, res, iters)) => SubproblemSolution {
                point,
                kkt_res: res,
                newton_iters: 0,
                splitting_iters: iters,
                status: if res <= tol {
                    SubproblemStatus::Converged
                } else {
                    SubproblemStatus::Failed
                },
                ball_multiplier: None,
            },
            None => {
                let (n, m, d) = self.dims();
                let point = SubproblemPoint {
                    xi: DVector::zeros(n),
                    zeta: DVector::zeros(m),
                    big_sigma: SymMat::zeros(d),
                };
                SubproblemSolution {
                    kkt_res: self.residual_with(&h, &point),
                    point,
                    newton_iters: 0,
                    splitting_iters: 0,
                    status: SubproblemStatus::Failed,
                    ball_multiplier: None,
                }
            }
        }
    }

    /// For fixed `Σ`, `ξ(Σ) = K⁻¹(−∇f + ∇g(y − g/σ) + 𝒜*Σ)` with
    /// `K = H + ∇g∇gᵀ/σ`, and the slack is affine in `Σ`:
    /// `S(Σ) = q + M svec(Σ)`, `M = 𝒜K⁻¹𝒜* + σI ≻ 0`. The pair `(Σ, S)`
    /// solves a strongly monotone semidefinite complementarity problem,
    /// i.e. minimizes `½⟨s, Ms⟩ + ⟨q, s⟩` over `Σ ⪰ 0`.
    fn splitting_with(
        &self,
        h: &DMatrix<f64>,
        start: Option<&SymMat>,
        tol: f64,
        cfg: &SubproblemConfig,
    ) -> Option<(SubproblemPoint, f64, usize)> {
        let (_, m, d) = self.dims();
        let p = SymMat::svec_len(d);
        let sigma = self.sigma;
        let mut k = h.clone();
        let mut b = -&self.grad_f;
        if m > 0 {
            k += &self.jac_g * self.jac_g.transpose() / sigma;
            b += &self.jac_g * (&self.y_ref - &self.g_val / sigma);
        }
        let k = (&k + k.transpose()) * 0.5;
        let chol = k.cholesky()?;
        let amat = svec_columns(&self.a_ops, p);
        let c0 = chol.solve(&b);
        let bmat = chol.solve(&amat.transpose());
        let mmat = &amat * &bmat + DMatrix::identity(p, p) * sigma;
        let mmat = (&mmat + mmat.transpose()) * 0.5;
        let q = self.x_val.svec() + &amat * &c0 - self.z_ref.svec() * sigma;
        let spec = mmat.clone().symmetric_eigenvalues();
        let lmax = spec.max();
        let lmin = spec.min();
        if !(lmin > 0.0) || !lmax.is_finite() {
            return None;
        }
        let momentum = (lmax.sqrt() - lmin.sqrt()) / (lmax.sqrt() + lmin.sqrt());

        let assemble = |s: &DVector<f64>| {
            let xi = &c0 + &bmat * s;
            let zeta = self.eliminate_zeta(&xi);
            SubproblemPoint {
                xi,
                zeta,
                big_sigma: SymMat::from_svec(d, s.as_slice()),
            }
        };
        let project = |s: DVector<f64>| -> Option<DVector<f64>> {
            Some(symkernel::proj_psd(&SymMat::from_svec(d, s.as_slice())).ok()?.svec())
        };

        let s0 = match start {
            Some(z) if z.dim() == d => z.clone(),
            _ => self.z_ref.clone(),
        };
        let mut s = project(s0.svec())?;
        let mut u = s.clone();
        let mut best = (assemble(&s), f64::INFINITY);
        best.1 = self.residual_with(h, &best.0);
        let mut iters = 0;
        while best.1 > tol && iters < cfg.max_splitting_iters {
            iters += 1;
            let grad = &q + &mmat * &u;
            let s_next = project(&u - grad / lmax)?;
            u = &s_next + (&s_next - &s) * momentum;
            s = s_next;
            let cand = assemble(&s);
            let res = self.residual_with(h, &cand);
            if res < best.1 {
                best = (cand, res);
            }
        }
        Some((best.0, best.1, iters))
    }
}

/// Columns `svec(A_j)`, a `p×n` matrix; `⟨A_j, Σ⟩ = svec(A_j)ᵀ svec(Σ)`.
fn svec_columns(a: &[SymMat], p: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(p, a.len());
    for (j, aj) in a.iter().enumerate() {
        out.set_column(j, &aj.svec());
    }
    out
}

struct NewtonOutcome {
    point: SubproblemPoint,
    res: f64,
    iters: usize,
}

/// Semismooth Newton on the stacked system `F(w) = 0`, with `Σ` in svec
/// coordinates so the Euclidean norm of the stack equals the Frobenius norm
/// of the matrix block.
struct NewtonSolver<'a> {
    sp: &'a StabilizedSubproblem,
    h: &'a DMatrix<f64>,
    amat: DMatrix<f64>,
    n: usize,
    m: usize,
    d: usize,
    p: usize,
}

impl<'a> NewtonSolver<'a> {
    fn new(sp: &'a StabilizedSubproblem, h: &'a DMatrix<f64>) -> Self {
        let (n, m, d) = sp.dims();
        let p = SymMat::svec_len(d);
        NewtonSolver {
            sp,
            h,
            amat: svec_columns(&sp.a_ops, p),
            n,
            m,
            d,
            p,
        }
    }

    fn unpack(&self, w: &DVector<f64>) -> SubproblemPoint {
        let (n, m) = (self.n, self.m);
        SubproblemPoint {
            xi: w.rows(0, n).into_owned(),
            zeta: w.rows(n, m).into_owned(),
            big_sigma: SymMat::from_svec(self.d, w.rows(n + m, self.p).as_slice()),
        }
    }

    fn pack(&self, pt: &SubproblemPoint) -> DVector<f64> {
        let mut w = DVector::zeros(self.n + self.m + self.p);
        w.rows_mut(0, self.n).copy_from(&pt.xi);
        w.rows_mut(self.n, self.m).copy_from(&pt.zeta);
        w.rows_mut(self.n + self.m, self.p).copy_from(&pt.big_sigma.svec());
        w
    }

    /// Stacked residual, or `None` if it cannot be evaluated.
    fn eval(&self, w: &DVector<f64>) -> Option<DVector<f64>> {
        let (f1, f2, f3) = self.sp.blocks_with(self.h, &self.unpack(w)).ok()?;
        let mut f = DVector::zeros(self.n + self.m + self.p);
        f.rows_mut(0, self.n).copy_from(&f1);
        f.rows_mut(self.n, self.m).copy_from(&f2);
        f.rows_mut(self.n + self.m, self.p).copy_from(&f3.svec());
        if f.iter().all(|v| v.is_finite()) {
            Some(f)
        } else {
            None
        }
    }

    /// An element of the generalized Jacobian of `F` at `w`.
    fn jacobian(&self, w: &DVector<f64>) -> Option<DMatrix<f64>> {
        let (n, m, p) = (self.n, self.m, self.p);
        let sp = self.sp;
        let pt = self.unpack(w);
        let arg = &sp.slack(&pt) - &pt.big_sigma;
        let deriv = ProjectionDerivative::new(&arg, 0.0).ok()?;
        // V: the projection's Jacobian element in svec coordinates
        let mut v = DMatrix::zeros(p, p);
        let mut e = vec![0.0; p];
        for k in 0..p {
            e[k] = 1.0;
            v.set_column(k, &deriv.jacobian_apply(&SymMat::from_svec(self.d, &e)).svec());
            e[k] = 0.0;
        }
        let i_minus_v = DMatrix::identity(p, p) - &v;
        let mut j = DMatrix::zeros(n + m + p, n + m + p);
        j.view_mut((0, 0), (n, n)).copy_from(self.h);
        j.view_mut((0, n + m), (n, p)).copy_from(&(-self.amat.transpose()));
        if m > 0 {
            j.view_mut((0, n), (n, m)).copy_from(&(-&sp.jac_g));
            j.view_mut((n, 0), (m, n)).copy_from(&sp.jac_g.transpose());
            j.view_mut((n, n), (m, m)).copy_from(&(DMatrix::identity(m, m) * sp.sigma));
        }
        // dF₃ = (I − V)(𝒜dξ + σdΣ) + V dΣ
        j.view_mut((n + m, 0), (p, n)).copy_from(&(&i_minus_v * &self.amat));
        j.view_mut((n + m, n + m), (p, p)).copy_from(&(&i_minus_v * sp.sigma + &v));
        Some(j)
    }

    /// Newton direction; Levenberg-Marquardt normal equations when the
    /// plain system is singular, inaccurate or `force_lm` is set.
    fn direction(&self, j: &DMatrix<f64>, f: &DVector<f64>, tau: &mut f64, force_lm: bool) -> Option<DVector<f64>> {
        if !force_lm {
            if let Some(d) = j.clone().lu().solve(&(-f)) {
                let lin = (j * &d + f).norm();
                if d.iter().all(|v| v.is_finite()) && lin <= 1e-8 * f.norm().max(f64::MIN_POSITIVE) {
                    return Some(d);
                }
            }
        }
        let jt = j.transpose();
        let jtj = &jt * j;
        let rhs = -(&jt * f);
        let dim = jtj.nrows();
        for _ in 0..20 {
            let sys = &jtj + DMatrix::identity(dim, dim) * *tau;
            if let Some(ch) = sys.cholesky() {
                let d = ch.solve(&rhs);
                if d.iter().all(|v| v.is_finite()) {
                    return Some(d);
                }
            }
            *tau *= 10.0;
        }
        None
    }

    fn run(&self, start: SubproblemPoint, tol: f64, cfg: &SubproblemConfig) -> NewtonOutcome {
        let mut w = self.pack(&start);
        let mut best = NewtonOutcome {
            res: self.sp.residual_with(self.h, &start),
            point: start,
            iters: 0,
        };
        let Some(mut f) = self.eval(&w) else {
            return best;
        };
        let mut phi = f.norm_squared();
        let mut tau = TAU_START;
        let mut force_lm = false;
        let mut since_best = 0;
        let mut iters = 0;
        while best.res > tol && iters < cfg.max_newton_iters && since_best < cfg.stall_window {
            iters += 1;
            let Some(jac) = self.jacobian(&w) else { break };
            let Some(dir) = self.direction(&jac, &f, &mut tau, force_lm) else {
                break;
            };
            let mut t = 1.0;
            let mut accepted = None;
            while t >= MIN_STEP {
                let trial = &w + &dir * t;
                if let Some(ft) = self.eval(&trial) {
                    let pt = ft.norm_squared();
                    if pt <= (1.0 - 2.0 * ARMIJO_SLOPE * t) * phi {
                        accepted = Some((trial, ft, pt));
                        break;
                    }
                }
                t *= 0.5;
            }
            match accepted {
                Some((wn, fnext, pn)) => {
                    w = wn;
                    f = fnext;
                    phi = pn;
                    force_lm = false;
                    tau = TAU_START;
                }
                None => {
                    force_lm = true;
                    tau *= 10.0;
                    since_best += 1;
                    continue;
                }
            }
            let pt = self.unpack(&w);
            let res = self.sp.residual_with(self.h, &pt);
            if res < best.res {
                best.res = res;
                best.point = pt;
                since_best = 0;
            } else {
                since_best += 1;
            }
        }
        best.iters = iters;
        best
    }
}
