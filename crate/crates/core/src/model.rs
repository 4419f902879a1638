//! Problem contract and Lagrangian machinery.
//!
//! A nonlinear SDP is `min f(x) s.t. g(x) = 0, X(x) ⪰ 0` with
//! `f: ℝⁿ → ℝ`, `g: ℝⁿ → ℝᵐ`, `X: ℝⁿ → 𝕊ᵈ`. The Lagrangian is
//! `L(x, y, Z) = f(x) − ⟨y, g(x)⟩ − ⟨Z, X(x)⟩`.
//!
//! Problems supply analytic first derivatives. Second-order callbacks are
//! optional; anything missing is filled in by central differences of the
//! level below (see [`FiniteDiffFallback`]).

use nalgebra::{DMatrix, DVector};

use crate::error::{contract, Result};
use crate::symkernel::{self, SymMat};

/// Problem dimensions: `n` variables, `m` equality constraints, `d×d` matrix constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub d: usize,
}

/// Evaluation contract for a nonlinear SDP.
///
/// Implementations must be read-only after construction so a single instance
/// can serve concurrent solver runs.
pub trait NsdpProblem: Send + Sync {
    fn dims(&self) -> Dims;

    fn f(&self, x: &DVector<f64>) -> f64;

    fn grad_f(&self, x: &DVector<f64>) -> DVector<f64>;

    fn hess_f(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    /// Equality constraint values, length `m`.
    fn g(&self, x: &DVector<f64>) -> DVector<f64>;

    /// `∇g(x) = [∇g₁ … ∇g_m]`, an `n×m` matrix.
    fn jac_g(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// `Σᵢ yᵢ ∇²gᵢ(x)`.
    fn hess_g(&self, _x: &DVector<f64>, _y: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    fn x_mat(&self, x: &DVector<f64>) -> SymMat;

    /// `A_j(x) = ∂X/∂x_j`, `j` zero-based.
    fn a_mat(&self, x: &DVector<f64>, j: usize) -> SymMat;

    /// `n×n` matrix with entries `⟨Z, ∂²X/∂xᵢ∂xⱼ⟩`.
    fn hess_x_contract(&self, _x: &DVector<f64>, _z: &SymMat) -> Option<DMatrix<f64>> {
        None
    }
}

/// Central-difference step for coordinate `j`.
pub fn fd_step(xj: f64) -> f64 {
    1e-6 * (1.0 + xj.abs())
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Column-by-column central differences of a vector-valued map.
fn fd_jacobian(x: &DVector<f64>, rows: usize, eval: impl Fn(&DVector<f64>) -> DVector<f64>) -> DMatrix<f64> {
    let n = x.len();
    let mut out = DMatrix::zeros(rows, n);
    let mut xp = x.clone();
    for j in 0..n {
        let h = fd_step(x[j]);
        xp[j] = x[j] + h;
        let fp = eval(&xp);
        xp[j] = x[j] - h;
        let fm = eval(&xp);
        xp[j] = x[j];
        out.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    out
}

pub fn fd_hess_f<P: NsdpProblem + ?Sized>(prob: &P, x: &DVector<f64>) -> DMatrix<f64> {
    symmetrize(fd_jacobian(x, prob.dims().n, |p| prob.grad_f(p)))
}

pub fn fd_hess_g<P: NsdpProblem + ?Sized>(prob: &P, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
    if prob.dims().m == 0 {
        let n = prob.dims().n;
        return DMatrix::zeros(n, n);
    }
    symmetrize(fd_jacobian(x, prob.dims().n, |p| prob.jac_g(p) * y))
}

pub fn fd_hess_x_contract<P: NsdpProblem + ?Sized>(prob: &P, x: &DVector<f64>, z: &SymMat) -> DMatrix<f64> {
    let n = prob.dims().n;
    symmetrize(fd_jacobian(x, n, |p| {
        DVector::from_fn(n, |j, _| prob.a_mat(p, j).inner(z))
    }))
}

/// `∇²f`, falling back to finite differences when the problem omits it.
pub fn hess_f_of<P: NsdpProblem + ?Sized>(prob: &P, x: &DVector<f64>) -> DMatrix<f64> {
    prob.hess_f(x).unwrap_or_else(|| fd_hess_f(prob, x))
}

pub fn hess_g_of<P: NsdpProblem + ?Sized>(prob: &P, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
    prob.hess_g(x, y).unwrap_or_else(|| fd_hess_g(prob, x, y))
}

pub fn hess_x_contract_of<P: NsdpProblem + ?Sized>(prob: &P, x: &DVector<f64>, z: &SymMat) -> DMatrix<f64> {
    prob.hess_x_contract(x, z)
        .unwrap_or_else(|| fd_hess_x_contract(prob, x, z))
}

/// Decorator that always answers the second-order callbacks, using central
/// differences wherever the wrapped problem returns `None`.
pub struct FiniteDiffFallback<P>(pub P);

impl<P: NsdpProblem> NsdpProblem for FiniteDiffFallback<P> {
    fn dims(&self) -> Dims {
        self.0.dims()
    }
    fn f(&self, x: &DVector<f64>) -> f64 {
        self.0.f(x)
    }
    fn grad_f(&self, x: &DVector<f64>) -> DVector<f64> {
        self.0.grad_f(x)
    }
    fn hess_f(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(hess_f_of(&self.0, x))
    }
    fn g(&self, x: &DVector<f64>) -> DVector<f64> {
        self.0.g(x)
    }
    fn jac_g(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.0.jac_g(x)
    }
    fn hess_g(&self, x: &DVector<f64>, y: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(hess_g_of(&self.0, x, y))
    }
    fn x_mat(&self, x: &DVector<f64>) -> SymMat {
        self.0.x_mat(x)
    }
    fn a_mat(&self, x: &DVector<f64>, j: usize) -> SymMat {
        self.0.a_mat(x, j)
    }
    fn hess_x_contract(&self, x: &DVector<f64>, z: &SymMat) -> Option<DMatrix<f64>> {
        Some(hess_x_contract_of(&self.0, x, z))
    }
}

/// A primal-dual point `v = (x, y, Z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualPoint {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: SymMat,
}

impl PrimalDualPoint {
    pub fn new(x: DVector<f64>, y: DVector<f64>, z: SymMat) -> Self {
        PrimalDualPoint { x, y, z }
    }

    pub fn zeros(dims: Dims) -> Self {
        PrimalDualPoint {
            x: DVector::zeros(dims.n),
            y: DVector::zeros(dims.m),
            z: SymMat::zeros(dims.d),
        }
    }

    pub fn dims(&self) -> Dims {
        Dims {
            n: self.x.len(),
            m: self.y.len(),
            d: self.z.dim(),
        }
    }

    /// Sum norm `‖x‖₂ + ‖y‖₂ + ‖Z‖_F`.
    pub fn norm(&self) -> f64 {
        self.x.norm() + self.y.norm() + self.z.frob_norm()
    }

    /// `‖self − other‖` in the sum norm.
    pub fn dist(&self, other: &PrimalDualPoint) -> f64 {
        (&self.x - &other.x).norm() + (&self.y - &other.y).norm() + (&self.z - &other.z).frob_norm()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite()) && self.z.is_finite()
    }
}

/// Perturbation `u = (r, s, T)` of the KKT system.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub r: DVector<f64>,
    pub s: DVector<f64>,
    pub t: SymMat,
}

impl Perturbation {
    pub fn zero(dims: Dims) -> Self {
        Perturbation {
            r: DVector::zeros(dims.n),
            s: DVector::zeros(dims.m),
            t: SymMat::zeros(dims.d),
        }
    }
}

fn check_point<P: NsdpProblem + ?Sized>(prob: &P, v: &PrimalDualPoint) -> Result<()> {
    if v.dims() != prob.dims() {
        return Err(contract(format!(
            "point has dims {:?}, problem has {:?}",
            v.dims(),
            prob.dims()
        )));
    }
    Ok(())
}

/// All `A_j(x)`, `j = 0..n`.
pub fn a_mats<P: NsdpProblem + ?Sized>(prob: &P, x: &DVector<f64>) -> Vec<SymMat> {
    (0..prob.dims().n).map(|j| prob.a_mat(x, j)).collect()
}

/// `Σⱼ uⱼ A_j` for precomputed `A_j`.
pub fn combine(a: &[SymMat], u: &DVector<f64>, d: usize) -> SymMat {
    let mut out = SymMat::zeros(d);
    for (aj, &uj) in a.iter().zip(u.iter()) {
        if uj != 0.0 {
            out += &aj.scale(uj);
        }
    }
    out
}

/// `(⟨A_1, U⟩, …, ⟨A_n, U⟩)` for precomputed `A_j`.
pub fn adjoint(a: &[SymMat], u: &SymMat) -> DVector<f64> {
    DVector::from_iterator(a.len(), a.iter().map(|aj| aj.inner(u)))
}

/// `𝒜(x)u = Σⱼ uⱼ A_j(x)`.
pub fn apply_a<P: NsdpProblem + ?Sized>(prob: &P, x: &DVector<f64>, u: &DVector<f64>) -> Result<SymMat> {
    let dims = prob.dims();
    if x.len() != dims.n || u.len() != dims.n {
        return Err(contract(format!(
            "apply_a: expected vectors of length {}, got x:{} u:{}",
            dims.n,
            x.len(),
            u.len()
        )));
    }
    Ok(combine(&a_mats(prob, x), u, dims.d))
}

/// `𝒜*(x)U = (⟨A_1(x), U⟩, …, ⟨A_n(x), U⟩)`.
pub fn apply_a_adjoint<P: NsdpProblem + ?Sized>(prob: &P, x: &DVector<f64>, u: &SymMat) -> Result<DVector<f64>> {
    let dims = prob.dims();
    if x.len() != dims.n || u.dim() != dims.d {
        return Err(contract(format!(
            "apply_a_adjoint: expected x of length {} and {}x{} matrix, got {} and {}x{}",
            dims.n,
            dims.d,
            dims.d,
            x.len(),
            u.dim(),
            u.dim()
        )));
    }
    Ok(adjoint(&a_mats(prob, x), u))
}

/// `∇ₓL(v) = ∇f(x) − ∇g(x)y − 𝒜*(x)Z`.
pub fn grad_lagrangian<P: NsdpProblem + ?Sized>(prob: &P, v: &PrimalDualPoint) -> DVector<f64> {
    let mut out = prob.grad_f(&v.x);
    if prob.dims().m > 0 {
        out -= prob.jac_g(&v.x) * &v.y;
    }
    out -= adjoint(&a_mats(prob, &v.x), &v.z);
    out
}

/// `∇²ₓₓL(v) = ∇²f − Σ yᵢ∇²gᵢ − ⟨Z, ∇²X⟩`, exactly symmetric.
pub fn hess_lagrangian<P: NsdpProblem + ?Sized>(prob: &P, v: &PrimalDualPoint) -> DMatrix<f64> {
    let mut h = hess_f_of(prob, &v.x);
    if prob.dims().m > 0 {
        h -= hess_g_of(prob, &v.x, &v.y);
    }
    if prob.dims().d > 0 {
        h -= hess_x_contract_of(prob, &v.x, &v.z);
    }
    symmetrize(h)
}

/// The sigma-term `[ℋ(x, Z)]ᵢⱼ = 2⟨Z, A_i(x) X(x)† A_j(x)⟩`, symmetrized.
pub fn curvature_term<P: NsdpProblem + ?Sized>(prob: &P, x: &DVector<f64>, z: &SymMat, tol: f64) -> Result<DMatrix<f64>> {
    let n = prob.dims().n;
    let xp = symkernel::pinv(&prob.x_mat(x), tol)?;
    let a = a_mats(prob, x);
    // ⟨Z, A_i X† A_j⟩ = tr(Z A_i X† A_j) = ⟨A_i Z, X† A_j⟩ up to transposition
    let left: Vec<DMatrix<f64>> = a.iter().map(|ai| z.as_matrix() * ai.as_matrix()).collect();
    let right: Vec<DMatrix<f64>> = a.iter().map(|aj| xp.as_matrix() * aj.as_matrix()).collect();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            // tr(L_i R_j) where L_i = Z A_i, R_j = X† A_j
            h[(i, j)] = 2.0 * left[i].transpose().dot(&right[j]);
        }
    }
    Ok(symmetrize(h))
}

/// `X(x) − 𝒫(X(x) − Z)`.
pub fn complementarity_residual<P: NsdpProblem + ?Sized>(prob: &P, v: &PrimalDualPoint) -> Result<SymMat> {
    let xv = prob.x_mat(&v.x);
    let proj = symkernel::proj_psd(&(&xv - &v.z))?;
    Ok(&xv - &proj)
}

/// KKT residual `σ(v) = ‖∇ₓL(v)‖ + ‖g(x)‖ + ‖X(x) − 𝒫(X(x) − Z)‖_F`.
pub fn kkt_residual<P: NsdpProblem + ?Sized>(prob: &P, v: &PrimalDualPoint) -> Result<f64> {
    check_point(prob, v)?;
    let stat = grad_lagrangian(prob, v).norm();
    let feas = if prob.dims().m > 0 { prob.g(&v.x).norm() } else { 0.0 };
    let comp = complementarity_residual(prob, v)?.frob_norm();
    Ok(stat + feas + comp)
}

/// Sum norm of the residuals of the KKT system perturbed by `u = (r, s, T)`:
/// `‖∇ₓL(v) + r‖ + ‖g(x) + s‖ + ‖X(x) + T − 𝒫(X(x) + T − Z)‖_F`.
pub fn perturbed_kkt_residual<P: NsdpProblem + ?Sized>(prob: &P, v: &PrimalDualPoint, u: &Perturbation) -> Result<f64> {
    check_point(prob, v)?;
    let stat = (grad_lagrangian(prob, v) + &u.r).norm();
    let feas = if prob.dims().m > 0 {
        (prob.g(&v.x) + &u.s).norm()
    } else {
        0.0
    };
    let shifted = &prob.x_mat(&v.x) + &u.t;
    let comp = (&shifted - &symkernel::proj_psd(&(&shifted - &v.z))?).frob_norm();
    Ok(stat + feas + comp)
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// `min ½xᵀQx + cᵀx  s.t.  Bᵀx = b,  X(x) = C₀ + Σ xⱼCⱼ ⪰ 0`.
    pub struct AffineQsdp {
        pub q: DMatrix<f64>,
        pub c: DVector<f64>,
        pub b_mat: DMatrix<f64>,
        pub b: DVector<f64>,
        pub c0: SymMat,
        pub cs: Vec<SymMat>,
    }

    impl NsdpProblem for AffineQsdp {
        fn dims(&self) -> Dims {
            Dims {
                n: self.c.len(),
                m: self.b.len(),
                d: self.c0.dim(),
            }
        }
        fn f(&self, x: &DVector<f64>) -> f64 {
            0.5 * x.dot(&(&self.q * x)) + self.c.dot(x)
        }
        fn grad_f(&self, x: &DVector<f64>) -> DVector<f64> {
            &self.q * x + &self.c
        }
        fn hess_f(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
            Some(self.q.clone())
        }
        fn g(&self, x: &DVector<f64>) -> DVector<f64> {
            self.b_mat.transpose() * x - &self.b
        }
        fn jac_g(&self, _x: &DVector<f64>) -> DMatrix<f64> {
            self.b_mat.clone()
        }
        fn hess_g(&self, _x: &DVector<f64>, _y: &DVector<f64>) -> Option<DMatrix<f64>> {
            let n = self.c.len();
            Some(DMatrix::zeros(n, n))
        }
        fn x_mat(&self, x: &DVector<f64>) -> SymMat {
            &self.c0 + &combine(&self.cs, x, self.c0.dim())
        }
        fn a_mat(&self, _x: &DVector<f64>, j: usize) -> SymMat {
            self.cs[j].clone()
        }
        fn hess_x_contract(&self, _x: &DVector<f64>, _z: &SymMat) -> Option<DMatrix<f64>> {
            let n = self.c.len();
            Some(DMatrix::zeros(n, n))
        }
    }

    /// `min x² s.t. x ⪰ 0` (n = d = 1, m = 0).
    pub fn scalar_square() -> AffineQsdp {
        AffineQsdp {
            q: DMatrix::from_element(1, 1, 2.0),
            c: DVector::zeros(1),
            b_mat: DMatrix::zeros(1, 0),
            b: DVector::zeros(0),
            c0: SymMat::zeros(1),
            cs: vec![SymMat::identity(1)],
        }
    }

    /// `X(x) = diag(x)`, `f = ½‖x‖²`, no equalities.
    pub fn diagonal(n: usize) -> AffineQsdp {
        AffineQsdp {
            q: DMatrix::identity(n, n),
            c: DVector::zeros(n),
            b_mat: DMatrix::zeros(n, 0),
            b: DVector::zeros(0),
            c0: SymMat::zeros(n),
            cs: (0..n)
                .map(|j| {
                    let mut e = vec![0.0; n];
                    e[j] = 1.0;
                    SymMat::from_diagonal(&e)
                })
                .collect(),
        }
    }

    /// A problem with genuinely nonlinear `g` and `X` and no second-order callbacks:
    /// `f = x₀⁴ + x₀x₁ + eˣ¹`, `g = x₀² + sin x₁`,
    /// `X = [[x₀x₁, x₁²], [x₁², cos x₀]]`.
    pub struct Curvy;

    impl NsdpProblem for Curvy {
        fn dims(&self) -> Dims {
            Dims { n: 2, m: 1, d: 2 }
        }
        fn f(&self, x: &DVector<f64>) -> f64 {
            x[0].powi(4) + x[0] * x[1] + x[1].exp()
        }
        fn grad_f(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![4.0 * x[0].powi(3) + x[1], x[0] + x[1].exp()])
        }
        fn g(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![x[0] * x[0] + x[1].sin()])
        }
        fn jac_g(&self, x: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_column_slice(2, 1, &[2.0 * x[0], x[1].cos()])
        }
        fn x_mat(&self, x: &DVector<f64>) -> SymMat {
            SymMat::from_row_slice(2, &[x[0] * x[1], x[1] * x[1], x[1] * x[1], x[0].cos()])
        }
        fn a_mat(&self, x: &DVector<f64>, j: usize) -> SymMat {
            match j {
                0 => SymMat::from_row_slice(2, &[x[1], 0.0, 0.0, -x[0].sin()]),
                _ => SymMat::from_row_slice(2, &[x[0], 2.0 * x[1], 2.0 * x[1], 0.0]),
            }
        }
    }

    /// Lagrangian value, for finite-difference oracles.
    pub fn lagrangian<P: NsdpProblem + ?Sized>(prob: &P, v: &PrimalDualPoint) -> f64 {
        prob.f(&v.x) - v.y.dot(&prob.g(&v.x)) - v.z.inner(&prob.x_mat(&v.x))
    }
}
