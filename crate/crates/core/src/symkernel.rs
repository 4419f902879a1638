//! Dense symmetric-matrix calculus.
//!
//! Everything the solver needs from the cone of positive semidefinite
//! matrices lives here: a symmetric matrix type, a deterministic
//! eigendecomposition, the metric projection onto the PSD cone and its
//! directional derivative, a symmetric pseudoinverse, the positive / zero /
//! negative eigenvalue partition, and the tangent-cone test.
//!
//! All functions are pure. Eigenvalues are always sorted in descending
//! order and every eigenvector has its first nonzero component positive,
//! so results are reproducible for a fixed input.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Components smaller than this (relative to a unit eigenvector) do not count
/// as "first nonzero" when fixing eigenvector signs.
const SIGN_THRESHOLD: f64 = 1e-12;

/// Dense real symmetric matrix.
///
/// The constructor symmetrizes its input via `(M + Mᵀ)/2`, so
/// `entry(i, j) == entry(j, i)` holds bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat(DMatrix<f64>);

impl SymMat {
    /// Symmetrize a square matrix. Panics if `m` is not square.
    pub fn new(m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "SymMat::new: matrix is {}x{}", m.nrows(), m.ncols());
        let d = m.nrows();
        let mut out = m;
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = avg;
                out[(j, i)] = avg;
            }
        }
        SymMat(out)
    }

    pub fn zeros(d: usize) -> Self {
        SymMat(DMatrix::zeros(d, d))
    }

    pub fn identity(d: usize) -> Self {
        SymMat(DMatrix::identity(d, d))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMat(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Build from a row-major slice of length `d*d`.
    pub fn from_row_slice(d: usize, data: &[f64]) -> Self {
        Self::new(DMatrix::from_row_slice(d, d, data))
    }

    /// Build from `f(i, j)` evaluated on the upper triangle only.
    pub fn from_upper_fn(d: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMat(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn frob_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Frobenius inner product `tr(VᵀW)`.
    pub fn inner(&self, other: &SymMat) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&self, c: f64) -> SymMat {
        SymMat(&self.0 * c)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `Bᵀ · self · B` for an arbitrary (not necessarily square) `B`.
    pub fn congruence(&self, b: &DMatrix<f64>) -> SymMat {
        SymMat::new(b.transpose() * &self.0 * b)
    }

    /// Length of the scaled-symmetric vectorization of a `d×d` matrix.
    pub fn svec_len(d: usize) -> usize {
        d * (d + 1) / 2
    }

    /// Upper triangle, row-major, off-diagonal entries scaled by √2 so that
    /// `svec(V)·svec(W) = ⟨V, W⟩`.
    pub fn svec(&self) -> DVector<f64> {
        let d = self.dim();
        let mut out = DVector::zeros(Self::svec_len(d));
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                out[k] = if i == j {
                    self.0[(i, j)]
                } else {
                    std::f64::consts::SQRT_2 * self.0[(i, j)]
                };
                k += 1;
            }
        }
        out
    }

    /// Inverse of [`SymMat::svec`].
    pub fn from_svec(d: usize, v: &[f64]) -> SymMat {
        assert_eq!(v.len(), Self::svec_len(d));
        let mut k = 0;
        Self::from_upper_fn(d, |i, j| {
            let x = if i == j {
                v[k]
            } else {
                v[k] * std::f64::consts::FRAC_1_SQRT_2
            };
            k += 1;
            x
        })
    }

    /// Row-major copy of all `d*d` entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }
}

impl Add for &SymMat {
    type Output = SymMat;
    fn add(self, rhs: &SymMat) -> SymMat {
        SymMat(&self.0 + &rhs.0)
    }
}

impl Add for SymMat {
    type Output = SymMat;
    fn add(self, rhs: SymMat) -> SymMat {
        SymMat(self.0 + rhs.0)
    }
}

impl Sub for &SymMat {
    type Output = SymMat;
    fn sub(self, rhs: &SymMat) -> SymMat {
        SymMat(&self.0 - &rhs.0)
    }
}

impl Sub for SymMat {
    type Output = SymMat;
    fn sub(self, rhs: SymMat) -> SymMat {
        SymMat(self.0 - rhs.0)
    }
}

impl AddAssign<&SymMat> for SymMat {
    fn add_assign(&mut self, rhs: &SymMat) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&SymMat> for SymMat {
    fn sub_assign(&mut self, rhs: &SymMat) {
        self.0 -= &rhs.0;
    }
}

impl Neg for &SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        SymMat(-&self.0)
    }
}

impl Mul<f64> for &SymMat {
    type Output = SymMat;
    fn mul(self, c: f64) -> SymMat {
        self.scale(c)
    }
}

/// Orthogonal eigendecomposition `M = P·diag(λ)·Pᵀ` with `λ` descending.
#[derive(Debug, Clone)]
pub struct EigenDecomp {
    pub basis: DMatrix<f64>,
    pub values: DVector<f64>,
}

impl EigenDecomp {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `P·diag(f(λ))·Pᵀ`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SymMat {
        let d = self.dim();
        let mut scaled = self.basis.clone();
        for j in 0..d {
            let s = f(self.values[j]);
            for i in 0..d {
                scaled[(i, j)] *= s;
            }
        }
        SymMat::new(scaled * self.basis.transpose())
    }

    pub fn reconstruct(&self) -> SymMat {
        self.map_spectrum(|l| l)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Columns of `P` selected by `idx`.
    pub fn columns(&self, idx: &[usize]) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, idx.len(), |i, k| self.basis[(i, idx[k])])
    }
}

/// Eigendecomposition with descending eigenvalues and the
/// first-nonzero-component-positive sign convention.
pub fn eig(m: &SymMat) -> Result<EigenDecomp> {
    let d = m.dim();
    let failure = || Error::Eigen {
        dim: d,
        frob_norm: m.frob_norm(),
        finite: m.is_finite(),
    };
    if !m.is_finite() {
        return Err(failure());
    }
    if d == 0 {
        return Ok(EigenDecomp {
            basis: DMatrix::zeros(0, 0),
            values: DVector::zeros(0),
        });
    }
    let raw = SymmetricEigen::try_new(m.0.clone(), f64::EPSILON, 1000 * d.max(4))
        .ok_or_else(failure)?;

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| raw.eigenvalues[b].total_cmp(&raw.eigenvalues[a]));

    let mut basis = DMatrix::zeros(d, d);
    let mut values = DVector::zeros(d);
    for (k, &src) in order.iter().enumerate() {
        values[k] = raw.eigenvalues[src];
        let col = raw.eigenvectors.column(src);
        let sign = col
            .iter()
            .find(|c| c.abs() > SIGN_THRESHOLD)
            .map_or(1.0, |c| c.signum());
        for i in 0..d {
            basis[(i, k)] = sign * col[i];
        }
    }
    Ok(EigenDecomp { basis, values })
}

/// Smallest eigenvalue.
pub fn min_eigenvalue(m: &SymMat) -> Result<f64> {
    if m.dim() == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(eig(m)?.min_value())
}

/// Default classification tolerance `1e-8·(1 + ‖M‖_F)`.
pub fn default_tol(m: &SymMat) -> f64 {
    1e-8 * (1.0 + m.frob_norm())
}

/// Metric projection onto the PSD cone: clamp the spectrum at zero.
pub fn proj_psd(m: &SymMat) -> Result<SymMat> {
    Ok(eig(m)?.map_spectrum(|l| l.max(0.0)))
}

/// Symmetric Moore–Penrose inverse; eigenvalues with `|λ| ≤ tol` are treated as zero.
pub fn pinv(m: &SymMat, tol: f64) -> Result<SymMat> {
    Ok(eig(m)?.map_spectrum(|l| if l.abs() > tol { 1.0 / l } else { 0.0 }))
}

/// Which side of zero an eigenvalue sits on, up to a tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralClass {
    Positive,
    Zero,
    Negative,
}

/// Split of `{0..d}` into positive (alpha), zero (beta) and negative (gamma)
/// eigenvalue indices.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexPartition {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub gamma: Vec<usize>,
    pub tol: f64,
    /// Some `|λ_i|` falls in `(tol, 10·tol]`, so the split is sensitive to the tolerance.
    pub fragile: bool,
}

impl IndexPartition {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.alpha.len(), self.beta.len(), self.gamma.len())
    }

    pub fn dim(&self) -> usize {
        self.alpha.len() + self.beta.len() + self.gamma.len()
    }

    pub fn class_of(&self, i: usize) -> SpectralClass {
        if self.alpha.contains(&i) {
            SpectralClass::Positive
        } else if self.beta.contains(&i) {
            SpectralClass::Zero
        } else {
            SpectralClass::Negative
        }
    }

    /// `beta ∪ gamma`, in index order.
    pub fn beta_gamma(&self) -> Vec<usize> {
        self.beta.iter().chain(self.gamma.iter()).copied().collect()
    }
}

pub fn partition(dec: &EigenDecomp, tol: f64) -> IndexPartition {
    assert!(tol >= 0.0, "partition tolerance must be nonnegative");
    let mut part = IndexPartition {
        alpha: Vec::new(),
        beta: Vec::new(),
        gamma: Vec::new(),
        tol,
        fragile: false,
    };
    for (i, &l) in dec.values.iter().enumerate() {
        if l > tol {
            part.alpha.push(i);
        } else if l < -tol {
            part.gamma.push(i);
        } else {
            part.beta.push(i);
        }
        if l.abs() > tol && l.abs() <= 10.0 * tol {
            part.fragile = true;
        }
    }
    part
}

/// Precomputed spectral data of `M` for evaluating derivatives of the PSD
/// projection at `M` along many directions.
#[derive(Debug, Clone)]
pub struct ProjectionDerivative {
    dec: EigenDecomp,
    part: IndexPartition,
    classes: Vec<SpectralClass>,
}

impl ProjectionDerivative {
    pub fn new(m: &SymMat, tol: f64) -> Result<Self> {
        let dec = eig(m)?;
        Ok(Self::from_decomp(dec, tol))
    }

    pub fn from_decomp(dec: EigenDecomp, tol: f64) -> Self {
        let part = partition(&dec, tol);
        let classes = (0..dec.dim()).map(|i| part.class_of(i)).collect();
        ProjectionDerivative { dec, part, classes }
    }

    pub fn decomposition(&self) -> &EigenDecomp {
        &self.dec
    }

    pub fn partition(&self) -> &IndexPartition {
        &self.part
    }

    /// Weight `u_ij` for every pair outside `beta × beta`.
    fn weight(&self, i: usize, j: usize) -> f64 {
        use SpectralClass::*;
        let (li, lj) = (self.dec.values[i], self.dec.values[j]);
        match (self.classes[i], self.classes[j]) {
            (Positive, Positive) | (Positive, Zero) | (Zero, Positive) => 1.0,
            (Positive, Negative) => li / (li - lj),
            (Negative, Positive) => lj / (lj - li),
            (Zero, Negative) | (Negative, Zero) | (Negative, Negative) => 0.0,
            (Zero, Zero) => unreachable!("beta block handled separately"),
        }
    }

    fn assemble(&self, q: &SymMat, beta_block: impl FnOnce(SymMat) -> Result<SymMat>) -> Result<SymMat> {
        let d = self.dec.dim();
        let p = &self.dec.basis;
        let nt = p.transpose() * q.as_matrix() * p;
        let mut out = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                if self.classes[i] == SpectralClass::Zero && self.classes[j] == SpectralClass::Zero {
                    continue;
                }
                out[(i, j)] = self.weight(i, j) * nt[(i, j)];
            }
        }
        let beta = &self.part.beta;
        if !beta.is_empty() {
            let nbb = SymMat::new(DMatrix::from_fn(beta.len(), beta.len(), |a, b| {
                nt[(beta[a], beta[b])]
            }));
            let blk = beta_block(nbb)?;
            for (a, &i) in beta.iter().enumerate() {
                for (b, &j) in beta.iter().enumerate() {
                    out[(i, j)] = blk.entry(a, b);
                }
            }
        }
        Ok(SymMat::new(p * out * p.transpose()))
    }

    /// Directional derivative `𝒫'(M; Q)`; the beta block is projected, so
    /// this is positively homogeneous but not linear in `Q`.
    pub fn directional(&self, q: &SymMat) -> Result<SymMat> {
        if q.is_zero() {
            return Ok(SymMat::zeros(q.dim()));
        }
        self.assemble(q, |nbb| proj_psd(&nbb))
    }

    /// Linear element of the generalized Jacobian: same weights, identity on
    /// the beta block. Agrees with [`Self::directional`] whenever beta is empty.
    pub fn jacobian_apply(&self, q: &SymMat) -> SymMat {
        self.assemble(q, Ok).expect("identity beta block cannot fail")
    }
}

/// Directional derivative of the PSD projection at `M` along `Q`, with the
/// spectrum of `M` partitioned at tolerance `tol`.
pub fn proj_psd_dirderiv(m: &SymMat, q: &SymMat, tol: f64) -> Result<SymMat> {
    if q.is_zero() {
        return Ok(SymMat::zeros(q.dim()));
    }
    ProjectionDerivative::new(m, tol)?.directional(q)
}

/// `max(0, −λ_min([P_β P_γ]ᵀ M [P_β P_γ]))`: zero iff `M` lies in the tangent
/// cone of the PSD cone at the matrix whose decomposition is `xdec`.
pub fn tangent_cone_residual(xdec: &EigenDecomp, part: &IndexPartition, m: &SymMat) -> Result<f64> {
    let bg = part.beta_gamma();
    if bg.is_empty() {
        return Ok(0.0);
    }
    let pbg = xdec.columns(&bg);
    let restricted = m.congruence(&pbg);
    Ok((-min_eigenvalue(&restricted)?).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, d: usize) -> SymMat {
        SymMat::new(DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0)))
    }

    fn close(a: &SymMat, b: &SymMat, tol: f64) -> bool {
        (a - b).frob_norm() <= tol
    }

    #[test]
    fn constructor_symmetrizes_exactly() {
        let m = SymMat::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 3.0]));
        assert_eq!(m.entry(0, 1), 3.0);
        assert_eq!(m.entry(1, 0), 3.0);
    }

    #[test]
    fn norms_and_inner_match_entrywise() {
        let a = SymMat::from_row_slice(2, &[1.0, 2.0, 2.0, -3.0]);
        let b = SymMat::from_row_slice(2, &[0.5, -1.0, -1.0, 4.0]);
        assert_eq!(a.trace(), -2.0);
        assert!((a.frob_norm() - (1.0f64 + 4.0 + 4.0 + 9.0).sqrt()).abs() < 1e-15);
        assert_eq!(a.inner(&b), 0.5 - 2.0 - 2.0 - 12.0);
        assert!((a.svec().dot(&b.svec()) - a.inner(&b)).abs() < 1e-14);
        assert!(close(&SymMat::from_svec(2, a.svec().as_slice()), &a, 1e-15));
    }

    #[test]
    fn eig_diagonal_is_identity_basis() {
        let dec = eig(&SymMat::from_diagonal(&[3.0, 1.0])).unwrap();
        assert_eq!(dec.values.as_slice(), &[3.0, 1.0]);
        assert!((dec.basis.clone() - DMatrix::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn eig_sorts_ascending_diagonal() {
        let dec = eig(&SymMat::from_diagonal(&[1.0, 3.0])).unwrap();
        assert_eq!(dec.values.as_slice(), &[3.0, 1.0]);
        assert!((dec.basis[(1, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eig_two_by_two_swap() {
        let dec = eig(&SymMat::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert!((dec.values[0] - 1.0).abs() < 1e-14);
        assert!((dec.values[1] + 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((dec.basis[(0, 0)] - s).abs() < 1e-14 && (dec.basis[(1, 0)] - s).abs() < 1e-14);
        assert!((dec.basis[(0, 1)] - s).abs() < 1e-14 && (dec.basis[(1, 1)] + s).abs() < 1e-14);
    }

    #[test]
    fn eig_random_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = random_sym(&mut rng, 6);
        let dec = eig(&m).unwrap();
        assert!(close(&dec.reconstruct(), &m, 1e-10 * (1.0 + m.frob_norm())));
        let ptp = dec.basis.transpose() * &dec.basis - DMatrix::identity(6, 6);
        assert!(ptp.norm() <= 1e-12 * 6.0);
        for k in 1..6 {
            assert!(dec.values[k - 1] >= dec.values[k]);
        }
    }

    #[test]
    fn eig_rejects_nan() {
        let m = SymMat::from_row_slice(2, &[f64::NAN, 0.0, 0.0, 1.0]);
        assert!(matches!(eig(&m), Err(Error::Eigen { finite: false, .. })));
    }

    #[test]
    fn proj_clamps_and_fixes_psd() {
        let p = proj_psd(&SymMat::from_diagonal(&[2.0, -3.0])).unwrap();
        assert!(close(&p, &SymMat::from_diagonal(&[2.0, 0.0]), 1e-15));
        let psd = SymMat::from_row_slice(2, &[2.0, 1.0, 1.0, 2.0]);
        assert!(close(&proj_psd(&psd).unwrap(), &psd, 1e-10));
    }

    #[test]
    fn pinv_examples() {
        let p = pinv(&SymMat::from_diagonal(&[2.0, 0.0]), 1e-12).unwrap();
        assert!(close(&p, &SymMat::from_diagonal(&[0.5, 0.0]), 1e-15));

        let m = SymMat::from_row_slice(2, &[2.0, 1.0, 1.0, -1.0]);
        let mi = pinv(&m, 1e-12).unwrap();
        let res = m.as_matrix() * mi.as_matrix() - DMatrix::identity(2, 2);
        assert!(res.norm() <= 1e-8);
    }

    #[test]
    fn partition_examples() {
        let dec = |v: &[f64]| EigenDecomp {
            basis: DMatrix::identity(v.len(), v.len()),
            values: DVector::from_column_slice(v),
        };
        let p = partition(&dec(&[2.0, 0.0, -1.0]), 1e-8);
        assert_eq!((p.alpha.clone(), p.beta.clone(), p.gamma.clone()), (vec![0], vec![1], vec![2]));
        assert!(!p.fragile);

        let p = partition(&dec(&[1e-9, -1e-9]), 1e-8);
        assert_eq!(p.beta, vec![0, 1]);

        let p = partition(&dec(&[5e-8, -1.0]), 1e-8);
        assert_eq!((p.alpha.clone(), p.gamma.clone()), (vec![0], vec![1]));
        assert!(p.fragile);
        assert_eq!(p.dim(), 2);
    }

    #[test]
    fn dirderiv_at_definite_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_sym(&mut rng, 3);
        let pd = SymMat::from_diagonal(&[3.0, 2.0, 1.0]);
        assert!(close(&proj_psd_dirderiv(&pd, &q, 1e-8).unwrap(), &q, 1e-12));
        let nd = SymMat::from_diagonal(&[-1.0, -2.0, -0.5]);
        assert!(proj_psd_dirderiv(&nd, &q, 1e-8).unwrap().frob_norm() < 1e-14);
    }

    #[test]
    fn dirderiv_u_matrix_example() {
        let m = SymMat::from_diagonal(&[1.0, -1.0]);
        let q = SymMat::from_row_slice(2, &[1.0, 1.0, 1.0, 1.0]);
        let expect = SymMat::from_row_slice(2, &[1.0, 0.5, 0.5, 0.0]);
        let got = proj_psd_dirderiv(&m, &q, 1e-8).unwrap();
        assert!(close(&got, &expect, 1e-14));

        // independent oracle: one-sided difference of the projection
        let t = 1e-6;
        let fd = (&proj_psd(&(&m + &q.scale(t))).unwrap() - &proj_psd(&m).unwrap()).scale(1.0 / t);
        assert!(close(&fd, &expect, 1e-5));
    }

    #[test]
    fn dirderiv_beta_block_is_projected() {
        // M = diag(1, 0): beta = {1}; along Q = diag(0, -1) the projection does not move.
        let m = SymMat::from_diagonal(&[1.0, 0.0]);
        let q = SymMat::from_diagonal(&[0.0, -1.0]);
        let d = proj_psd_dirderiv(&m, &q, 1e-8).unwrap();
        assert!(d.frob_norm() < 1e-15);
        let pd = ProjectionDerivative::new(&m, 1e-8).unwrap();
        assert!(close(&pd.jacobian_apply(&q), &q, 1e-15));
    }

    #[test]
    fn zero_direction_short_circuits() {
        let m = SymMat::from_row_slice(2, &[f64::NAN, 0.0, 0.0, 1.0]);
        assert!(proj_psd_dirderiv(&m, &SymMat::zeros(2), 1e-8).unwrap().is_zero());
    }

    #[test]
    fn tangent_cone_examples() {
        let x = SymMat::identity(2);
        let dec = eig(&x).unwrap();
        let part = partition(&dec, default_tol(&x));
        let m = SymMat::from_diagonal(&[-5.0, -7.0]);
        assert_eq!(tangent_cone_residual(&dec, &part, &m).unwrap(), 0.0);

        let x = SymMat::from_diagonal(&[1.0, 0.0]);
        let dec = eig(&x).unwrap();
        let part = partition(&dec, default_tol(&x));
        let ok = SymMat::from_diagonal(&[-5.0, 1.0]);
        assert_eq!(tangent_cone_residual(&dec, &part, &ok).unwrap(), 0.0);
        let bad = SymMat::from_diagonal(&[7.0, -2.0]);
        assert!((tangent_cone_residual(&dec, &part, &bad).unwrap() - 2.0).abs() < 1e-14);
    }
}
