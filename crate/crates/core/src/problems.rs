//! Polynomial problem files and the built-in registry.
//!
//! # File format
//!
//! Problems are TOML documents (UTF-8, decimal numbers):
//!
//! ```toml
//! format_version = 1
//! id = "example"
//! description = "optional free text"
//! n = 2                          # variables
//! m = 1                          # equality constraints
//! d = 2                          # matrix constraint is d x d
//! tags = ["srcq", "sosc", "strict_complementarity"]
//!
//! [objective]                    # f, degree <= 4
//! "2,0" = 0.5                    # 0.5 * x1^2
//! "0,1" = -1.0                   # -x2
//!
//! [[constraints]]                # one table per g_i, degree <= 2
//! "1,0" = 1.0
//! "0,0" = -1.0
//!
//! [matrix."0,1"]                 # entry (0,1) of X(x), degree <= 2
//! "1,1" = 3.0
//!
//! [reference]                    # optional KKT point, verified on load
//! x = [1.0, 0.0]
//! y = [0.0]
//! z = [[0.0, 0.0], [0.0, 0.0]]
//! tol = 1e-10
//! partition = [1, 1, 0]          # optional |alpha|, |beta|, |gamma| of X* - Z*
//! ```
//!
//! Polynomial tables map a monomial, written as comma-separated exponents
//! (one per variable), to its coefficient. Matrix entries use zero-based
//! `"i,j"` keys; each entry is given once, in either triangle, and mirrored.
//! Missing entries are zero. Recognised tags are `srcq`, `sosc`,
//! `strict_complementarity` and `beta_nonempty`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, Dims, NsdpProblem, PrimalDualPoint};
use crate::symkernel::{self, SymMat};

pub const FORMAT_VERSION: u32 = 1;
pub const MAX_DEGREE_OBJECTIVE: u32 = 4;
pub const MAX_DEGREE_CONSTRAINT: u32 = 2;
pub const MAX_DEGREE_MATRIX: u32 = 2;

#[derive(Debug, Clone, PartialEq)]
struct Monomial {
    exps: Vec<u32>,
    coef: f64,
}

/// A multivariate polynomial in `n` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    n: usize,
    terms: Vec<Monomial>,
}

fn pow(x: f64, e: u32) -> f64 {
    match e {
        0 => 1.0,
        1 => x,
        _ => x.powi(e as i32),
    }
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        Polynomial { n, terms: Vec::new() }
    }

    /// From `(exponents, coefficient)` pairs; zero coefficients are dropped.
    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Self {
        let terms = terms
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(exps, coef)| {
                assert_eq!(exps.len(), n, "monomial has wrong arity");
                Monomial { exps, coef }
            })
            .collect();
        Polynomial { n, terms }
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.exps.iter().sum::<u32>()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn monomial(exps: &[u32], x: &DVector<f64>, skip: &[usize]) -> f64 {
        let mut e = exps.to_vec();
        for &s in skip {
            e[s] -= 1;
        }
        e.iter().zip(x.iter()).map(|(&k, &xi)| pow(xi, k)).product()
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.terms.iter().map(|t| t.coef * Self::monomial(&t.exps, x, &[])).sum()
    }

    pub fn partial(&self, x: &DVector<f64>, j: usize) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.exps[j] > 0)
            .map(|t| t.coef * t.exps[j] as f64 * Self::monomial(&t.exps, x, &[j]))
            .sum()
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n, |j, _| self.partial(x, j))
    }

    pub fn second_partial(&self, x: &DVector<f64>, i: usize, j: usize) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let c = if i == j {
                    let e = t.exps[i];
                    if e < 2 {
                        return 0.0;
                    }
                    (e * (e - 1)) as f64
                } else {
                    if t.exps[i] == 0 || t.exps[j] == 0 {
                        return 0.0;
                    }
                    (t.exps[i] * t.exps[j]) as f64
                };
                t.coef * c * Self::monomial(&t.exps, x, &[i, j])
            })
            .sum()
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in i..self.n {
                let v = self.second_partial(x, i, j);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Srcq,
    Sosc,
    StrictComplementarity,
    BetaNonempty,
}

impl Tag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Tag::Srcq => "srcq",
            Tag::Sosc => "sosc",
            Tag::StrictComplementarity => "strict_complementarity",
            Tag::BetaNonempty => "beta_nonempty",
        }
    }

    pub fn parse(s: &str) -> Option<Tag> {
        match s {
            "srcq" => Some(Tag::Srcq),
            "sosc" => Some(Tag::Sosc),
            "strict_complementarity" => Some(Tag::StrictComplementarity),
            "beta_nonempty" => Some(Tag::BetaNonempty),
            _ => None,
        }
    }
}

/// A stored KKT point, verified when the problem is loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub point: PrimalDualPoint,
    pub tol: f64,
    /// Declared `(|α|, |β|, |γ|)` of `X(x*) − Z*`.
    pub partition: Option<(usize, usize, usize)>,
}

/// A polynomial nonlinear SDP.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub id: String,
    pub description: String,
    pub dims: Dims,
    pub objective: Polynomial,
    pub constraints: Vec<Polynomial>,
    /// Upper triangle of `X(x)`, keyed by `(i, j)` with `i ≤ j`.
    pub matrix: BTreeMap<(usize, usize), Polynomial>,
    pub tags: BTreeSet<Tag>,
    pub reference: Option<Reference>,
}

impl ProblemSpec {
    pub fn has_tag(&self, t: Tag) -> bool {
        self.tags.contains(&t)
    }

    /// Tagged as satisfying both SRCQ and SOSC at the reference point.
    pub fn is_regular(&self) -> bool {
        self.has_tag(Tag::Srcq) && self.has_tag(Tag::Sosc)
    }

    pub fn reference_point(&self) -> Option<&PrimalDualPoint> {
        self.reference.as_ref().map(|r| &r.point)
    }

    fn matrix_of(&self, f: impl Fn(&Polynomial) -> f64) -> SymMat {
        let d = self.dims.d;
        let mut m = DMatrix::zeros(d, d);
        for (&(i, j), p) in &self.matrix {
            let v = f(p);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        SymMat::new(m)
    }

    /// Check `σ(v*)` and the declared partition.
    pub fn verify_reference(&self) -> Result<()> {
        let Some(r) = &self.reference else {
            return Ok(());
        };
        let res = model::kkt_residual(self, &r.point)?;
        if !(res <= r.tol) {
            return Err(Error::Verification {
                id: self.id.clone(),
                residual: res,
                tol: r.tol,
            });
        }
        if let Some(declared) = r.partition {
            let m = &self.x_mat(&r.point.x) - &r.point.z;
            let dec = symkernel::eig(&m)?;
            let got = symkernel::partition(&dec, symkernel::default_tol(&m)).sizes();
            if got != declared {
                return Err(Error::Parse {
                    location: format!("{}: reference.partition", self.id),
                    message: format!("declared (alpha, beta, gamma) = {declared:?}, computed {got:?}"),
                });
            }
        }
        Ok(())
    }
}

impl NsdpProblem for ProblemSpec {
    fn dims(&self) -> Dims {
        self.dims
    }

    fn f(&self, x: &DVector<f64>) -> f64 {
        self.objective.eval(x)
    }

    fn grad_f(&self, x: &DVector<f64>) -> DVector<f64> {
        self.objective.gradient(x)
    }

    fn hess_f(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.objective.hessian(x))
    }

    fn g(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dims.m, self.constraints.iter().map(|p| p.eval(x)))
    }

    fn jac_g(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.dims.n, self.dims.m);
        for (i, p) in self.constraints.iter().enumerate() {
            j.set_column(i, &p.gradient(x));
        }
        j
    }

    fn hess_g(&self, x: &DVector<f64>, y: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = self.dims.n;
        let mut h = DMatrix::zeros(n, n);
        for (p, &yi) in self.constraints.iter().zip(y.iter()) {
            if yi != 0.0 {
                h += p.hessian(x) * yi;
            }
        }
        Some(h)
    }

    fn x_mat(&self, x: &DVector<f64>) -> SymMat {
        self.matrix_of(|p| p.eval(x))
    }

    fn a_mat(&self, x: &DVector<f64>, j: usize) -> SymMat {
        self.matrix_of(|p| p.partial(x, j))
    }

    fn hess_x_contract(&self, x: &DVector<f64>, z: &SymMat) -> Option<DMatrix<f64>> {
        let n = self.dims.n;
        let mut h = DMatrix::zeros(n, n);
        for (&(i, j), p) in &self.matrix {
            // ⟨Z, E⟩ counts an off-diagonal entry twice
            let w = if i == j { z.entry(i, i) } else { 2.0 * z.entry(i, j) };
            if w != 0.0 {
                h += p.hessian(x) * w;
            }
        }
        Some(h)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    format_version: u32,
    id: String,
    #[serde(default)]
    description: String,
    n: usize,
    m: usize,
    d: usize,
    #[serde(default)]
    tags: Vec<String>,
    #[serde(default)]
    objective: BTreeMap<String, f64>,
    #[serde(default)]
    constraints: Vec<BTreeMap<String, f64>>,
    #[serde(default)]
    matrix: BTreeMap<String, BTreeMap<String, f64>>,
    reference: Option<RawReference>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReference {
    x: Vec<f64>,
    #[serde(default)]
    y: Vec<f64>,
    z: Vec<Vec<f64>>,
    #[serde(default = "default_reference_tol")]
    tol: f64,
    partition: Option<[usize; 3]>,
}

fn default_reference_tol() -> f64 {
    1e-10
}

fn parse_err(source: &str, field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        location: format!("{source}: {}", field.into()),
        message: message.into(),
    }
}

fn parse_indices(key: &str, expect: usize) -> Option<Vec<u32>> {
    let parts: Vec<&str> = key.split(',').map(str::trim).collect();
    if parts.len() != expect {
        return None;
    }
    parts.iter().map(|p| p.parse::<u32>().ok()).collect()
}

fn parse_poly(source: &str, field: &str, table: &BTreeMap<String, f64>, n: usize, max_deg: u32) -> Result<Polynomial> {
    let mut seen: BTreeMap<Vec<u32>, String> = BTreeMap::new();
    let mut terms = Vec::new();
    for (key, &coef) in table {
        let exps = parse_indices(key, n).ok_or_else(|| {
            parse_err(
                source,
                format!("{field}.\"{key}\""),
                format!("monomial key must be {n} comma-separated non-negative exponents"),
            )
        })?;
        if !coef.is_finite() {
            return Err(parse_err(source, format!("{field}.\"{key}\""), "coefficient is not finite"));
        }
        let deg: u32 = exps.iter().sum();
        if deg > max_deg {
            return Err(parse_err(
                source,
                format!("{field}.\"{key}\""),
                format!("degree {deg} exceeds the limit {max_deg}"),
            ));
        }
        if let Some(prev) = seen.insert(exps.clone(), key.clone()) {
            return Err(parse_err(
                source,
                format!("{field}.\"{key}\""),
                format!("monomial already given as \"{prev}\""),
            ));
        }
        terms.push((exps, coef));
    }
    Ok(Polynomial::from_terms(n, terms))
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, col)
}

/// Parse a problem document; `source` names it in error messages.
/// The reference point, when present, is verified.
pub fn parse(text: &str, source: &str) -> Result<ProblemSpec> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| {
        let location = match e.span() {
            Some(span) => {
                let (l, c) = line_col(text, span.start);
                format!("{source}: line {l}, column {c}")
            }
            None => source.to_string(),
        };
        Error::Parse {
            location,
            message: e.message().to_string(),
        }
    })?;
    if raw.format_version != FORMAT_VERSION {
        return Err(parse_err(
            source,
            "format_version",
            format!("unsupported version {}, expected {FORMAT_VERSION}", raw.format_version),
        ));
    }
    let (n, m, d) = (raw.n, raw.m, raw.d);
    if n == 0 || d == 0 {
        return Err(parse_err(source, "n/d", "n and d must be positive"));
    }
    if raw.id.trim().is_empty() {
        return Err(parse_err(source, "id", "id must not be empty"));
    }

    let mut tags = BTreeSet::new();
    for t in &raw.tags {
        let tag = Tag::parse(t).ok_or_else(|| parse_err(source, "tags", format!("unknown tag \"{t}\"")))?;
        tags.insert(tag);
    }

    let objective = parse_poly(source, "objective", &raw.objective, n, MAX_DEGREE_OBJECTIVE)?;
    if raw.constraints.len() != m {
        return Err(parse_err(
            source,
            "constraints",
            format!("{} constraint tables given, m = {m}", raw.constraints.len()),
        ));
    }
    let constraints = raw
        .constraints
        .iter()
        .enumerate()
        .map(|(i, t)| parse_poly(source, &format!("constraints[{i}]"), t, n, MAX_DEGREE_CONSTRAINT))
        .collect::<Result<Vec<_>>>()?;

    let mut matrix = BTreeMap::new();
    for (key, table) in &raw.matrix {
        let field = format!("matrix.\"{key}\"");
        let idx = parse_indices(key, 2)
            .ok_or_else(|| parse_err(source, &field, "matrix entry key must be \"i,j\""))?;
        let (i, j) = (idx[0] as usize, idx[1] as usize);
        if i >= d || j >= d {
            return Err(parse_err(source, &field, format!("index out of range for d = {d}")));
        }
        let slot = (i.min(j), i.max(j));
        let poly = parse_poly(source, &field, table, n, MAX_DEGREE_MATRIX)?;
        if matrix.insert(slot, poly).is_some() {
            return Err(parse_err(
                source,
                &field,
                format!("asymmetric entry table: ({j},{i}) is also defined; give each entry once"),
            ));
        }
    }
    matrix.retain(|_, p: &mut Polynomial| !p.is_zero());

    let dims = Dims { n, m, d };
    let reference = match raw.reference {
        None => None,
        Some(r) => {
            if r.x.len() != n || r.y.len() != m || r.z.len() != d || r.z.iter().any(|row| row.len() != d) {
                return Err(parse_err(source, "reference", format!("x, y, z must have sizes {n}, {m}, {d}x{d}")));
            }
            for i in 0..d {
                for j in 0..i {
                    if r.z[i][j] != r.z[j][i] {
                        return Err(parse_err(source, "reference.z", format!("not symmetric at ({i},{j})")));
                    }
                }
            }
            if !(r.tol > 0.0) {
                return Err(parse_err(source, "reference.tol", "must be positive"));
            }
            let z = SymMat::from_row_slice(d, &r.z.concat());
            Some(Reference {
                point: PrimalDualPoint::new(DVector::from_vec(r.x), DVector::from_vec(r.y), z),
                tol: r.tol,
                partition: r.partition.map(|p| (p[0], p[1], p[2])),
            })
        }
    };

    let spec = ProblemSpec {
        id: raw.id,
        description: raw.description,
        dims,
        objective,
        constraints,
        matrix,
        tags,
        reference,
    };
    spec.verify_reference()?;
    Ok(spec)
}

/// Read and parse a problem file.
pub fn load(path: &Path) -> Result<ProblemSpec> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text, &path.display().to_string())
}

const BUILTIN: &[(&str, &str)] = &[
    ("scalar-degenerate", include_str!("../problems/scalar-degenerate.toml")),
    ("nondegenerate-2x2", include_str!("../problems/nondegenerate-2x2.toml")),
    ("beta-2x2", include_str!("../problems/beta-2x2.toml")),
    ("affine-qsdp", include_str!("../problems/affine-qsdp.toml")),
    ("nonlinear-3x3", include_str!("../problems/nonlinear-3x3.toml")),
    ("strict-2x2", include_str!("../problems/strict-2x2.toml")),
];

/// Source text of a built-in problem.
pub fn builtin_source(id: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(k, _)| *k == id).map(|(_, t)| *t)
}

pub fn registry_ids() -> Vec<&'static str> {
    BUILTIN.iter().map(|(k, _)| *k).collect()
}

/// All built-in problems, each with a verified reference point.
pub fn registry() -> Vec<ProblemSpec> {
    BUILTIN
        .iter()
        .map(|(id, text)| parse(text, &format!("builtin:{id}")).expect("built-in problem must parse and verify"))
        .collect()
}

pub fn builtin(id: &str) -> Option<ProblemSpec> {
    builtin_source(id).map(|text| parse(text, &format!("builtin:{id}")).expect("built-in problem must parse and verify"))
}

/// Outcome of [`derivative_check`].
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeReport {
    pub points: usize,
    pub checks: usize,
    pub max_rel_err: f64,
    /// Entry attaining `max_rel_err`, e.g. `grad_f[1]`.
    pub worst: String,
    pub threshold: f64,
    pub passed: bool,
}

pub const DERIVATIVE_THRESHOLD: f64 = 1e-5;

struct Tracker {
    max: f64,
    worst: String,
    checks: usize,
}

impl Tracker {
    fn compare(&mut self, analytic: f64, fd: f64, label: impl FnOnce() -> String) {
        self.checks += 1;
        let err = (analytic - fd).abs() / analytic.abs().max(1.0);
        let err = if err.is_nan() { f64::INFINITY } else { err };
        if err > self.max || self.worst.is_empty() {
            self.max = err;
            self.worst = label();
        }
    }
}

/// Compare every analytic first and second derivative against central
/// differences at 10 seeded random points in `[-1, 1]ⁿ`.
pub fn derivative_check(prob: &dyn NsdpProblem, seed: u64) -> DerivativeReport {
    const POINTS: usize = 10;
    let Dims { n, m, d } = prob.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tracker {
        max: 0.0,
        worst: String::new(),
        checks: 0,
    };
    let unit = |rng: &mut ChaCha8Rng, len: usize| DVector::from_fn(len, |_, _| rng.random_range(-1.0..1.0));
    let central = |x: &DVector<f64>, j: usize, eval: &dyn Fn(&DVector<f64>) -> DVector<f64>| {
        let h = model::fd_step(x[j]);
        let mut xp = x.clone();
        xp[j] += h;
        let fp = eval(&xp);
        xp[j] = x[j] - h;
        let fm = eval(&xp);
        (fp - fm) / (2.0 * h)
    };
    let flat = |s: SymMat| DVector::from_vec(s.to_row_major());

    for _ in 0..POINTS {
        let x = unit(&mut rng, n);
        let y = unit(&mut rng, m);
        let z = SymMat::new(DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0)));

        let gf = prob.grad_f(&x);
        let jg = prob.jac_g(&x);
        for j in 0..n {
            let fd = central(&x, j, &|p| DVector::from_element(1, prob.f(p)));
            t.compare(gf[j], fd[0], || format!("grad_f[{j}]"));
            if m > 0 {
                let fd = central(&x, j, &|p| prob.g(p));
                for i in 0..m {
                    t.compare(jg[(j, i)], fd[i], || format!("jac_g[{j},{i}]"));
                }
            }
            let fd = central(&x, j, &|p| flat(prob.x_mat(p)));
            let a = prob.a_mat(&x, j).to_row_major();
            for (k, (&av, &fv)) in a.iter().zip(fd.iter()).enumerate() {
                t.compare(av, fv, || format!("a_mat[{j}]({},{})", k / d, k % d));
            }
        }

        let mut second = |name: &str, analytic: Option<DMatrix<f64>>, eval: &dyn Fn(&DVector<f64>) -> DVector<f64>| {
            if let Some(h) = analytic {
                for j in 0..n {
                    let col = central(&x, j, eval);
                    for i in 0..n {
                        t.compare(h[(i, j)], col[i], || format!("{name}[{i},{j}]"));
                    }
                }
            }
        };
        second("hess_f", prob.hess_f(&x), &|p| prob.grad_f(p));
        if m > 0 {
            second("hess_g", prob.hess_g(&x, &y), &|p| prob.jac_g(p) * &y);
        }
        second("hess_x_contract", prob.hess_x_contract(&x, &z), &|p| {
            DVector::from_fn(n, |j, _| prob.a_mat(p, j).inner(&z))
        });
    }
    DerivativeReport {
        points: POINTS,
        checks: t.checks,
        max_rel_err: t.max,
        worst: t.worst,
        threshold: DERIVATIVE_THRESHOLD,
        passed: t.max <= DERIVATIVE_THRESHOLD,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact_at_integer_points() {
        // 3x²y − 2y² + 5
        let p = Polynomial::from_terms(2, vec![(vec![2, 1], 3.0), (vec![0, 2], -2.0), (vec![0, 0], 5.0)]);
        let x = DVector::from_vec(vec![2.0, -3.0]);
        assert_eq!(p.eval(&x), 3.0 * 4.0 * -3.0 - 2.0 * 9.0 + 5.0);
        assert_eq!(p.gradient(&x), DVector::from_vec(vec![6.0 * 2.0 * -3.0, 3.0 * 4.0 - 4.0 * -3.0]));
        let h = p.hessian(&x);
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[6.0 * -3.0, 12.0, 12.0, -4.0]));
        assert_eq!(p.degree(), 3);
        assert!(Polynomial::zero(2).is_zero());
    }

    #[test]
    fn registry_verifies_and_matches_ids() {
        let reg = registry();
        assert_eq!(reg.len(), registry_ids().len());
        for (spec, id) in reg.iter().zip(registry_ids()) {
            assert_eq!(spec.id, id);
            let r = spec.reference.as_ref().unwrap();
            assert!(model::kkt_residual(spec, &r.point).unwrap() <= 1e-10);
        }
        assert!(builtin("no-such-problem").is_none());
    }

    #[test]
    fn registry_passes_derivative_check() {
        for spec in registry() {
            let rep = derivative_check(&spec, 1);
            assert!(rep.passed, "{}: {} at {}", spec.id, rep.max_rel_err, rep.worst);
        }
    }

    #[test]
    fn nonlinear_instance_exercises_matrix_curvature() {
        let p = builtin("nonlinear-3x3").unwrap();
        let v = p.reference_point().unwrap();
        let hc = p.hess_x_contract(&v.x, &v.z).unwrap();
        assert_eq!(hc[(1, 1)], -2.0);
        let curv = model::curvature_term(&p, &v.x, &v.z, 1e-12).unwrap();
        assert!((curv[(1, 1)] - 1.0).abs() < 1e-14);
    }

    fn scalar_text() -> &'static str {
        builtin_source("scalar-degenerate").unwrap()
    }

    #[test]
    fn parse_errors_carry_context() {
        let bad = scalar_text().replace("[matrix.\"0,0\"]", "[matrix.\"0,0\"]\n\"3\" = 1.0");
        match parse(&bad, "t") {
            Err(Error::Parse { location, message }) => {
                assert!(location.contains("matrix"), "{location}");
                assert!(message.contains("degree"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let syntax = "format_version = 1\nid = \n";
        match parse(syntax, "t") {
            Err(Error::Parse { location, .. }) => assert!(location.contains("line 2"), "{location}"),
            other => panic!("expected parse error, got {other:?}"),
        }
        let version = scalar_text().replace("format_version = 1", "format_version = 9");
        assert!(matches!(parse(&version, "t"), Err(Error::Parse { .. })));
        let tag = scalar_text().replace("\"sosc\"", "\"shiny\"");
        assert!(matches!(parse(&tag, "t"), Err(Error::Parse { .. })));
        let arity = scalar_text().replace("\"2\" = 1.0", "\"2,0\" = 1.0");
        assert!(matches!(parse(&arity, "t"), Err(Error::Parse { .. })));
    }

    #[test]
    fn asymmetric_matrix_table_is_rejected() {
        let text = builtin_source("beta-2x2").unwrap().replace(
            "[matrix.\"1,1\"]",
            "[matrix.\"1,0\"]\n\"1,0\" = 2.0\n\n[matrix.\"1,1\"]",
        );
        match parse(&text, "t") {
            Err(Error::Parse { message, .. }) => assert!(message.contains("asymmetric")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn lower_triangle_entry_is_mirrored() {
        let text = builtin_source("beta-2x2").unwrap().replace("[matrix.\"0,1\"]", "[matrix.\"1,0\"]");
        let a = parse(&text, "t").unwrap();
        let b = builtin("beta-2x2").unwrap();
        assert_eq!(a.matrix, b.matrix);
    }

    #[test]
    fn wrong_reference_is_reported() {
        let text = scalar_text().replace("x = [0.0]", "x = [0.5]");
        match parse(&text, "t") {
            Err(Error::Verification { residual, .. }) => assert!((residual - 1.0).abs() < 1e-12),
            other => panic!("expected verification error, got {other:?}"),
        }
        let part = scalar_text().replace("partition = [0, 1, 0]", "partition = [1, 0, 0]");
        assert!(matches!(parse(&part, "t"), Err(Error::Parse { .. })));
    }
}
