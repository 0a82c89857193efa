//! Quadratic Z-subproblem backends.
//!
//! All solvers work on the self-representation system `X ≈ XZ` with `X`
//! of shape `d × n` and `Z` of shape `n × n`. Per-column problems pick the
//! cheaper of two algebraically equal forms: the primal `n × n` normal
//! equations, or, when `d < n`, the push-through form
//! `(XᵀSX + λI)⁻¹XᵀS = XᵀS½(S½XXᵀS½ + λI)⁻¹S½` with a `d × d` factorization.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hq::WeightState;

/// Representation matrix `Z` (`n × n`, finite).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix(DMatrix<f64>);

impl CoefficientMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::shape(format!(
                "coefficient matrix must be square, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("non-finite coefficient".into()));
        }
        Ok(CoefficientMatrix(values))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

const SYMMETRY_TOL: f64 = 1e-10;

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("lambda must be positive, got {lambda}")))
    }
}

fn check_positive<'a>(what: &str, values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    for &v in values {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param(format!("{what} must be strictly positive and finite, got {v}")));
        }
    }
    Ok(())
}

fn cholesky(m: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m).ok_or_else(|| Error::Solver("normal matrix is not positive definite".into()))
}

/// LSR: `Z = (XᵀX + λI)⁻¹XᵀX`, one factorization for all columns.
pub fn lsr_closed_form(x: &DMatrix<f64>, lambda: f64) -> Result<CoefficientMatrix> {
    check_lambda(lambda)?;
    let gram = x.tr_mul(x);
    let n = gram.nrows();
    let chol = cholesky(&gram + DMatrix::identity(n, n) * lambda)?;
    CoefficientMatrix::new(chol.solve(&gram))
}

/// `argmin_z ‖Diag(√s)(target − Xz)‖² + λ‖z‖²`.
pub fn weighted_ridge_column(
    x: &DMatrix<f64>,
    s: &DVector<f64>,
    target: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>> {
    check_lambda(lambda)?;
    check_positive("loss weights", s.iter())?;
    if s.len() != x.nrows() || target.len() != x.nrows() {
        return Err(Error::shape("weights and target must have length d"));
    }
    let sys = RidgeSystem::new(x);
    sys.ridge_column(s.as_slice(), target.as_slice(), lambda, None)
}

/// rCIL2 step: `Z = (XᵀDiag(w)X + λI)⁻¹XᵀDiag(w)X`, one shared factorization.
pub fn weighted_ridge_row(x: &DMatrix<f64>, w: &DVector<f64>, lambda: f64) -> Result<CoefficientMatrix> {
    check_lambda(lambda)?;
    check_positive("row weights", w.iter())?;
    if w.len() != x.nrows() {
        return Err(Error::shape("row weights must have length d"));
    }
    CoefficientMatrix::new(RidgeSystem::new(x).ridge_rows(w.as_slice(), lambda)?)
}

/// SSC-IRLS inner step:
/// `z = (XᵀD_L X + λ·Diag(reg_weights))⁻¹ XᵀD_L target`.
pub fn diag_reg_ridge_column(
    x: &DMatrix<f64>,
    loss_weights: &DVector<f64>,
    reg_weights: &DVector<f64>,
    target: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>> {
    check_lambda(lambda)?;
    check_positive("loss weights", loss_weights.iter())?;
    check_positive("regularizer weights", reg_weights.iter())?;
    if loss_weights.len() != x.nrows() || target.len() != x.nrows() || reg_weights.len() != x.ncols() {
        return Err(Error::shape("diag_reg_ridge_column: inconsistent lengths"));
    }
    let sys = RidgeSystem::new(x);
    sys.diag_reg_column(loss_weights.as_slice(), reg_weights.as_slice(), target.as_slice(), lambda, None)
}

fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::shape(format!("{what} must be square")));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > SYMMETRY_TOL * scale {
        return Err(Error::param(format!("{what} is not symmetric")));
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Solves the Sylvester equation `A·Z + λ·Z·W = B` for symmetric `A ≻ 0`
/// and `W ⪰ 0` by diagonalizing both sides:
/// `Z = P [ (PᵀBQ)_pq / (α_p + λω_q) ] Qᵀ`.
///
/// A singular `A` is accepted as long as `W ≻ 0` keeps every denominator
/// positive.
pub fn nuclear_coupled_solve(
    a: &DMatrix<f64>,
    w: &DMatrix<f64>,
    b: &DMatrix<f64>,
    lambda: f64,
) -> Result<CoefficientMatrix> {
    check_lambda(lambda)?;
    let a = check_symmetric(a, "A")?;
    let w = check_symmetric(w, "W")?;
    let n = a.nrows();
    if w.nrows() != n || b.shape() != (n, n) {
        return Err(Error::shape("A, W and B must all be n x n"));
    }
    let ea = SymmetricEigen::new(a);
    let ew = SymmetricEigen::new(w);
    let scale = ea.eigenvalues.amax() + lambda * ew.eigenvalues.amax();
    let floor = 1e-14 * scale.max(f64::MIN_POSITIVE);
    let p = &ea.eigenvectors;
    let q = &ew.eigenvectors;
    let mut core = p.tr_mul(b) * q;
    for c in 0..n {
        for r in 0..n {
            let denom = ea.eigenvalues[r] + lambda * ew.eigenvalues[c];
            if denom <= floor {
                return Err(Error::Solver(format!(
                    "Sylvester operator is singular (alpha + lambda*omega = {denom:.3e})"
                )));
            }
            core[(r, c)] /= denom;
        }
    }
    CoefficientMatrix::new(p * core * q.transpose())
}

/// Result of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgSolution {
    pub z: CoefficientMatrix,
    pub iterations: usize,
    /// `‖B − 𝒜(Z)‖_F` at return.
    pub residual: f64,
}

/// MSR-IRLS inner step. Minimizes
/// `½Σ S_ij E_ij² + λ·½Σ R_ij Z_ij² + λγ·½Tr(Z W Zᵀ)` with `E = X − XZ`,
/// i.e. solves `Xᵀ(S∘XZ) + λR∘Z + λγ·ZW = Xᵀ(S∘X)` by preconditioned
/// conjugate gradients. Stops once the gradient norm is at most
/// `tol·(1 + ‖B‖_F)`.
pub fn composite_cg_solve(
    x: &DMatrix<f64>,
    loss_weights: &WeightState,
    reg_entry_weights: &DMatrix<f64>,
    reg_coupling: &DMatrix<f64>,
    gamma: f64,
    lambda: f64,
    tol: f64,
) -> Result<CgSolution> {
    check_lambda(lambda)?;
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::param(format!("gamma must be nonnegative, got {gamma}")));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol must be positive"));
    }
    let (d, n) = x.shape();
    let s = loss_weights.dense_loss_weights(d, n);
    check_positive("loss weights", s.iter())?;
    check_positive("regularizer weights", reg_entry_weights.iter())?;
    if reg_entry_weights.shape() != (n, n) {
        return Err(Error::shape("regularizer weights must be n x n"));
    }
    let coupling = check_symmetric(reg_coupling, "coupling")?;
    let problem = CoupledProblem {
        x,
        loss_weights: &s,
        reg_entry_weights: Some(reg_entry_weights),
        coupling: Some(&coupling),
        entry_scale: lambda,
        coupling_scale: lambda * gamma,
        zero_diagonal: false,
    };
    problem.solve(None, tol)
}

/// A weighted self-representation least-squares system with cached Gram
/// matrices.
pub(crate) struct RidgeSystem<'a> {
    x: &'a DMatrix<f64>,
    gram: DMatrix<f64>,
    outer: Option<DMatrix<f64>>,
}

impl<'a> RidgeSystem<'a> {
    pub(crate) fn new(x: &'a DMatrix<f64>) -> Self {
        let (d, n) = x.shape();
        let outer = (d < n).then(|| x * x.transpose());
        RidgeSystem {
            x,
            gram: x.tr_mul(x),
            outer,
        }
    }

    pub(crate) fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Weighted ridge for one target, optionally excluding variable `skip`
    /// (whose coefficient is returned as exactly zero).
    pub(crate) fn ridge_column(
        &self,
        s: &[f64],
        target: &[f64],
        lambda: f64,
        skip: Option<usize>,
    ) -> Result<DVector<f64>> {
        let x = self.x;
        let (d, n) = x.shape();
        if let Some(k) = &self.outer {
            // dual form, d x d
            let root: Vec<f64> = s.iter().map(|v| v.sqrt()).collect();
            let mut m = DMatrix::from_fn(d, d, |r, c| root[r] * k[(r, c)] * root[c]);
            if let Some(i) = skip {
                for c in 0..d {
                    for r in 0..d {
                        m[(r, c)] -= root[r] * x[(r, i)] * x[(c, i)] * root[c];
                    }
                }
            }
            for r in 0..d {
                m[(r, r)] += lambda;
            }
            let chol = cholesky(m)?;
            let rhs = DVector::from_iterator(d, (0..d).map(|r| root[r] * target[r]));
            let u = chol.solve(&rhs);
            let v = DVector::from_iterator(d, (0..d).map(|r| root[r] * u[r]));
            let mut z = x.tr_mul(&v);
            if let Some(i) = skip {
                z[i] = 0.0;
            }
            Ok(z)
        } else {
            let weighted = DMatrix::from_fn(d, n, |r, c| s[r] * x[(r, c)]);
            let a = x.tr_mul(&weighted);
            let t = DVector::from_column_slice(target);
            let b = weighted.tr_mul(&t);
            solve_with_skip(a, b, lambda, None, skip)
        }
    }

    /// `(XᵀD_L X + λ·Diag(r))z = XᵀD_L target`, primal form.
    pub(crate) fn diag_reg_column(
        &self,
        loss_w: &[f64],
        reg_w: &[f64],
        target: &[f64],
        lambda: f64,
        skip: Option<usize>,
    ) -> Result<DVector<f64>> {
        let x = self.x;
        let (d, n) = x.shape();
        let first = loss_w[0];
        let (a, b) = if loss_w.iter().all(|&v| v == first) {
            let t = DVector::from_column_slice(target);
            (&self.gram * first, x.tr_mul(&t) * first)
        } else {
            let weighted = DMatrix::from_fn(d, n, |r, c| loss_w[r] * x[(r, c)]);
            let t = DVector::from_column_slice(target);
            (x.tr_mul(&weighted), weighted.tr_mul(&t))
        };
        solve_with_skip(a, b, lambda, Some(reg_w), skip)
    }

    /// Shared-weight ridge for all columns at once. The dual form keeps the
    /// factorization accurate when the weights span many orders of
    /// magnitude, since it only ever sees `W½KW½`, a diagonal scaling of a
    /// well-conditioned matrix.
    pub(crate) fn ridge_rows(&self, w: &[f64], lambda: f64) -> Result<DMatrix<f64>> {
        let x = self.x;
        let (d, n) = x.shape();
        if let Some(k) = &self.outer {
            let root: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
            let mut m = DMatrix::from_fn(d, d, |r, c| root[r] * k[(r, c)] * root[c]);
            for r in 0..d {
                m[(r, r)] += lambda;
            }
            let scaled = DMatrix::from_fn(d, n, |r, c| root[r] * x[(r, c)]);
            let u = cholesky(m)?.solve(&scaled);
            Ok(scaled.tr_mul(&u))
        } else {
            let weighted = DMatrix::from_fn(d, n, |r, c| w[r] * x[(r, c)]);
            let rhs = x.tr_mul(&weighted);
            let chol = cholesky(&rhs + DMatrix::identity(n, n) * lambda)?;
            Ok(chol.solve(&rhs))
        }
    }

    /// Column-by-column weighted ridge with per-column loss weights `s`
    /// (`d × n`), as in the CIL2 step.
    pub(crate) fn ridge_columns(&self, s: &DMatrix<f64>, lambda: f64, zero_diagonal: bool) -> Result<DMatrix<f64>> {
        let n = self.x.ncols();
        let cols: Vec<Result<DVector<f64>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                self.ridge_column(
                    s.column(i).as_slice(),
                    self.x.column(i).as_slice(),
                    lambda,
                    zero_diagonal.then_some(i),
                )
            })
            .collect();
        assemble(n, cols)
    }

    pub(crate) fn diag_reg_columns(
        &self,
        loss_w: &DMatrix<f64>,
        reg_w: &DMatrix<f64>,
        lambda: f64,
        zero_diagonal: bool,
    ) -> Result<DMatrix<f64>> {
        let n = self.x.ncols();
        let cols: Vec<Result<DVector<f64>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                self.diag_reg_column(
                    loss_w.column(i).as_slice(),
                    reg_w.column(i).as_slice(),
                    self.x.column(i).as_slice(),
                    lambda,
                    zero_diagonal.then_some(i),
                )
            })
            .collect();
        assemble(n, cols)
    }
}

fn assemble(n: usize, cols: Vec<Result<DVector<f64>>>) -> Result<DMatrix<f64>> {
    let mut z = DMatrix::zeros(n, n);
    for (i, col) in cols.into_iter().enumerate() {
        z.set_column(i, &col?);
    }
    Ok(z)
}

/// Solves `(A + λ·Diag(r))z = b` (r = 1 when absent), deleting row and
/// column `skip` so that `z_skip = 0` is enforced exactly.
fn solve_with_skip(
    a: DMatrix<f64>,
    b: DVector<f64>,
    lambda: f64,
    reg_w: Option<&[f64]>,
    skip: Option<usize>,
) -> Result<DVector<f64>> {
    let n = a.nrows();
    let keep: Vec<usize> = (0..n).filter(|&j| Some(j) != skip).collect();
    let m = keep.len();
    let mut sub = DMatrix::from_fn(m, m, |r, c| a[(keep[r], keep[c])]);
    for (r, &j) in keep.iter().enumerate() {
        sub[(r, r)] += lambda * reg_w.map_or(1.0, |w| w[j]);
    }
    let rhs = DVector::from_iterator(m, keep.iter().map(|&j| b[j]));
    let sol = cholesky(sub)?.solve(&rhs);
    let mut z = DVector::zeros(n);
    for (r, &j) in keep.iter().enumerate() {
        z[j] = sol[r];
    }
    Ok(z)
}

/// The coupled quadratic
/// `½Σ S_ij E_ij² + a·½Σ R_ij Z_ij² + b·½Tr(Z W Zᵀ)` and its
/// normal operator `𝒜(Z) = Xᵀ(S∘XZ) + a·R∘Z + b·ZW`.
pub(crate) struct CoupledProblem<'a> {
    pub x: &'a DMatrix<f64>,
    pub loss_weights: &'a DMatrix<f64>,
    pub reg_entry_weights: Option<&'a DMatrix<f64>>,
    pub coupling: Option<&'a DMatrix<f64>>,
    pub entry_scale: f64,
    pub coupling_scale: f64,
    pub zero_diagonal: bool,
}

impl CoupledProblem<'_> {
    fn apply(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let xz = self.x * z;
        let weighted = xz.component_mul(self.loss_weights);
        let mut out = self.x.tr_mul(&weighted);
        if let Some(r) = self.reg_entry_weights {
            out += r.component_mul(z) * self.entry_scale;
        }
        if let Some(w) = self.coupling {
            out += (z * w) * self.coupling_scale;
        }
        self.mask(&mut out);
        out
    }

    fn mask(&self, m: &mut DMatrix<f64>) {
        if self.zero_diagonal {
            m.fill_diagonal(0.0);
        }
    }

    fn rhs(&self) -> DMatrix<f64> {
        let mut b = self.x.tr_mul(&self.x.component_mul(self.loss_weights));
        self.mask(&mut b);
        b
    }

    fn jacobi(&self) -> DMatrix<f64> {
        let (d, n) = self.x.shape();
        let mut diag = DMatrix::zeros(n, n);
        for q in 0..n {
            for p in 0..n {
                let mut v = 0.0;
                for r in 0..d {
                    v += self.loss_weights[(r, q)] * self.x[(r, p)] * self.x[(r, p)];
                }
                if let Some(rw) = self.reg_entry_weights {
                    v += self.entry_scale * rw[(p, q)];
                }
                if let Some(w) = self.coupling {
                    v += self.coupling_scale * w[(q, q)];
                }
                diag[(p, q)] = if v > 0.0 { 1.0 / v } else { 1.0 };
            }
        }
        diag
    }

    /// Preconditioned CG from `warm` (or zero). Fails if `10·n²` iterations
    /// do not reach `‖B − 𝒜(Z)‖ ≤ tol·(1 + ‖B‖)`.
    pub(crate) fn solve(&self, warm: Option<&DMatrix<f64>>, tol: f64) -> Result<CgSolution> {
        let n = self.x.ncols();
        let b = self.rhs();
        let target = tol * (1.0 + b.norm());
        let cap = 10 * n * n;
        let precond = self.jacobi();
        let mut z = match warm {
            Some(w) => {
                let mut w = w.clone();
                self.mask(&mut w);
                w
            }
            None => DMatrix::zeros(n, n),
        };
        let mut r = &b - self.apply(&z);
        let mut res = r.norm();
        if res <= target {
            return Ok(CgSolution {
                z: CoefficientMatrix::new(z)?,
                iterations: 0,
                residual: res,
            });
        }
        let mut y = r.component_mul(&precond);
        let mut p = y.clone();
        let mut ry = r.dot(&y);
        for it in 1..=cap {
            let ap = self.apply(&p);
            let curv = p.dot(&ap);
            if !(curv > 0.0) {
                return Err(Error::Solver("coupled operator is not positive definite".into()));
            }
            let alpha = ry / curv;
            z += &p * alpha;
            r -= &ap * alpha;
            res = r.norm();
            if res <= target {
                return Ok(CgSolution {
                    z: CoefficientMatrix::new(z)?,
                    iterations: it,
                    residual: res,
                });
            }
            y = r.component_mul(&precond);
            let ry_next = r.dot(&y);
            let beta = ry_next / ry;
            ry = ry_next;
            p = &y + p * beta;
        }
        Err(Error::NoConvergence {
            iterations: cap,
            residual: res / (1.0 + b.norm()),
        })
    }
}
