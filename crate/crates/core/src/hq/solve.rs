use nalgebra::{DMatrix, DVector};

use super::{
    objective_value, update_reg_weights, update_sigma2, update_weights, Init, LossKind, LossSpec, RegKind, RegSpec,
    SigmaMode, SolveOptions, SolveReport, WeightState,
};
use crate::error::{Error, Result};
use crate::matio::DataMatrix;
use crate::solvers::{lsr_closed_form, nuclear_coupled_solve, CoefficientMatrix, CoupledProblem, RidgeSystem};

/// Runs the half-quadratic alternation for `L(X − XZ) + λR(Z)`.
///
/// The Z-step minimizes `½ Σ Ŝ_ij E_ij² + λ Q(Z)`, where `Ŝ` are the loss
/// weights (`2` for the plain Frobenius loss, which needs no reweighting)
/// and `Q` is `R` itself for `‖Z‖²_F` or its quadratic majorizer otherwise.
pub fn hq_solve(x: &DataMatrix, loss: &LossSpec, reg: &RegSpec, opts: &SolveOptions) -> Result<SolveReport> {
    loss.validate()?;
    reg.validate()?;
    opts.validate()?;
    let x = x.values();
    let n = x.ncols();
    let sys = RidgeSystem::new(x);

    let lsr = |lambda: f64| -> Result<DMatrix<f64>> {
        if opts.zero_diagonal {
            sys.ridge_columns(&DMatrix::from_element(x.nrows(), n, 1.0), lambda, true)
        } else {
            Ok(lsr_closed_form(x, lambda)?.into_inner())
        }
    };

    let z0 = match opts.init {
        Init::Zero => DMatrix::zeros(n, n),
        Init::Lsr => lsr(reg.lambda)?,
    };

    let auto_sigma = loss.kind.is_correntropy() && loss.sigma_mode == SigmaMode::Auto;
    let mut sigma2 = loss.sigma2;
    let residual = |z: &DMatrix<f64>| x - x * z;
    if auto_sigma {
        sigma2 = update_sigma2(loss.kind, &residual(&z0));
    }
    let mut trace = vec![objective_value(&loss.with_sigma2(sigma2), reg, x, &z0)?];
    let mut sigma_trace = vec![sigma2];

    if loss.kind == LossKind::Frobenius && reg.kind == RegKind::FrobeniusSq {
        let z = lsr(reg.lambda)?;
        trace.push(objective_value(loss, reg, x, &z)?);
        sigma_trace.push(sigma2);
        return Ok(SolveReport {
            z: CoefficientMatrix::new(z)?,
            iterations: 1,
            objective_trace: trace,
            sigma2_trace: sigma_trace,
            converged: true,
            final_sigma2: sigma2,
        });
    }

    let mut z = z0;
    let mut converged = false;
    let mut iterations = 0;
    for t in 1..=opts.max_iter {
        iterations = t;
        let e = residual(&z);
        let frozen = opts.freeze_sigma_after.is_some_and(|k| t > k);
        if auto_sigma && t > 1 && !frozen {
            sigma2 = update_sigma2(loss.kind, &e);
        }
        let current = loss.with_sigma2(sigma2);
        let mut state = update_weights(&current, &e)?;
        update_reg_weights(reg, &z, &mut state)?;
        let next = z_step(&sys, x, loss.kind, reg, &state, &z, opts)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver(format!("non-finite coefficients at iteration {t}")));
        }
        trace.push(objective_value(&current, reg, x, &next)?);
        sigma_trace.push(sigma2);
        let change = (&next - &z).norm() / z.norm().max(1.0);
        z = next;
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    Ok(SolveReport {
        z: CoefficientMatrix::new(z)?,
        iterations,
        objective_trace: trace,
        sigma2_trace: sigma_trace,
        converged,
        final_sigma2: sigma2,
    })
}

fn z_step(
    sys: &RidgeSystem<'_>,
    x: &DMatrix<f64>,
    kind: LossKind,
    reg: &RegSpec,
    state: &WeightState,
    z: &DMatrix<f64>,
    opts: &SolveOptions,
) -> Result<DMatrix<f64>> {
    let (d, n) = x.shape();
    let scale = if kind == LossKind::Frobenius { 2.0 } else { 1.0 };
    let s = state.dense_loss_weights(d, n) * scale;
    let lambda = reg.lambda;
    let missing = || Error::Solver("regularizer weights were not computed".into());

    match reg.kind {
        RegKind::FrobeniusSq => match &state.row_weights {
            Some(w) if !opts.zero_diagonal => sys.ridge_rows(w.as_slice(), 2.0 * lambda),
            _ => sys.ridge_columns(&s, 2.0 * lambda, opts.zero_diagonal),
        },
        RegKind::L1Approx => {
            let r = state.reg_entry_weights.as_ref().ok_or_else(missing)?;
            sys.diag_reg_columns(&s, r, lambda, opts.zero_diagonal)
        }
        RegKind::NuclearApprox => {
            let w = state.reg_coupling.as_ref().ok_or_else(missing)?;
            let col_weights = match (&state.col_weights, &state.entry_weights) {
                (Some(c), _) => Some(c * scale),
                (None, Some(sw)) if kind == LossKind::Frobenius => Some(DVector::from_element(n, sw[(0, 0)] * scale)),
                _ => None,
            };
            match col_weights {
                Some(c) if !opts.zero_diagonal => sylvester_step(sys.gram(), &c, w, lambda),
                _ => {
                    let problem = CoupledProblem {
                        x,
                        loss_weights: &s,
                        reg_entry_weights: None,
                        coupling: Some(w),
                        entry_scale: 0.0,
                        coupling_scale: lambda,
                        zero_diagonal: opts.zero_diagonal,
                    };
                    Ok(problem.solve(Some(z), opts.cg_tol)?.z.into_inner())
                }
            }
        }
        RegKind::CompositeL1Nuclear => {
            let r = state.reg_entry_weights.as_ref().ok_or_else(missing)?;
            let w = state.reg_coupling.as_ref().ok_or_else(missing)?;
            let problem = CoupledProblem {
                x,
                loss_weights: &s,
                reg_entry_weights: Some(r),
                coupling: Some(w),
                entry_scale: lambda,
                coupling_scale: lambda * reg.gamma,
                zero_diagonal: opts.zero_diagonal,
            };
            Ok(problem.solve(Some(z), opts.cg_tol)?.z.into_inner())
        }
    }
}

/// `G Z C + λ Z W = G C` with `C = Diag(c)`, reduced to a symmetric
/// Sylvester equation by `Z = Y C^(−½)`.
fn sylvester_step(gram: &DMatrix<f64>, c: &DVector<f64>, w: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let n = gram.nrows();
    let root = c.map(f64::sqrt);
    let w_scaled = DMatrix::from_fn(n, n, |p, q| w[(p, q)] / (root[p] * root[q]));
    let b = DMatrix::from_fn(n, n, |p, q| gram[(p, q)] * root[q]);
    let y = nuclear_coupled_solve(gram, &w_scaled, &b, lambda)?.into_inner();
    Ok(DMatrix::from_fn(n, n, |p, q| y[(p, q)] / root[q]))
}
