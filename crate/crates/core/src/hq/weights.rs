use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{LossKind, LossSpec, Potential, RegKind, RegSpec, SIGMA2_FLOOR, WEIGHT_FLOOR};
use crate::error::{Error, Result};

/// The half-quadratic auxiliary variables for one outer iteration.
///
/// Exactly one of the loss-weight fields is set, depending on the loss kind.
/// The regularizer fields are filled by [`update_reg_weights`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightState {
    /// Per-entry weights `S` (d × n).
    pub entry_weights: Option<DMatrix<f64>>,
    /// Per-row weights `w` (length d).
    pub row_weights: Option<DVector<f64>>,
    /// Per-column weights `c` (length n).
    pub col_weights: Option<DVector<f64>>,
    /// Per-entry weights for the smoothed-L1 regularizer (n × n).
    pub reg_entry_weights: Option<DMatrix<f64>>,
    /// Symmetric coupling `(ZᵀZ + εI)^(−½)` for the smoothed nuclear norm.
    pub reg_coupling: Option<DMatrix<f64>>,
    pub sigma2: f64,
}

impl WeightState {
    fn loss_only(sigma2: f64) -> Self {
        WeightState {
            entry_weights: None,
            row_weights: None,
            col_weights: None,
            reg_entry_weights: None,
            reg_coupling: None,
            sigma2,
        }
    }

    /// Expands whichever loss weights are present into a dense `d × n` matrix.
    pub fn dense_loss_weights(&self, d: usize, n: usize) -> DMatrix<f64> {
        if let Some(s) = &self.entry_weights {
            s.clone()
        } else if let Some(w) = &self.row_weights {
            DMatrix::from_fn(d, n, |r, _| w[r])
        } else if let Some(c) = &self.col_weights {
            DMatrix::from_fn(d, n, |_, j| c[j])
        } else {
            DMatrix::from_element(d, n, 1.0)
        }
    }
}

fn floor_weight(v: f64) -> f64 {
    v.max(WEIGHT_FLOOR)
}

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Solver(format!("non-finite entries in {what}")))
    }
}

/// Loss weights `δ(·)` evaluated at the current residual.
pub fn update_weights(loss: &LossSpec, e: &DMatrix<f64>) -> Result<WeightState> {
    check_finite(e, "residual")?;
    loss.validate()?;
    let mut state = WeightState::loss_only(loss.sigma2);
    let p = loss.potential();
    match loss.kind {
        LossKind::Frobenius => {
            state.entry_weights = Some(DMatrix::from_element(e.nrows(), e.ncols(), 1.0));
        }
        LossKind::L1Approx | LossKind::CorrentropyElem => {
            state.entry_weights = Some(e.map(|v| floor_weight(p.delta(v))));
        }
        LossKind::L21ColApprox => {
            let c = DVector::from_iterator(e.ncols(), e.column_iter().map(|col| floor_weight(p.delta(col.norm()))));
            state.col_weights = Some(c);
        }
        LossKind::CorrentropyRow => {
            let w = DVector::from_iterator(e.nrows(), e.row_iter().map(|row| floor_weight(p.delta(row.norm()))));
            state.row_weights = Some(w);
        }
    }
    Ok(state)
}

/// Kernel size from the mean reconstruction error:
/// `‖E‖²_F / 2dn` for the entrywise loss, `‖E‖²_F / 2d` for the row loss.
/// Other kinds return the floor, which they never read.
pub fn update_sigma2(kind: LossKind, e: &DMatrix<f64>) -> f64 {
    let (d, n) = e.shape();
    let sq = e.norm_squared();
    let raw = match kind {
        LossKind::CorrentropyElem => sq / (2.0 * d as f64 * n as f64),
        LossKind::CorrentropyRow => sq / (2.0 * d as f64),
        _ => SIGMA2_FLOOR,
    };
    raw.max(SIGMA2_FLOOR)
}

/// Regularizer weights at the current `Z`: `δ(Z_ij)` for the L1 part and
/// the coupling `(ZᵀZ + εI)^(−½)` for the nuclear part.
pub fn update_reg_weights(reg: &RegSpec, z: &DMatrix<f64>, state: &mut WeightState) -> Result<()> {
    check_finite(z, "coefficients")?;
    let l1 = Potential::SmoothAbs { epsilon: reg.epsilon };
    match reg.kind {
        RegKind::FrobeniusSq => {}
        RegKind::L1Approx => {
            state.reg_entry_weights = Some(z.map(|v| floor_weight(l1.delta(v))));
        }
        RegKind::NuclearApprox => {
            state.reg_coupling = Some(nuclear_coupling(z, reg.epsilon));
        }
        RegKind::CompositeL1Nuclear => {
            state.reg_entry_weights = Some(z.map(|v| floor_weight(l1.delta(v))));
            state.reg_coupling = Some(nuclear_coupling(z, reg.epsilon));
        }
    }
    Ok(())
}

pub(crate) fn nuclear_coupling(z: &DMatrix<f64>, epsilon: f64) -> DMatrix<f64> {
    let gram = z.tr_mul(z);
    let eig = SymmetricEigen::new(gram);
    let inv_sqrt = eig.eigenvalues.map(|mu| 1.0 / (mu.max(0.0) + epsilon).sqrt());
    let v = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |r, c| v[(r, c)] * inv_sqrt[c]);
    let w = scaled * v.transpose();
    (&w + w.transpose()) * 0.5
}
