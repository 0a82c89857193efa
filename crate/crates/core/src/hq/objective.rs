use nalgebra::{DMatrix, SymmetricEigen};

use super::{LossKind, LossSpec, Potential, RegKind, RegSpec};
use crate::error::{Error, Result};

// Neumaier summation; descent is checked at 1e-10 absolute on sums of
// hundreds of terms.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub fn loss_value(loss: &LossSpec, e: &DMatrix<f64>) -> f64 {
    let p = loss.potential();
    match loss.kind {
        LossKind::Frobenius | LossKind::L1Approx | LossKind::CorrentropyElem => {
            compensated_sum(e.iter().map(|&v| p.value(v)))
        }
        LossKind::L21ColApprox => compensated_sum(e.column_iter().map(|c| p.value(c.norm()))),
        LossKind::CorrentropyRow => compensated_sum(e.row_iter().map(|r| p.value(r.norm()))),
    }
}

/// `R(Z)` without the `λ` factor.
pub fn reg_value(reg: &RegSpec, z: &DMatrix<f64>) -> f64 {
    let l1 = || {
        let p = Potential::SmoothAbs { epsilon: reg.epsilon };
        compensated_sum(z.iter().map(|&v| p.value(v)))
    };
    match reg.kind {
        RegKind::FrobeniusSq => compensated_sum(z.iter().map(|v| v * v)),
        RegKind::L1Approx => l1(),
        RegKind::NuclearApprox => smoothed_nuclear(z, reg.epsilon),
        RegKind::CompositeL1Nuclear => l1() + reg.gamma * smoothed_nuclear(z, reg.epsilon),
    }
}

/// `Tr(ZᵀZ + εI)^½ = Σ_k √(s_k² + ε)` over all n singular values.
fn smoothed_nuclear(z: &DMatrix<f64>, epsilon: f64) -> f64 {
    let eig = SymmetricEigen::new(z.tr_mul(z));
    compensated_sum(eig.eigenvalues.iter().map(|&mu| (mu.max(0.0) + epsilon).sqrt()))
}

/// `J(Z) = L(X − XZ) + λ R(Z)` with the smoothed surrogates.
pub fn objective_value(loss: &LossSpec, reg: &RegSpec, x: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<f64> {
    let n = x.ncols();
    if z.shape() != (n, n) {
        return Err(Error::shape(format!(
            "Z is {}x{} but X has {n} columns",
            z.nrows(),
            z.ncols()
        )));
    }
    let e = x - x * z;
    let value = loss_value(loss, &e) + reg.lambda * reg_value(reg, z);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Solver("objective is not finite".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hq::SigmaMode;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut s = seed;
        DMatrix::from_fn(rows, cols, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn zero_z_gives_loss_of_x() {
        let x = random(3, 4, 1);
        let loss = LossSpec::correntropy_elem(0.7, SigmaMode::Fixed);
        let reg = RegSpec::frobenius_sq(0.3);
        let j = objective_value(&loss, &reg, &x, &DMatrix::zeros(4, 4)).unwrap();
        let expected: f64 = x.iter().map(|v| 1.0 - (-v * v / 1.4).exp()).sum();
        assert!((j - expected).abs() < 1e-12);
    }

    #[test]
    fn orthonormal_identity() {
        let x = DMatrix::<f64>::identity(4, 3);
        let reg = RegSpec::frobenius_sq(1.0);
        let j = objective_value(&LossSpec::frobenius(), &reg, &x, &DMatrix::identity(3, 3)).unwrap();
        assert!((j - 3.0).abs() < 1e-15);
    }

    #[test]
    fn matches_naive_double_loop() {
        let x = random(3, 4, 7);
        let z = random(4, 4, 9);
        let cases = [
            (LossSpec::frobenius(), RegSpec::frobenius_sq(0.5)),
            (LossSpec::l1_approx(1e-3), RegSpec::l1_approx(0.2, 1e-3)),
            (LossSpec::correntropy_row(0.4, SigmaMode::Fixed), RegSpec::frobenius_sq(0.1)),
            (LossSpec::l21_col_approx(1e-4), RegSpec::nuclear_approx(0.3, 1e-4)),
        ];
        for (loss, reg) in cases {
            let j = objective_value(&loss, &reg, &x, &z).unwrap();
            let mut e = vec![vec![0.0; 4]; 3];
            for i in 0..3 {
                for k in 0..4 {
                    let mut acc = x[(i, k)];
                    for m in 0..4 {
                        acc -= x[(i, m)] * z[(m, k)];
                    }
                    e[i][k] = acc;
                }
            }
            let l = match loss.kind {
                LossKind::Frobenius => e.iter().flatten().map(|v| v * v).sum::<f64>(),
                LossKind::L1Approx => e.iter().flatten().map(|v| (v * v + 1e-6).sqrt()).sum(),
                LossKind::CorrentropyRow => e
                    .iter()
                    .map(|row| 1.0 - (-row.iter().map(|v| v * v).sum::<f64>() / 0.8).exp())
                    .sum(),
                LossKind::L21ColApprox => (0..4)
                    .map(|k| ((0..3).map(|i| e[i][k] * e[i][k]).sum::<f64>() + 1e-4).sqrt())
                    .sum(),
                LossKind::CorrentropyElem => unreachable!(),
            };
            let r = match reg.kind {
                RegKind::FrobeniusSq => z.iter().map(|v| v * v).sum::<f64>(),
                RegKind::L1Approx => z.iter().map(|v| (v * v + 1e-6).sqrt()).sum(),
                RegKind::NuclearApprox => {
                    let sv = z.clone().svd(false, false).singular_values;
                    sv.iter().map(|s| (s * s + 1e-4).sqrt()).sum()
                }
                RegKind::CompositeL1Nuclear => unreachable!(),
            };
            let expected = l + reg.lambda * r;
            assert!((j - expected).abs() < 1e-12, "{:?}/{:?}: {j} vs {expected}", loss.kind, reg.kind);
        }
    }

    #[test]
    fn shape_mismatch() {
        let x = DMatrix::<f64>::zeros(3, 4);
        let z = DMatrix::<f64>::zeros(3, 3);
        assert!(objective_value(&LossSpec::frobenius(), &RegSpec::frobenius_sq(1.0), &x, &z).is_err());
    }
}
