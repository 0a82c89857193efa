//! Half-quadratic minimization of `J(Z) = L(X − XZ) + λ R(Z)`.
//!
//! Each outer iteration computes the residual `E = X − XZ`, refreshes the
//! correntropy kernel size (when automatic), turns every non-quadratic term
//! into a weighted quadratic via its minimizer function, and solves the
//! resulting quadratic Z-subproblem exactly with one of the [`crate::solvers`]
//! backends. The augmented objective never has to be evaluated: only `δ` is
//! needed for the updates, and descent is tracked on the original `J`.

mod conditions;
mod objective;
mod potential;
mod solve;
mod weights;

pub use conditions::{symmetric_log_grid, verify_phi_conditions, ConditionCheck, ConditionReport};
pub use objective::{loss_value, objective_value, reg_value};
pub use potential::{minimizer_delta, phi_value, Potential};
pub use solve::hq_solve;
pub use weights::{update_reg_weights, update_sigma2, update_weights, WeightState};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::solvers::CoefficientMatrix;

/// Lower bound on the correntropy kernel size `σ²`. Exact reconstructions
/// would otherwise drive `σ² → 0` and the weights `1/σ²` to infinity.
pub const SIGMA2_FLOOR: f64 = 1e-12;

/// Smallest weight ever handed to a solver; keeps every weight strictly
/// positive when `exp(−e²/2σ²)` underflows.
pub const WEIGHT_FLOOR: f64 = f64::MIN_POSITIVE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `‖E‖²_F`
    Frobenius,
    /// `Σ √(E_ij² + ε²)`
    L1Approx,
    /// `Σ_j (‖E_j‖² + ε)^½` over columns
    L21ColApprox,
    /// `Σ 1 − exp(−E_ij²/2σ²)` (CIL2)
    CorrentropyElem,
    /// `Σ_i 1 − exp(−‖Eⁱ‖²/2σ²)` over rows (rCIL2)
    CorrentropyRow,
}

impl LossKind {
    pub fn is_correntropy(self) -> bool {
        matches!(self, LossKind::CorrentropyElem | LossKind::CorrentropyRow)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaMode {
    /// `σ²` recomputed from the residual every iteration.
    Auto,
    /// `σ²` held at the value in [`LossSpec::sigma2`].
    Fixed,
}

impl FromStr for SigmaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(SigmaMode::Auto),
            "fixed" => Ok(SigmaMode::Fixed),
            other => Err(Error::param(format!("unknown sigma mode '{other}' (expected auto or fixed)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Smoothing for the L1 / L21 surrogates.
    pub epsilon: f64,
    /// Kernel size `σ²` for the correntropy kinds. Under [`SigmaMode::Auto`]
    /// this is only the starting value and is overwritten by the solve loop.
    pub sigma2: f64,
    pub sigma_mode: SigmaMode,
}

impl LossSpec {
    pub fn frobenius() -> Self {
        LossSpec {
            kind: LossKind::Frobenius,
            epsilon: 1.0,
            sigma2: 1.0,
            sigma_mode: SigmaMode::Fixed,
        }
    }

    pub fn l1_approx(epsilon: f64) -> Self {
        LossSpec {
            kind: LossKind::L1Approx,
            epsilon,
            ..Self::frobenius()
        }
    }

    pub fn l21_col_approx(epsilon: f64) -> Self {
        LossSpec {
            kind: LossKind::L21ColApprox,
            epsilon,
            ..Self::frobenius()
        }
    }

    pub fn correntropy_elem(sigma2: f64, sigma_mode: SigmaMode) -> Self {
        LossSpec {
            kind: LossKind::CorrentropyElem,
            epsilon: 1.0,
            sigma2,
            sigma_mode,
        }
    }

    pub fn correntropy_row(sigma2: f64, sigma_mode: SigmaMode) -> Self {
        LossSpec {
            kind: LossKind::CorrentropyRow,
            ..Self::correntropy_elem(sigma2, sigma_mode)
        }
    }

    pub fn with_sigma2(mut self, sigma2: f64) -> Self {
        self.sigma2 = sigma2.max(SIGMA2_FLOOR);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if matches!(self.kind, LossKind::L1Approx | LossKind::L21ColApprox)
            && !(self.epsilon > 0.0 && self.epsilon.is_finite())
        {
            return Err(Error::param(format!("loss epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::param(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegKind {
    /// `‖Z‖²_F`
    FrobeniusSq,
    /// `Σ √(Z_ij² + ε²)`
    L1Approx,
    /// `Tr(ZᵀZ + εI)^½`
    NuclearApprox,
    /// `L1Approx + γ·NuclearApprox`
    CompositeL1Nuclear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegSpec {
    pub kind: RegKind,
    pub lambda: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl RegSpec {
    pub fn frobenius_sq(lambda: f64) -> Self {
        RegSpec {
            kind: RegKind::FrobeniusSq,
            lambda,
            gamma: 1.0,
            epsilon: 1.0,
        }
    }

    pub fn l1_approx(lambda: f64, epsilon: f64) -> Self {
        RegSpec {
            kind: RegKind::L1Approx,
            epsilon,
            ..Self::frobenius_sq(lambda)
        }
    }

    pub fn nuclear_approx(lambda: f64, epsilon: f64) -> Self {
        RegSpec {
            kind: RegKind::NuclearApprox,
            epsilon,
            ..Self::frobenius_sq(lambda)
        }
    }

    pub fn composite(lambda: f64, gamma: f64, epsilon: f64) -> Self {
        RegSpec {
            kind: RegKind::CompositeL1Nuclear,
            lambda,
            gamma,
            epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::param(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.kind == RegKind::CompositeL1Nuclear && !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::param(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.kind != RegKind::FrobeniusSq && !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param(format!(
                "regularizer epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Zero,
    /// Start from the least-squares-regression closed form.
    Lsr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Stop when `‖Z_t − Z_{t−1}‖_F / max(1, ‖Z_{t−1}‖_F) < tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub init: Init,
    pub zero_diagonal: bool,
    pub seed: u64,
    /// Hold `σ²` fixed once this many iterations have run (auto mode only).
    pub freeze_sigma_after: Option<usize>,
    /// Relative residual target for the conjugate-gradient backend.
    pub cg_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-6,
            max_iter: 100,
            init: Init::Lsr,
            zero_diagonal: false,
            seed: 0,
            freeze_sigma_after: None,
            cg_tol: 1e-10,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::param(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter must be at least 1"));
        }
        if !(self.cg_tol > 0.0) {
            return Err(Error::param("cg_tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub z: CoefficientMatrix,
    pub iterations: usize,
    /// `J(Z_t)` evaluated with the kernel size used in iteration `t`; entry 0
    /// is the initial point under the first iteration's kernel size.
    pub objective_trace: Vec<f64>,
    /// Kernel size paired with each objective entry. Entries with equal
    /// `σ²` are directly comparable and must be nonincreasing.
    pub sigma2_trace: Vec<f64>,
    pub converged: bool,
    pub final_sigma2: f64,
}

impl SolveReport {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }

    /// Largest increase between consecutive trace entries that share a kernel
    /// size. Zero or negative means monotone descent.
    pub fn max_comparable_increase(&self) -> f64 {
        self.objective_trace
            .windows(2)
            .zip(self.sigma2_trace.windows(2))
            .filter(|(_, s)| s[0] == s[1])
            .map(|(j, _)| j[1] - j[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Frobenius => "frobenius",
            LossKind::L1Approx => "l1_approx",
            LossKind::L21ColApprox => "l21_col_approx",
            LossKind::CorrentropyElem => "correntropy_elem",
            LossKind::CorrentropyRow => "correntropy_row",
        })
    }
}
