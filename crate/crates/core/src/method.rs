//! The named instantiations of the general model.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hq::{hq_solve, LossSpec, RegSpec, SigmaMode, SolveOptions, SolveReport};
use crate::matio::DataMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Cil2,
    Rcil2,
    Lsr,
    SscIrls,
    LrrIrls,
    MsrIrls,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Cil2,
        Method::Rcil2,
        Method::Lsr,
        Method::SscIrls,
        Method::LrrIrls,
        Method::MsrIrls,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cil2 => "cil2",
            Method::Rcil2 => "rcil2",
            Method::Lsr => "lsr",
            Method::SscIrls => "ssc_irls",
            Method::LrrIrls => "lrr_irls",
            Method::MsrIrls => "msr_irls",
        }
    }

    pub fn valid_names() -> String {
        Method::ALL.map(Method::name).join(", ")
    }

    /// Only SSC excludes self-representation by default.
    pub fn default_zero_diagonal(self) -> bool {
        self == Method::SscIrls
    }

    pub fn specs(self, params: &MethodParams) -> (LossSpec, RegSpec) {
        let eps = params.epsilon;
        let lambda = params.lambda;
        match self {
            Method::Cil2 => (
                LossSpec::correntropy_elem(params.sigma2, params.sigma_mode),
                RegSpec::frobenius_sq(lambda),
            ),
            Method::Rcil2 => (
                LossSpec::correntropy_row(params.sigma2, params.sigma_mode),
                RegSpec::frobenius_sq(lambda),
            ),
            Method::Lsr => (LossSpec::frobenius(), RegSpec::frobenius_sq(lambda)),
            Method::SscIrls => (LossSpec::frobenius(), RegSpec::l1_approx(lambda, eps)),
            Method::LrrIrls => (LossSpec::l21_col_approx(eps), RegSpec::nuclear_approx(lambda, eps)),
            Method::MsrIrls => (
                LossSpec::l21_col_approx(eps),
                RegSpec::composite(lambda, params.gamma, eps),
            ),
        }
    }

    pub fn solve(self, x: &DataMatrix, params: &MethodParams, opts: &SolveOptions) -> Result<SolveReport> {
        let (loss, reg) = self.specs(params);
        hq_solve(x, &loss, &reg, opts)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::param(format!("unknown method '{s}' (valid: {})", Method::valid_names())))
    }
}

/// Model parameters shared by every method; unused ones are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodParams {
    pub lambda: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub sigma_mode: SigmaMode,
    /// Kernel size for `SigmaMode::Fixed`; only a seed value under `Auto`.
    pub sigma2: f64,
}

impl MethodParams {
    /// Defaults with `epsilon` scaled to the data.
    pub fn for_data(x: &DMatrix<f64>, lambda: f64) -> Self {
        MethodParams {
            lambda,
            gamma: 1.0,
            epsilon: default_epsilon(x),
            sigma_mode: SigmaMode::Auto,
            sigma2: 1.0,
        }
    }
}

/// `1e-4 · median |X_ij|`, falling back to `1e-4 · max |X_ij|` when more
/// than half the entries are zero.
pub fn default_epsilon(x: &DMatrix<f64>) -> f64 {
    let mut abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let m = abs.len();
    let median = if m % 2 == 1 {
        abs[m / 2]
    } else {
        0.5 * (abs[m / 2 - 1] + abs[m / 2])
    };
    let base = if median > 0.0 { median } else { abs[m - 1] };
    if base > 0.0 {
        1e-4 * base
    } else {
        1e-4
    }
}
