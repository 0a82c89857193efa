//! Numerical checks of the six conditions a potential needs for the
//! half-quadratic dual to exist:
//!
//! (a) `φ` convex, (b) `t ↦ φ(√t)` concave on `t ≥ 0`, (c) `φ` even,
//! (d) `φ` continuously differentiable, (e) `φ''(0⁺) > 0`,
//! (f) `φ(x)/x² → 0` as `x → ∞`.
//!
//! Every check runs on a caller-supplied grid, so a pass is evidence over
//! that grid only.

use super::Potential;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionCheck {
    pub passed: bool,
    /// Largest violation found (positive means violated), in the check's
    /// own units.
    pub worst: f64,
}

impl ConditionCheck {
    fn from_worst(worst: f64) -> Self {
        ConditionCheck {
            passed: worst <= 0.0,
            worst,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub convex: ConditionCheck,
    pub sqrt_concave: ConditionCheck,
    pub even: ConditionCheck,
    pub c1: ConditionCheck,
    pub curvature_at_zero: ConditionCheck,
    pub subquadratic_tail: ConditionCheck,
}

impl ConditionReport {
    pub fn checks(&self) -> [(&'static str, ConditionCheck); 6] {
        [
            ("a:convex", self.convex),
            ("b:sqrt-concave", self.sqrt_concave),
            ("c:even", self.even),
            ("d:C1", self.c1),
            ("e:curvature-at-0", self.curvature_at_zero),
            ("f:subquadratic-tail", self.subquadratic_tail),
        ]
    }

    pub fn all_pass(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.passed)
    }
}

pub fn verify_phi_conditions(p: &Potential, grid: &[f64]) -> Result<ConditionReport> {
    let mut g: Vec<f64> = grid.to_vec();
    if g.len() < 5 || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("condition grid needs at least 5 finite points"));
    }
    g.sort_by(f64::total_cmp);
    g.dedup();
    if !g.contains(&0.0) {
        return Err(Error::param("condition grid must contain 0"));
    }
    let symmetric = g
        .iter()
        .all(|&x| g.iter().any(|&y| (x + y).abs() <= 1e-12 * x.abs().max(1.0)));
    if !symmetric {
        return Err(Error::param("condition grid must be symmetric about 0"));
    }
    let positive: Vec<f64> = g.iter().copied().filter(|&x| x > 0.0).collect();
    if positive.len() < 4 {
        return Err(Error::param("condition grid needs at least 4 positive points"));
    }
    let phi: Vec<f64> = g.iter().map(|&x| p.value(x)).collect();

    // (a) midpoint convexity over all grid pairs
    let mut worst_a = f64::NEG_INFINITY;
    for i in 0..g.len() {
        for j in i + 1..g.len() {
            let mid = p.value(0.5 * (g[i] + g[j]));
            let chord = 0.5 * (phi[i] + phi[j]);
            let tol = 1e-12 * (1.0 + phi[i].abs() + phi[j].abs());
            worst_a = worst_a.max(mid - chord - tol);
        }
    }

    // (b) midpoint concavity of t -> φ(√t) on t = x², x > 0 grid points
    let mut worst_b = f64::NEG_INFINITY;
    for (i, &xi) in positive.iter().enumerate() {
        for &xj in &positive[i + 1..] {
            let (fi, fj) = (p.value(xi), p.value(xj));
            let mid = p.value((0.5 * (xi * xi + xj * xj)).sqrt());
            let tol = 1e-12 * (1.0 + fi.abs() + fj.abs());
            worst_b = worst_b.max(0.5 * (fi + fj) - mid - tol);
        }
    }

    // (c) evenness
    let worst_c = g
        .iter()
        .map(|&x| (p.value(x) - p.value(-x)).abs() - 1e-14 * (1.0 + p.value(x).abs()))
        .fold(f64::NEG_INFINITY, f64::max);

    // (d) left and right difference quotients agree at every grid point
    let h_scale = positive[0];
    let step = |x: f64| 1e-6 * x.abs().max(h_scale);
    let worst_d = g
        .iter()
        .map(|&x| {
            let h = step(x);
            let f0 = p.value(x);
            let right = (p.value(x + h) - f0) / h;
            let left = (f0 - p.value(x - h)) / h;
            (right - left).abs() - 1e-3 * (1.0 + right.abs() + left.abs())
        })
        .fold(f64::NEG_INFINITY, f64::max);

    // (e) second difference at the origin
    let h0 = step(0.0);
    let curvature = (p.value(h0) - 2.0 * p.value(0.0) + p.value(-h0)) / (h0 * h0);
    let worst_e = if curvature.is_finite() && curvature > 0.0 {
        -curvature
    } else {
        1.0
    };

    // (f) φ(x)/x² decreasing across the top quarter of the grid, and at
    // least halved from the start of that tail to its end
    let tail_len = (positive.len() / 4).max(3).min(positive.len());
    let tail = &positive[positive.len() - tail_len..];
    let ratio: Vec<f64> = tail.iter().map(|&x| p.value(x) / (x * x)).collect();
    let mut worst_f = ratio
        .windows(2)
        .map(|w| w[1] - w[0] * (1.0 + 1e-12))
        .fold(f64::NEG_INFINITY, f64::max);
    worst_f = worst_f.max(ratio[ratio.len() - 1] - 0.5 * ratio[0]);

    Ok(ConditionReport {
        convex: ConditionCheck::from_worst(worst_a),
        sqrt_concave: ConditionCheck::from_worst(worst_b),
        even: ConditionCheck::from_worst(worst_c),
        c1: ConditionCheck::from_worst(worst_d),
        curvature_at_zero: ConditionCheck::from_worst(worst_e),
        subquadratic_tail: ConditionCheck::from_worst(worst_f),
    })
}

/// Symmetric grid `{0, ±10^a, …, ±10^b}` with `per_decade` points per decade.
pub fn symmetric_log_grid(lo_exp: f64, hi_exp: f64, per_decade: usize) -> Vec<f64> {
    let steps = ((hi_exp - lo_exp) * per_decade as f64).round() as usize;
    let mut g = vec![0.0];
    for i in 0..=steps {
        let x = 10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / steps as f64);
        g.push(x);
        g.push(-x);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        symmetric_log_grid(-3.0, 3.0, 8)
    }

    #[test]
    fn smoothed_l1_passes_all() {
        let r = verify_phi_conditions(&Potential::SmoothAbs { epsilon: 1e-4 }, &grid()).unwrap();
        assert!(r.all_pass(), "{r:?}");
    }

    #[test]
    fn smoothed_norm_passes_all() {
        let r = verify_phi_conditions(&Potential::SmoothNorm { epsilon: 1e-8 }, &grid()).unwrap();
        assert!(r.all_pass(), "{r:?}");
    }

    #[test]
    fn quadratic_fails_only_the_tail() {
        let r = verify_phi_conditions(&Potential::Quadratic, &grid()).unwrap();
        assert!(!r.subquadratic_tail.passed);
        assert!(r.convex.passed && r.sqrt_concave.passed && r.even.passed);
        assert!(r.c1.passed && r.curvature_at_zero.passed);
    }

    #[test]
    fn correntropy_is_convex_only_inside_the_kernel() {
        let p = Potential::Correntropy { sigma2: 1.0 };
        let r = verify_phi_conditions(&p, &grid()).unwrap();
        assert!(!r.convex.passed);
        assert!(r.sqrt_concave.passed && r.even.passed && r.c1.passed);
        assert!(r.curvature_at_zero.passed && r.subquadratic_tail.passed);

        let inner: Vec<f64> = (-10..=10).map(|i| i as f64 / 10.0).collect();
        let r = verify_phi_conditions(&p, &inner).unwrap();
        assert!(r.convex.passed);
    }

    #[test]
    fn absolute_value_fails_c1() {
        // σ-free kink: the unsmoothed |x| is the limit ε → 0
        let r = verify_phi_conditions(&Potential::SmoothAbs { epsilon: 1e-300 }, &grid()).unwrap();
        assert!(!r.c1.passed);
    }

    #[test]
    fn degenerate_grids_rejected() {
        let p = Potential::Quadratic;
        assert!(verify_phi_conditions(&p, &[0.0, 1.0]).is_err());
        assert!(verify_phi_conditions(&p, &[1.0, 2.0, 3.0, -1.0, -2.0, -3.0]).is_err());
        assert!(verify_phi_conditions(&p, &[0.0, 1.0, 2.0, 3.0, 4.0, -1.0]).is_err());
    }
}
