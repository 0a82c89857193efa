//! Scalar potentials `φ` and their minimizer functions `δ(t) = φ'(t)/t`.

use super::{LossKind, LossSpec};

/// A scalar potential in the half-quadratic catalog.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    /// `φ(t) = t²`. Already quadratic, so it gains nothing from reweighting.
    Quadratic,
    /// `φ(t) = √(t² + ε²)`, the smoothed absolute value.
    SmoothAbs { epsilon: f64 },
    /// `φ(t) = (t² + ε)^½`, the smoothing used for column (L21) and
    /// nuclear norms, where `t` is a norm or a singular value.
    SmoothNorm { epsilon: f64 },
    /// `φ(t) = 1 − exp(−t²/2σ²)`, the correntropy-induced loss.
    Correntropy { sigma2: f64 },
}

impl Potential {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Potential::Quadratic => t * t,
            Potential::SmoothAbs { epsilon } => t.hypot(epsilon),
            Potential::SmoothNorm { epsilon } => (t * t + epsilon).sqrt(),
            // expm1 keeps full precision for tiny arguments
            Potential::Correntropy { sigma2 } => -(-t * t / (2.0 * sigma2)).exp_m1(),
        }
    }

    /// `δ(t) = φ'(t)/t`, which equals `φ''(0⁺)` at zero for every potential
    /// here; the closed forms below are continuous through `t = 0`.
    pub fn delta(&self, t: f64) -> f64 {
        match *self {
            Potential::Quadratic => 2.0,
            Potential::SmoothAbs { epsilon } => 1.0 / t.hypot(epsilon),
            Potential::SmoothNorm { epsilon } => 1.0 / (t * t + epsilon).sqrt(),
            Potential::Correntropy { sigma2 } => (-t * t / (2.0 * sigma2)).exp() / sigma2,
        }
    }

    /// Analytic derivative, used by the tests and the stationarity checks.
    pub fn derivative(&self, t: f64) -> f64 {
        self.delta(t) * t
    }
}

impl LossSpec {
    pub fn potential(&self) -> Potential {
        match self.kind {
            LossKind::Frobenius => Potential::Quadratic,
            LossKind::L1Approx => Potential::SmoothAbs { epsilon: self.epsilon },
            LossKind::L21ColApprox => Potential::SmoothNorm { epsilon: self.epsilon },
            LossKind::CorrentropyElem | LossKind::CorrentropyRow => Potential::Correntropy { sigma2: self.sigma2 },
        }
    }
}

pub fn phi_value(loss: &LossSpec, t: f64) -> f64 {
    loss.potential().value(t)
}

pub fn minimizer_delta(loss: &LossSpec, t: f64) -> f64 {
    loss.potential().delta(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hq::SigmaMode;

    fn corr(sigma2: f64) -> LossSpec {
        LossSpec::correntropy_elem(sigma2, SigmaMode::Fixed)
    }

    // Centered difference with a step scaled to |t|. Correntropy saturates
    // at 1, so its difference is taken on the kernel exp(-x²/2σ²) instead:
    // φ(a) - φ(b) = k(b) - k(a) = -k(b)·expm1(-(a² - b²)/2σ²).
    fn fd_derivative(p: &Potential, t: f64) -> f64 {
        let h = 1e-6 * t.abs().max(1e-3);
        let (a, b) = (t + h, t - h);
        let diff = match *p {
            Potential::Correntropy { sigma2 } => {
                -(-b * b / (2.0 * sigma2)).exp() * (-(a * a - b * b) / (2.0 * sigma2)).exp_m1()
            }
            _ => p.value(a) - p.value(b),
        };
        diff / (2.0 * h)
    }

    #[test]
    fn correntropy_values() {
        assert_eq!(phi_value(&corr(1.0), 0.0), 0.0);
        assert!((phi_value(&corr(1.0), 40.0) - 1.0).abs() < 1e-15);
        assert_eq!(minimizer_delta(&corr(1.0), 0.0), 1.0);
        let t = (2.0 * 2f64.ln()).sqrt();
        assert!((minimizer_delta(&corr(1.0), t) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn correntropy_curvature_at_zero_matches_second_difference() {
        let p = Potential::Correntropy { sigma2: 1.0 };
        let h = 1e-4;
        let second = (p.value(h) - 2.0 * p.value(0.0) + p.value(-h)) / (h * h);
        assert!((second - p.delta(0.0)).abs() < 1e-7);
    }

    #[test]
    fn smooth_abs_values() {
        let loss = LossSpec::l1_approx(1e-4);
        // sqrt(9 + 1e-8) = 3 + 1e-8/6 - ..., evaluated by hand in extended precision
        let expected = 3.000_000_001_666_667;
        assert!((phi_value(&loss, 3.0) - expected).abs() < 1e-15);
        assert!((minimizer_delta(&loss, 3.0) - 1.0 / expected).abs() < 1e-15);
    }

    #[test]
    fn delta_matches_finite_difference() {
        let catalog = [
            Potential::Quadratic,
            Potential::SmoothAbs { epsilon: 1e-4 },
            Potential::SmoothNorm { epsilon: 1e-8 },
            Potential::Correntropy { sigma2: 1.0 },
            Potential::Correntropy { sigma2: 0.3 },
        ];
        for p in catalog {
            for &t in &[0.01, 0.3, 1.0, 1.7, 3.0] {
                let fd = fd_derivative(&p, t);
                let an = p.delta(t) * t;
                assert!((fd - an).abs() <= 1e-8 * an.abs().max(1e-6), "{p:?} at {t}: {fd} vs {an}");
            }
        }
    }
}
