//! Loss functions for the M-estimation step: rho, its derivative psi, and the
//! weights used by iteratively reweighted least squares.
//!
//! The quantile loss is always fitted through its smoothed version with a
//! quadratic core of half-width epsilon; the exact absolute loss is kept as a
//! separate kind for reference oracles only.

use crate::error::{FlError, Result};

/// Default Huber tuning constant (95% efficiency in the Gaussian location
/// model).
pub const DEFAULT_HUBER_K: f64 = 1.345;

/// Default half-width of the quadratic core of the smoothed quantile loss, in
/// standardized-residual units.
pub const DEFAULT_QUANTILE_EPSILON: f64 = 1e-4;

/// Residuals below `ZERO_RESIDUAL_REL * sigma` in magnitude take the analytic
/// zero-residual weight limit.
const ZERO_RESIDUAL_REL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossSpec {
    Square,
    /// Exact absolute loss. Reference kind for oracle tests; not used for
    /// IRLS fitting (its weights are unbounded at zero residuals).
    L1Exact,
    /// Smoothed check loss: `2x(tau - 1{x<0})` outside `(-eps, eps)`, with
    /// quadratic core `2 tau x^2/eps` on `[0, eps)` and `2(1-tau) x^2/eps` on
    /// `(-eps, 0]`.
    Quantile { tau: f64, epsilon: f64 },
    Huber { k: f64 },
    Logistic,
}

impl LossSpec {
    pub fn huber() -> Self {
        LossSpec::Huber { k: DEFAULT_HUBER_K }
    }

    pub fn quantile(tau: f64) -> Result<Self> {
        Self::quantile_with(tau, DEFAULT_QUANTILE_EPSILON)
    }

    pub fn quantile_with(tau: f64, epsilon: f64) -> Result<Self> {
        let spec = LossSpec::Quantile { tau, epsilon };
        spec.validate()?;
        Ok(spec)
    }

    /// The absolute loss as actually fitted: the smoothed quantile at
    /// tau = 1/2.
    pub fn smoothed_l1() -> Self {
        LossSpec::Quantile {
            tau: 0.5,
            epsilon: DEFAULT_QUANTILE_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LossSpec::Square | LossSpec::L1Exact | LossSpec::Logistic => Ok(()),
            LossSpec::Quantile { tau, epsilon } => {
                if !(*tau > 0.0 && *tau < 1.0) {
                    return Err(FlError::Invalid(format!(
                        "quantile level must lie in (0, 1), got {tau}"
                    )));
                }
                if !(*epsilon > 0.0) || !epsilon.is_finite() {
                    return Err(FlError::Invalid(format!(
                        "quantile smoothing width must be positive, got {epsilon}"
                    )));
                }
                Ok(())
            }
            LossSpec::Huber { k } => {
                if !(*k > 0.0) || !k.is_finite() {
                    return Err(FlError::Invalid(format!(
                        "Huber constant must be positive, got {k}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// True for losses whose fit requires an auxiliary residual scale.
    pub fn needs_scale(&self) -> bool {
        matches!(self, LossSpec::Huber { .. } | LossSpec::Logistic)
    }

    /// Loss value `rho(x)`.
    pub fn rho(&self, x: f64) -> f64 {
        match self {
            LossSpec::Square => x * x,
            LossSpec::L1Exact => x.abs(),
            LossSpec::Huber { k } => {
                if x.abs() < *k {
                    x * x
                } else {
                    2.0 * k * x.abs() - k * k
                }
            }
            LossSpec::Logistic => {
                // 2x + 4 log(1 + e^{-x}), rewritten overflow-safe per sign
                if x >= 0.0 {
                    2.0 * x + 4.0 * (-x).exp().ln_1p()
                } else {
                    -2.0 * x + 4.0 * x.exp().ln_1p()
                }
            }
            LossSpec::Quantile { tau, epsilon } => {
                if x.abs() >= *epsilon {
                    2.0 * x * (tau - if x < 0.0 { 1.0 } else { 0.0 })
                } else if x >= 0.0 {
                    2.0 * tau * x * x / epsilon
                } else {
                    2.0 * (1.0 - tau) * x * x / epsilon
                }
            }
        }
    }

    /// Derivative `psi(x) = rho'(x)`, defined piecewise at kinks.
    pub fn psi(&self, x: f64) -> f64 {
        match self {
            LossSpec::Square => 2.0 * x,
            LossSpec::L1Exact => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LossSpec::Huber { k } => {
                if x.abs() < *k {
                    2.0 * x
                } else {
                    2.0 * k * x.signum()
                }
            }
            LossSpec::Logistic => 2.0 - 4.0 / (1.0 + x.exp()),
            LossSpec::Quantile { tau, epsilon } => {
                if x.abs() >= *epsilon {
                    2.0 * (tau - if x < 0.0 { 1.0 } else { 0.0 })
                } else if x >= 0.0 {
                    4.0 * tau * x / epsilon
                } else {
                    4.0 * (1.0 - tau) * x / epsilon
                }
            }
        }
    }

    /// IRLS weight `psi(r/sigma) / (2 sigma r)`, with the analytic limit at
    /// zero residual (for the asymmetric smoothed quantile, the mean of the
    /// one-sided limits, `1/(sigma^2 eps)`).
    pub fn irls_weight(&self, r: f64, sigma: f64) -> Result<f64> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(FlError::Invalid(format!(
                "scale must be positive, got {sigma}"
            )));
        }
        if r.abs() < ZERO_RESIDUAL_REL * sigma {
            return Ok(self.zero_residual_weight(sigma));
        }
        let w = self.psi(r / sigma) / (2.0 * sigma * r);
        debug_assert!(w.is_finite() && w >= 0.0);
        Ok(w)
    }

    fn zero_residual_weight(&self, sigma: f64) -> f64 {
        let s2 = sigma * sigma;
        match self {
            LossSpec::Square | LossSpec::Huber { .. } => 1.0 / s2,
            LossSpec::Logistic => 0.5 / s2,
            LossSpec::Quantile { epsilon, .. } => 1.0 / (s2 * epsilon),
            // capped as if |r| sat exactly at the zero-residual threshold
            LossSpec::L1Exact => 1.0 / (2.0 * s2 * ZERO_RESIDUAL_REL),
        }
    }

    /// Lipschitz constant of `rho` outside the smoothing core (the constant
    /// of assumption-style bounds; Square is not Lipschitz and returns None).
    pub fn lipschitz_bound(&self) -> Option<f64> {
        match self {
            LossSpec::Square => None,
            LossSpec::L1Exact => Some(1.0),
            LossSpec::Huber { k } => Some(2.0 * k),
            LossSpec::Logistic => Some(2.0),
            LossSpec::Quantile { tau, .. } => Some(2.0 * tau.max(1.0 - tau)),
        }
    }
}
