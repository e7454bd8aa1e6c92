//! Parameter arithmetic for the sparsity family k = λn/log n.
//!
//! All logarithms are natural. The defective probability is p = λ/log n and
//! the test budget is written as a rate α = T/n. Derived integer quantities
//! follow explicit rounding rules: k rounds to the nearest integer (clamped
//! to [1, n−1]) and the per-item draw count L = νT/k rounds to the nearest
//! integer with a floor of 1. The paper-facing statistical checks in the
//! experiment module instead realize νT/k exactly in expectation via
//! per-item stochastic rounding; see `design::generate_nctpi_rate`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// (log 2)^2 ≈ 0.4805, the constant separating the sufficient and necessary
/// test rates in this regime.
pub const LOG2_SQUARED: f64 = std::f64::consts::LN_2 * std::f64::consts::LN_2;

/// Slack constants used by the bound formulas, plus the draws-per-item
/// coefficient ν. Defaults: ε and γ are 0.1, ν = log 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slacks {
    pub eps_upper: f64,
    pub eps_lower: f64,
    pub gamma: f64,
    pub nu: f64,
}

impl Default for Slacks {
    fn default() -> Self {
        Slacks {
            eps_upper: 0.1,
            eps_lower: 0.1,
            gamma: 0.1,
            nu: std::f64::consts::LN_2,
        }
    }
}

/// Problem size plus every derived regime quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub n: usize,
    pub lambda: f64,
    pub eps_upper: f64,
    pub eps_lower: f64,
    pub gamma: f64,
    pub nu: f64,
    /// Defective probability p = λ/log n; always in (0, 1).
    pub p: f64,
    /// round(λn/log n), clamped to [1, n−1].
    pub k: usize,
    /// ceil(min(1, (1+ε_upper)·λ/log²2)·n), the sufficient test count.
    pub t_sufficient: usize,
    /// round(ν·t_sufficient/k), minimum 1.
    pub l: usize,
}

/// Derives p, k, T_sufficient and L from (n, λ) and the slack constants.
///
/// Rejects λ/log n ≥ 1 (outside the regime) and any k whose round-and-clamp
/// moves it by more than 1 from λn/log n (degenerately small n).
pub fn derive_regime(n: usize, lambda: f64, slacks: Slacks) -> Result<RegimeParams> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("n = {n} must be at least 3")));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be positive")));
    }
    if !(slacks.eps_upper > 0.0 && slacks.eps_upper.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "eps_upper = {} must be positive",
            slacks.eps_upper
        )));
    }
    if !(slacks.eps_lower > 0.0 && slacks.eps_lower < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eps_lower = {} must lie in (0, 1)",
            slacks.eps_lower
        )));
    }
    if !(slacks.gamma > 0.0 && slacks.gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma = {} must be positive", slacks.gamma)));
    }
    if !(slacks.nu > 0.0 && slacks.nu.is_finite()) {
        return Err(Error::InvalidArgument(format!("nu = {} must be positive", slacks.nu)));
    }

    let log_n = (n as f64).ln();
    let p = lambda / log_n;
    if p >= 1.0 {
        return Err(Error::Regime(format!(
            "p = lambda/log n = {p:.6} is not below 1 (n = {n}, lambda = {lambda})"
        )));
    }

    let k_raw = lambda * n as f64 / log_n;
    let k = (k_raw.round() as i64).clamp(1, n as i64 - 1) as usize;
    if (k as f64 - k_raw).abs() > 1.0 {
        return Err(Error::Regime(format!(
            "k clamp moved k from {k_raw:.3} to {k}; n = {n} is degenerately small"
        )));
    }

    let rate = (1.0f64).min((1.0 + slacks.eps_upper) * lambda / LOG2_SQUARED);
    let t_sufficient = (rate * n as f64).ceil() as usize;
    let l = (slacks.nu * t_sufficient as f64 / k as f64).round().max(1.0) as usize;

    Ok(RegimeParams {
        n,
        lambda,
        eps_upper: slacks.eps_upper,
        eps_lower: slacks.eps_lower,
        gamma: slacks.gamma,
        nu: slacks.nu,
        p,
        k,
        t_sufficient,
        l,
    })
}

impl RegimeParams {
    /// Derivation with the default slack constants.
    pub fn with_defaults(n: usize, lambda: f64) -> Result<Self> {
        derive_regime(n, lambda, Slacks::default())
    }

    /// Test count for a rate α = T/n, rounded to nearest.
    pub fn tests_for_alpha(&self, alpha: f64) -> usize {
        (alpha * self.n as f64).round() as usize
    }

    /// Real-valued draws per item ν·T/k for a given test count.
    pub fn draws_per_item(&self, t: usize) -> f64 {
        self.nu * t as f64 / self.k as f64
    }

    /// Integer draw count round(ν·T/k), minimum 1.
    pub fn draw_count(&self, t: usize) -> usize {
        self.draws_per_item(t).round().max(1.0) as usize
    }
}
