//! Closed-form probability bounds and the length benchmark.
//!
//! All logarithms are natural. Probability bounds are returned unclamped with
//! an explicit `vacuous` flag.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub vacuous: bool,
}

impl BoundValue {
    pub fn new(value: f64) -> Self {
        Self {
            value,
            vacuous: value >= 1.0,
        }
    }
}

fn finite_tau2(tau2: f64) -> Result<f64> {
    if tau2.is_nan() || tau2 <= 0.0 {
        return Err(Error::InvalidConfig(format!("tau2 must be positive, got {tau2}")));
    }
    if tau2.is_infinite() {
        return Err(Error::InfiniteRelaxation);
    }
    Ok(tau2)
}

fn check_lambda(lambda: f64, m: u64) -> Result<()> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!("lambda must be positive, got {lambda}")));
    }
    if m == 0 {
        return Err(Error::InvalidConfig("m must be at least 1".into()));
    }
    Ok(())
}

/// P(A₁ − ḡ > λ) ≤ exp(1/(5τ₂) − λ²m/(12τ₂)).
pub fn lezaud_one_sided(lambda: f64, m: u64, tau2: f64) -> Result<BoundValue> {
    check_lambda(lambda, m)?;
    let tau2 = finite_tau2(tau2)?;
    Ok(BoundValue::new(
        (1.0 / (5.0 * tau2) - lambda * lambda * m as f64 / (12.0 * tau2)).exp(),
    ))
}

/// P(|A₁ − ḡ| > λ) ≤ 3·exp(−λ²m/(12τ₂)); the factor 3 absorbs 2e^{2/5}
/// using τ₂ ≥ 1/2.
pub fn lezaud_two_sided(lambda: f64, m: u64, tau2: f64) -> Result<BoundValue> {
    check_lambda(lambda, m)?;
    let tau2 = finite_tau2(tau2)?;
    Ok(BoundValue::new(
        3.0 * (-lambda * lambda * m as f64 / (12.0 * tau2)).exp(),
    ))
}

/// P(N_n > 0) ≤ 3n(n+1)·exp(−m·ln²n/(48nτ₂)).
pub fn prop2_bound(n: u64, m: u64, tau2: f64) -> Result<BoundValue> {
    if n < 3 {
        return Err(Error::InvalidConfig(format!("n must be at least 3, got {n}")));
    }
    if m == 0 {
        return Err(Error::InvalidConfig("m must be at least 1".into()));
    }
    let tau2 = finite_tau2(tau2)?;
    let nf = n as f64;
    let ln = nf.ln();
    Ok(BoundValue::new(
        3.0 * nf * (nf + 1.0) * (-(m as f64) / (48.0 * nf * tau2) * ln * ln).exp(),
    ))
}

/// P(M > 96·max(τ₂, τ̂)) ≤ 3n(n+1)·exp(−ln²n).
pub fn con3_bound(n: u64) -> Result<BoundValue> {
    if n < 5 {
        return Err(Error::InvalidConfig(format!("n must be at least 5, got {n}")));
    }
    let nf = n as f64;
    let ln = nf.ln();
    Ok(BoundValue::new(3.0 * nf * (nf + 1.0) * (-ln * ln).exp()))
}

/// Best achievable interval length order: max(1/n, √(τ₂/(nm))).
pub fn lower_bound_length(n: u64, m: u64, tau2: f64) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidConfig("n and m must be at least 1".into()));
    }
    let tau2 = finite_tau2(tau2)?;
    let nf = n as f64;
    let inv_n = 1.0 / nf;
    // √(τ₂/m)/n rather than √(τ₂/(nm)): identical in exact arithmetic, and
    // it reproduces 1/n bit-exactly when m = nτ₂.
    let chain_term = (tau2 / (m as f64 / nf)).sqrt() / nf;
    Ok(inv_n.max(chain_term))
}
