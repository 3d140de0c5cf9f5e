//! Polynomial (Richardson) extrapolation to zero coupling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residuals smaller than this are rounding noise and exempt from the
/// monotonicity check.
const NOISE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrapolated {
    pub value: f64,
    /// Difference between the two highest extrapolation orders.
    pub error: f64,
}

/// Extrapolates samples `f(g)` to `g -> 0`, treating `f` as a series in
/// `g^2`. Couplings must be distinct, positive and strictly decreasing, with
/// at least three samples.
///
/// Fails with [`Error::NonMonotoneResiduals`] when the distance of the
/// samples from the limit does not shrink with the coupling.
pub fn richardson(couplings: &[f64], values: &[f64]) -> Result<Extrapolated> {
    if couplings.len() != values.len() {
        return Err(Error::LengthMismatch { expected: couplings.len(), got: values.len() });
    }
    if couplings.len() < 3 {
        return Err(Error::InvalidInput(format!("extrapolation needs at least 3 couplings, got {}", couplings.len())));
    }
    if couplings.iter().any(|g| !(g.is_finite() && *g > 0.0)) || couplings.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("couplings must be positive and strictly decreasing".into()));
    }
    let orders = neville_orders(couplings, values);
    let value = *orders.last().expect("at least three orders");
    let error = (value - orders[orders.len() - 2]).abs();
    let residuals: Vec<f64> = values.iter().map(|v| (v - value).abs()).collect();
    if residuals.windows(2).any(|w| w[1] > w[0] && w[1] > NOISE_FLOOR) {
        return Err(Error::NonMonotoneResiduals(residuals));
    }
    Ok(Extrapolated { value, error })
}

/// Value at `g = 0` of the polynomial in `g^2` through all samples, without
/// any convergence check.
pub fn neville_at_zero(couplings: &[f64], values: &[f64]) -> Result<f64> {
    if couplings.len() != values.len() || couplings.is_empty() {
        return Err(Error::LengthMismatch { expected: couplings.len(), got: values.len() });
    }
    Ok(*neville_orders(couplings, values).last().expect("nonempty"))
}

/// Neville's table evaluated at `h = g^2 = 0`; entry `k` interpolates the
/// last `k + 1` samples.
fn neville_orders(couplings: &[f64], values: &[f64]) -> Vec<f64> {
    let h: Vec<f64> = couplings.iter().map(|g| g * g).collect();
    let n = h.len();
    let mut p = values.to_vec();
    let mut orders = vec![values[n - 1]];
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (h[i + k] * p[i] - h[i] * p[i + 1]) / (h[i + k] - h[i]);
        }
        orders.push(p[n - k - 1]);
    }
    orders
}
