//! Logarithmic free energy and its δ-regularization.
//!
//! `F(r) = (θ/2) F_log(r) + (1 − r²)/2` with
//! `F_log(r) = (1 − r) ln(1 − r) + (1 + r) ln(1 + r)`. The critical
//! temperature is normalized to one, so the double-well regime is `0 < θ < 1`.
//!
//! The regularized `F_log^δ` agrees with `F_log` on `|r| < 1 − δ` and is
//! continued quadratically outside, which makes it `C²` on the whole line.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialParams {
    pub theta: f64,
    pub epsilon: f64,
    pub delta: Option<f64>,
}

impl PotentialParams {
    pub fn new(theta: f64, epsilon: f64) -> Result<Self> {
        let p = PotentialParams { theta, epsilon, delta: None };
        p.validate()?;
        Ok(p)
    }

    pub fn with_delta(self, delta: f64) -> Result<Self> {
        let p = PotentialParams { delta: Some(delta), ..self };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Input(format!("theta = {} must lie in (0, 1)", self.theta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Input(format!("epsilon = {} must be positive", self.epsilon)));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 0.5) {
                return Err(Error::Input(format!("delta = {d} must lie in (0, 0.5)")));
            }
        }
        Ok(())
    }
}

/// `f(r) = ln((1 + r)/(1 − r)) = 2 atanh(r)`.
pub fn f_log(r: f64) -> Result<f64> {
    if !(r.abs() < 1.0) {
        return Err(Error::Domain(format!("f_log has a pole at |r| = 1, got r = {r}")));
    }
    Ok(2.0 * r.atanh())
}

/// `f'(r) = 2/(1 − r²)`.
pub fn f_log_prime(r: f64) -> Result<f64> {
    if !(r.abs() < 1.0) {
        return Err(Error::Domain(format!("f_log' has a pole at |r| = 1, got r = {r}")));
    }
    Ok(2.0 / ((1.0 - r) * (1.0 + r)))
}

/// `F_log(r)` on `[−1, 1]`, with the continuous value `2 ln 2` at `±1`.
pub fn big_f_log(r: f64) -> Result<f64> {
    if !(r.abs() <= 1.0) {
        return Err(Error::Domain(format!("F_log undefined for |r| > 1, got r = {r}")));
    }
    let xlogx = |s: f64| if s == 0.0 { 0.0 } else { s * s.ln() };
    if r.abs() == 1.0 {
        return Ok(2.0 * LN_2);
    }
    // (1 ± r) ln(1 ± r) via ln_1p keeps accuracy near the poles
    let plus = (1.0 + r) * r.ln_1p();
    let minus = (1.0 - r) * (-r).ln_1p();
    let v = plus + minus;
    debug_assert!((v - (xlogx(1.0 + r) + xlogx(1.0 - r))).abs() < 1e-12);
    Ok(v)
}

/// Total potential `F(r) = (θ/2) F_log(r) + (1 − r²)/2`.
pub fn big_f_total(r: f64, params: &PotentialParams) -> Result<f64> {
    Ok(0.5 * params.theta * big_f_log(r)? + 0.5 * (1.0 - r * r))
}

fn require_delta(params: &PotentialParams) -> Result<f64> {
    params
        .delta
        .ok_or_else(|| Error::Input("regularized potential needs delta".into()))
}

/// Regularized `F_log^δ`, defined on all of ℝ.
pub fn big_f_log_delta(r: f64, delta: f64) -> f64 {
    let (ld, l2) = (delta.ln(), (2.0 - delta).ln());
    if r >= 1.0 - delta {
        (1.0 - r) * ld + (1.0 + r) * l2 + (1.0 - r).powi(2) / (2.0 * delta)
            + (1.0 + r).powi(2) / (2.0 * (2.0 - delta))
            - 1.0
    } else if r <= -1.0 + delta {
        (1.0 + r) * ld + (1.0 - r) * l2 + (1.0 + r).powi(2) / (2.0 * delta)
            + (1.0 - r).powi(2) / (2.0 * (2.0 - delta))
            - 1.0
    } else {
        (1.0 + r) * r.ln_1p() + (1.0 - r) * (-r).ln_1p()
    }
}

/// `f^δ = (F_log^δ)'`.
pub fn f_delta_raw(r: f64, delta: f64) -> f64 {
    let knot = ((2.0 - delta) / delta).ln();
    if r >= 1.0 - delta {
        knot - (1.0 - r) / delta + (1.0 + r) / (2.0 - delta)
    } else if r <= -1.0 + delta {
        -knot + (1.0 + r) / delta - (1.0 - r) / (2.0 - delta)
    } else {
        2.0 * r.atanh()
    }
}

/// `(f^δ)'`; constant `1/δ + 1/(2 − δ)` outside the knots.
pub fn f_delta_prime_raw(r: f64, delta: f64) -> f64 {
    if r.abs() >= 1.0 - delta {
        1.0 / delta + 1.0 / (2.0 - delta)
    } else {
        2.0 / ((1.0 - r) * (1.0 + r))
    }
}

pub fn f_delta(r: f64, params: &PotentialParams) -> Result<f64> {
    Ok(f_delta_raw(r, require_delta(params)?))
}

pub fn f_delta_prime(r: f64, params: &PotentialParams) -> Result<f64> {
    Ok(f_delta_prime_raw(r, require_delta(params)?))
}

/// `F^δ(r) = (θ/2) F_log^δ(r) + (1 − r²)/2`.
pub fn big_f_delta_total(r: f64, params: &PotentialParams) -> Result<f64> {
    let delta = require_delta(params)?;
    Ok(0.5 * params.theta * big_f_log_delta(r, delta) + 0.5 * (1.0 - r * r))
}

/// Convex part of the chemical potential used by the solver: either the
/// exact logarithm or its δ-regularization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity {
    Exact,
    Regularized(f64),
}

impl Nonlinearity {
    pub fn value(&self, r: f64) -> Result<f64> {
        match *self {
            Nonlinearity::Exact => f_log(r),
            Nonlinearity::Regularized(d) => Ok(f_delta_raw(r, d)),
        }
    }

    pub fn derivative(&self, r: f64) -> Result<f64> {
        match *self {
            Nonlinearity::Exact => f_log_prime(r),
            Nonlinearity::Regularized(d) => Ok(f_delta_prime_raw(r, d)),
        }
    }
}
