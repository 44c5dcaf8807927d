//! Closed-form single-flow prices under a constant information rate.

use super::price_single;
use crate::error::{Error, Result};
use crate::filter::InformationState;
use crate::market::{DiscountCurve, FlowSchedule};
use crate::numerics::{ncdf, scaled_upper_tail, shifted_inverse_mills};
use crate::priors::PriorDistribution;
use std::f64::consts::PI;

/// Below this the closed forms are numerically indeterminate and quadrature is used.
pub const MIN_PRECISION: f64 = 1e-10;

/// `F_k(x) = ∫_x^∞ z^k e^{−z²/2} dz`, by upward recursion from `F_0` and `F_1`.
pub fn f_k(k: usize, x: f64) -> f64 {
    let f0 = (2.0 * PI).sqrt() * ncdf(-x);
    let g = (-0.5 * x * x).exp();
    if k == 0 {
        return f0;
    }
    let (mut lo, mut hi) = (f0, g);
    // (k+1) F_k = F_{k+2} − x^{k+1} e^{−x²/2}
    for j in 0..k - 1 {
        let next = (j as f64 + 1.0) * lo + x.powi(j as i32 + 1) * g;
        lo = hi;
        hi = next;
    }
    hi
}

/// `F_0..=F_n` at `x`, multiplied by `e^{x²/2}` when `x > 0` so that large
/// arguments do not underflow.
fn f_table(n: usize, x: f64) -> Vec<f64> {
    let (f0, g) = if x > 0.0 {
        (scaled_upper_tail(x), 1.0)
    } else {
        ((2.0 * PI).sqrt() * ncdf(-x), (-0.5 * x * x).exp())
    };
    let mut out = Vec::with_capacity(n + 1);
    out.push(f0);
    if n >= 1 {
        out.push(g);
    }
    for j in 2..=n {
        let next = (j as f64 - 1.0) * out[j - 2] + x.powi(j as i32 - 1) * g;
        out.push(next);
    }
    out
}

fn check_inputs(sigma: f64, t: f64, maturity: f64, xi: f64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("information rate must be nonnegative, got {sigma}")));
    }
    if !(maturity > 0.0 && maturity.is_finite()) {
        return Err(Error::InvalidParameter(format!("maturity must be positive, got {maturity}")));
    }
    if !xi.is_finite() || !t.is_finite() {
        return Err(Error::NonFinite("closed-form input".into()));
    }
    if t < 0.0 {
        return Err(Error::TimeOutOfRange {
            t,
            lower: 0.0,
            upper: maturity,
        });
    }
    Ok(())
}

fn quadrature_fallback(
    prior: PriorDistribution,
    sigma: f64,
    curve: &DiscountCurve,
    t: f64,
    maturity: f64,
    xi: f64,
) -> Result<f64> {
    let schedule = FlowSchedule::constant(sigma, maturity)?;
    price_single(&prior, &schedule, curve, t, InformationState::constant_sigma(sigma, xi))
}

/// Price of a single flow with an exponential prior of mean `delta`.
pub fn closed_form_exponential(
    delta: f64,
    sigma: f64,
    curve: &DiscountCurve,
    t: f64,
    maturity: f64,
    xi: f64,
) -> Result<f64> {
    check_inputs(sigma, t, maturity, xi)?;
    if t >= maturity {
        return Ok(0.0);
    }
    let prior = PriorDistribution::exponential(delta)?;
    let a = sigma * sigma * t * maturity / (maturity - t);
    if a < MIN_PRECISION {
        return quadrature_fallback(prior, sigma, curve, t, maturity, xi);
    }
    let b = sigma * maturity * xi / (maturity - t) - 1.0 / delta;
    let root_a = a.sqrt();
    // φ(z)/(√A N(z)) + B/A with z = B/√A
    let mean = shifted_inverse_mills(b / root_a) / root_a;
    Ok(curve.discount_factor(t, maturity)? * mean)
}

/// Price of a single flow with a gamma prior of shape `n` and rate `delta`.
pub fn closed_form_gamma(
    n: u32,
    delta: f64,
    sigma: f64,
    curve: &DiscountCurve,
    t: f64,
    maturity: f64,
    xi: f64,
) -> Result<f64> {
    check_inputs(sigma, t, maturity, xi)?;
    if t >= maturity {
        return Ok(0.0);
    }
    let prior = PriorDistribution::gamma(n, delta)?;
    let a = sigma * sigma * t * maturity / (maturity - t);
    if a < MIN_PRECISION {
        return quadrature_fallback(prior, sigma, curve, t, maturity, xi);
    }
    let b = sigma * maturity * xi / (maturity - t) - delta;
    let root_a = a.sqrt();
    let c = b / root_a;
    let n = n as usize;
    let f = f_table(n, -c);
    // Σ_k C(m,k) A^{k/2−m} B^{m−k} F_k = A^{−m/2} Σ_k C(m,k) c^{m−k} F_k; the common
    // scaling of F cancels in the ratio
    let binomial_sum = |m: usize| {
        let mut coeff = 1.0;
        let mut s = 0.0;
        for (k, fk) in f.iter().take(m + 1).enumerate() {
            s += coeff * c.powi((m - k) as i32) * fk;
            coeff *= (m - k) as f64 / (k + 1) as f64;
        }
        s
    };
    let mean = binomial_sum(n) / binomial_sum(n - 1) / root_a;
    if !mean.is_finite() {
        return Err(Error::NonFinite("gamma closed form".into()));
    }
    Ok(curve.discount_factor(t, maturity)? * mean)
}

/// The geometric Brownian motion special case: a standard normal factor with
/// `σ = 1/√T` and payoff `S₀ exp(rT + ν√T X − ½ν²T)`.
pub fn price_gbm_factor(s0: f64, r: f64, vol: f64, sigma: f64, maturity: f64, t: f64, xi: f64) -> Result<f64> {
    check_inputs(sigma, t, maturity, xi)?;
    let expected = 1.0 / maturity.sqrt();
    if (sigma - expected).abs() > 1e-12 * expected {
        return Err(Error::InvalidParameter(format!(
            "the GBM fast path needs σ = 1/√T = {expected}, got {sigma}"
        )));
    }
    if t >= maturity {
        return Ok(0.0);
    }
    Ok(s0 * (r * t + vol * xi - 0.5 * vol * vol * t).exp())
}
