//! Shared numerical kernels.

mod quadrature;
pub mod stats;

pub use quadrature::{gauss_legendre, integrate_semiinfinite, QuadratureRule, DEFAULT_NODES};

use crate::error::{Error, Result};
use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal distribution function `N(x)`.
pub fn normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("normal_cdf({x})")));
    }
    Ok(ncdf(x))
}

/// Unchecked `N(x)`; infinite arguments map to 0 or 1.
#[inline]
pub(crate) fn ncdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

#[inline]
pub(crate) fn npdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Mills ratio `N(-x)/φ(x)` for `x ≥ 0` via its continued fraction.
fn mills_ratio_cf(x: f64) -> f64 {
    // 1/(x + 1/(x + 2/(x + 3/(x + ...)))), evaluated bottom-up
    let mut tail = 0.0;
    for k in (1..=120).rev() {
        tail = k as f64 / (x + tail);
    }
    1.0 / (x + tail)
}

/// `φ(z)/N(z) + z`, computed without cancellation for very negative `z`.
///
/// This is the quantity behind the mean of a Gaussian truncated to `[0, ∞)`.
pub(crate) fn shifted_inverse_mills(z: f64) -> f64 {
    if z > -8.0 {
        npdf(z) / ncdf(z) + z
    } else {
        let x = -z;
        let mut tail = 0.0;
        for k in (1..=120).rev() {
            tail = k as f64 / (x + tail);
        }
        // 1/R(x) - x where R(x) = 1/(x + tail)
        tail
    }
}

/// `√(2π) N(-x) e^{x²/2}`, the Mills ratio scaled to avoid underflow for large `x`.
pub(crate) fn scaled_upper_tail(x: f64) -> f64 {
    if x > 8.0 {
        mills_ratio_cf(x)
    } else {
        (2.0 * PI).sqrt() * ncdf(-x) * (0.5 * x * x).exp()
    }
}

/// Log of the total and the normalized weights of a list of log terms.
///
/// Entries equal to `-inf` contribute zero weight.
pub fn logsumexp_weights(log_terms: &[f64]) -> Result<(f64, Vec<f64>)> {
    let max = max_finite(log_terms)?;
    let mut weights: Vec<f64> = log_terms.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok((max + total.ln(), weights))
}

/// `log Σ exp(l_i)` with the same conventions as [`logsumexp_weights`].
pub fn logsumexp(log_terms: &[f64]) -> Result<f64> {
    let max = max_finite(log_terms)?;
    let total: f64 = log_terms.iter().map(|&l| (l - max).exp()).sum();
    Ok(max + total.ln())
}

fn max_finite(log_terms: &[f64]) -> Result<f64> {
    if log_terms.is_empty() {
        return Err(Error::InvalidParameter("empty list of log terms".into()));
    }
    let mut max = f64::NEG_INFINITY;
    for &l in log_terms {
        if l.is_nan() || l == f64::INFINITY {
            return Err(Error::NonFinite(format!("log term {l}")));
        }
        max = max.max(l);
    }
    if max == f64::NEG_INFINITY {
        return Err(Error::ZeroMass);
    }
    Ok(max)
}

/// Tolerances for [`find_root_increasing`].
#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    pub atol: f64,
    pub rtol: f64,
    pub max_doublings: u32,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            atol: 1e-12,
            rtol: 1e-10,
            max_doublings: 200,
        }
    }
}

/// Root of a continuous increasing function.
///
/// A bracket is grown geometrically (factor 2) away from `seed` until the sign
/// changes, then bisected. If the sign never changes within `max_doublings`
/// the function is reported as [`Error::NoSignChange`].
pub fn find_root_increasing<G>(g: G, seed: f64, opts: RootOptions) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    if !seed.is_finite() {
        return Err(Error::NonFinite(format!("bracket seed {seed}")));
    }
    let g0 = g(seed);
    if g0.is_nan() {
        return Err(Error::NonFinite(format!("g({seed})")));
    }
    if g0 == 0.0 {
        return Ok(seed);
    }
    let mut width = seed.abs().max(1.0);
    let (mut lo, mut hi);
    if g0 < 0.0 {
        lo = seed;
        hi = seed + width;
        let mut k = 0;
        while g(hi) < 0.0 {
            k += 1;
            if k > opts.max_doublings {
                return Err(Error::NoSignChange { positive: false });
            }
            lo = hi;
            width *= 2.0;
            hi = seed + width;
        }
    } else {
        hi = seed;
        lo = seed - width;
        let mut k = 0;
        while g(lo) > 0.0 {
            k += 1;
            if k > opts.max_doublings {
                return Err(Error::NoSignChange { positive: true });
            }
            hi = lo;
            width *= 2.0;
            lo = seed - width;
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= opts.rtol * mid.abs().max(1.0) || mid == lo || mid == hi {
            return Ok(mid);
        }
        let gm = g(mid);
        if gm.is_nan() {
            return Err(Error::NonFinite(format!("g({mid})")));
        }
        if gm.abs() <= opts.atol {
            return Ok(mid);
        }
        if gm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Ordered simulation times starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.first() != Some(&0.0) {
            return Err(Error::InvalidParameter("time grid must start at 0".into()));
        }
        if nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("time grid node".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
        }
        Ok(Self { nodes })
    }

    /// `steps` equal steps over `[0, horizon]`.
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || steps == 0 {
            return Err(Error::InvalidParameter(format!(
                "uniform grid needs horizon > 0 and steps > 0 (got {horizon}, {steps})"
            )));
        }
        let h = horizon / steps as f64;
        let mut nodes: Vec<f64> = (0..steps).map(|i| i as f64 * h).collect();
        nodes.push(horizon);
        Self::new(nodes)
    }

    /// Uniform grid with extra nodes inserted at `breakpoints` inside `(0, horizon)`.
    pub fn uniform_with_breakpoints(horizon: f64, steps: usize, breakpoints: &[f64]) -> Result<Self> {
        let base = Self::uniform(horizon, steps)?;
        Ok(base.with_nodes(breakpoints))
    }

    /// Copy of the grid with additional nodes merged in (values outside the grid range are ignored).
    pub fn with_nodes(&self, extra: &[f64]) -> Self {
        let last = self.horizon();
        let mut nodes = self.nodes.clone();
        nodes.extend(extra.iter().copied().filter(|&b| b > 0.0 && b < last));
        nodes.sort_by(f64::total_cmp);
        let tol = 1e-12 * last.max(1.0);
        nodes.dedup_by(|a, b| (*a - *b).abs() <= tol);
        Self { nodes }
    }

    /// Nodes not exceeding `t_max`.
    pub fn truncated(&self, t_max: f64) -> Self {
        let nodes: Vec<f64> = self.nodes.iter().copied().take_while(|&t| t <= t_max).collect();
        Self { nodes }
    }

    /// Rejects grids reaching beyond the maturity `maturity`.
    pub fn check_within(&self, maturity: f64) -> Result<()> {
        let last = self.horizon();
        if last > maturity {
            return Err(Error::TimeOutOfRange {
                t: last,
                lower: 0.0,
                upper: maturity,
            });
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().expect("grid has at least one node")
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * self.horizon().max(1.0);
        self.nodes.iter().position(|&s| (s - t).abs() <= tol)
    }
}
