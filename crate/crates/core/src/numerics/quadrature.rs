use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Default number of quadrature nodes for continuous priors.
pub const DEFAULT_NODES: usize = 256;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        // Tricomi's initial guess, refined by Newton on P_n
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// A fixed quadrature rule: `∫ f ≈ Σ w_i f(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    truncation_upper: f64,
}

impl QuadratureRule {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::InvalidParameter(
                "quadrature rule needs equally many nodes and weights".into(),
            ));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("quadrature nodes must be strictly increasing".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("quadrature weights must be positive".into()));
        }
        let truncation_upper = *nodes.last().unwrap();
        Ok(Self {
            nodes,
            weights,
            truncation_upper,
        })
    }

    /// Gauss–Legendre on `u ∈ (0, 1)` mapped to `[0, ∞)` by `x = L·u/(1−u)`.
    pub fn semi_infinite(scale: f64, n: usize) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!("quadrature scale must be positive, got {scale}")));
        }
        let (z, w) = gauss_legendre(n);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (zi, wi) in z.into_iter().zip(w) {
            let u = 0.5 * (zi + 1.0);
            let one_minus = 1.0 - u;
            nodes.push(scale * u / one_minus);
            weights.push(0.5 * wi * scale / (one_minus * one_minus));
        }
        Self::new(nodes, weights)
    }

    /// Two mirrored semi-infinite maps covering the real line, `n` nodes per side.
    pub fn real_line(scale: f64, n: usize) -> Result<Self> {
        let half = Self::semi_infinite(scale, n)?;
        let mut nodes: Vec<f64> = half.nodes.iter().rev().map(|x| -x).collect();
        let mut weights: Vec<f64> = half.weights.iter().rev().copied().collect();
        nodes.extend_from_slice(&half.nodes);
        weights.extend_from_slice(&half.weights);
        Self::new(nodes, weights)
    }

    /// Composite Gauss–Legendre with `per_segment` nodes on each interval of `breaks`.
    pub fn composite(breaks: &[f64], per_segment: usize) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(Error::InvalidParameter("composite rule needs at least two breakpoints".into()));
        }
        let (z, w) = gauss_legendre(per_segment);
        let mut nodes = Vec::with_capacity((breaks.len() - 1) * per_segment);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for seg in breaks.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let half = 0.5 * (b - a);
            for (zi, wi) in z.iter().zip(&w) {
                nodes.push(a + half * (zi + 1.0));
                weights.push(half * wi);
            }
        }
        Self::new(nodes, weights)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn truncation_upper(&self) -> f64 {
        self.truncation_upper
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `Σ w_i f(x_i)` over the rule; a non-finite `f(x_i)` is an error naming the node.
pub fn integrate_semiinfinite<F>(f: F, rule: &QuadratureRule) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut sum = 0.0;
    for (index, (&x, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::NonFiniteIntegrand { index, node: x });
        }
        sum += w * fx;
    }
    Ok(sum)
}
