//! A priori laws of dividends and market factors.

use crate::error::{Error, Result};
use crate::numerics::{ncdf, QuadratureRule, DEFAULT_NODES};
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist, Normal};
use statrs::function::gamma::ln_gamma;
use std::path::Path;

/// Upper-tail probability left outside the quadrature scale `L`.
const SCALE_TAIL: f64 = 1e-6;

/// A point mass `value` with probability `prob`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

/// Piecewise-linear density on a user grid, normalized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDensity {
    xs: Vec<f64>,
    fs: Vec<f64>,
    cdf: Vec<f64>,
}

impl TabulatedDensity {
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn densities(&self) -> &[f64] {
        &self.fs
    }

    fn segment(&self, x: f64) -> Option<usize> {
        if x < self.xs[0] || x > *self.xs.last().unwrap() {
            return None;
        }
        let i = self.xs.partition_point(|&k| k <= x);
        Some(i.saturating_sub(1).min(self.xs.len() - 2))
    }

    fn density(&self, x: f64) -> f64 {
        match self.segment(x) {
            None => 0.0,
            Some(i) => {
                let h = self.xs[i + 1] - self.xs[i];
                let s = (x - self.xs[i]) / h;
                self.fs[i] + s * (self.fs[i + 1] - self.fs[i])
            }
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return 0.0;
        }
        match self.segment(x) {
            None => 1.0,
            Some(i) => {
                let h = self.xs[i + 1] - self.xs[i];
                let s = x - self.xs[i];
                let slope = (self.fs[i + 1] - self.fs[i]) / h;
                self.cdf[i] + self.fs[i] * s + 0.5 * slope * s * s
            }
        }
    }

    fn quantile(&self, p: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c < p).clamp(1, self.xs.len() - 1) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let f0 = self.fs[i];
        let slope = (self.fs[i + 1] - f0) / h;
        let need = p - self.cdf[i];
        let s = if slope.abs() < 1e-14 * (f0.abs() + 1.0) {
            if f0 > 0.0 {
                need / f0
            } else {
                0.0
            }
        } else {
            // ½ slope s² + f0 s − need = 0, stable root
            let disc = (f0 * f0 + 2.0 * slope * need).max(0.0);
            2.0 * need / (f0 + disc.sqrt())
        };
        (self.xs[i] + s.clamp(0.0, h)).min(self.xs[i + 1])
    }
}

/// The family of a prior together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorKind {
    DiscreteAtoms(Vec<Atom>),
    /// `p(x) = (1/δ) e^{-x/δ}`, mean `δ`.
    Exponential { delta: f64 },
    /// `p(x) = δⁿ/(n−1)! xⁿ⁻¹ e^{-δx}`, mean `n/δ`.
    Gamma { n: u32, delta: f64 },
    /// Law of `S_T = S₀ exp(rT + ν√T X − ½ν²T)` with `X` standard normal.
    LogNormal { s0: f64, r: f64, vol: f64, maturity: f64 },
    StandardNormal,
    Tabulated(TabulatedDensity),
}

/// Closed interval containing the support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub third_central: f64,
    /// Set when a tabulated density is still carrying mass at its last grid point.
    pub tail_warning: bool,
}

/// Support points and log-masses approximating a prior: exact atoms, or quadrature
/// nodes with `log(w_i p(x_i))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    pub nodes: Vec<f64>,
    pub log_masses: Vec<f64>,
}

/// The a priori law `p(x)` of a dividend or market factor.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorDistribution {
    kind: PriorKind,
}

impl PriorDistribution {
    /// Discrete prior; probabilities must be positive and sum to one (up to 1e-9, then renormalized).
    pub fn atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("discrete prior needs at least one atom".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "atom probabilities sum to {total}, expected 1"
            )));
        }
        let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
        for (value, prob) in atoms {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidParameter(format!("atom value {value} outside [0, ∞)")));
            }
            if !(prob > 0.0) {
                return Err(Error::InvalidParameter(format!("atom probability {prob} must be positive")));
            }
            out.push(Atom {
                value,
                prob: prob / total,
            });
        }
        out.sort_by(|a, b| a.value.total_cmp(&b.value));
        if out.windows(2).any(|w| w[0].value == w[1].value) {
            return Err(Error::InvalidParameter("duplicate atom values".into()));
        }
        Ok(Self {
            kind: PriorKind::DiscreteAtoms(out),
        })
    }

    /// Point mass at `d`.
    pub fn degenerate(d: f64) -> Result<Self> {
        Self::atoms(vec![(d, 1.0)])
    }

    /// Exponential prior with mean `delta`.
    pub fn exponential(delta: f64) -> Result<Self> {
        positive("exponential δ", delta)?;
        Ok(Self {
            kind: PriorKind::Exponential { delta },
        })
    }

    /// Gamma prior with integer shape `n` and rate `delta`.
    pub fn gamma(n: u32, delta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("gamma shape n must be a positive integer".into()));
        }
        positive("gamma δ", delta)?;
        Ok(Self {
            kind: PriorKind::Gamma { n, delta },
        })
    }

    pub fn lognormal(s0: f64, r: f64, vol: f64, maturity: f64) -> Result<Self> {
        positive("lognormal S0", s0)?;
        positive("lognormal ν", vol)?;
        positive("lognormal T", maturity)?;
        if !r.is_finite() {
            return Err(Error::NonFinite("lognormal r".into()));
        }
        Ok(Self {
            kind: PriorKind::LogNormal { s0, r, vol, maturity },
        })
    }

    pub fn standard_normal() -> Self {
        Self {
            kind: PriorKind::StandardNormal,
        }
    }

    /// Piecewise-linear density through `(xs[i], densities[i])`, renormalized to unit mass.
    pub fn tabulated(xs: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != densities.len() {
            return Err(Error::InvalidParameter(
                "tabulated prior needs at least two (x, density) points".into(),
            ));
        }
        if xs.iter().chain(&densities).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tabulated prior entry".into()));
        }
        if xs[0] < 0.0 {
            return Err(Error::InvalidParameter("tabulated prior support must lie in [0, ∞)".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("tabulated x values must be strictly increasing".into()));
        }
        if densities.iter().any(|&f| f < 0.0) {
            return Err(Error::InvalidParameter("tabulated densities must be nonnegative".into()));
        }
        let mass: f64 = xs
            .windows(2)
            .zip(densities.windows(2))
            .map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1]))
            .sum();
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter("tabulated density has zero mass".into()));
        }
        let fs: Vec<f64> = densities.iter().map(|f| f / mass).collect();
        let mut cdf = Vec::with_capacity(xs.len());
        cdf.push(0.0);
        for i in 0..xs.len() - 1 {
            let c = cdf[i] + 0.5 * (xs[i + 1] - xs[i]) * (fs[i] + fs[i + 1]);
            cdf.push(c);
        }
        Ok(Self {
            kind: PriorKind::Tabulated(TabulatedDensity { xs, fs, cdf }),
        })
    }

    /// Loads a tabulated prior from a two-column CSV `(x, density)` with a header row.
    pub fn load_tabulated_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path.as_ref())?;
        let mut xs = Vec::new();
        let mut fs = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let parse = |i: usize| -> Result<f64> {
                record
                    .get(i)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::Io(format!("{}: bad value in data row {}, column {}", path.as_ref().display(), line + 1, i + 1)))
            };
            xs.push(parse(0)?);
            fs.push(parse(1)?);
        }
        Self::tabulated(xs, fs)
    }

    pub fn kind(&self) -> &PriorKind {
        &self.kind
    }

    pub fn atom_list(&self) -> Option<&[Atom]> {
        match &self.kind {
            PriorKind::DiscreteAtoms(a) => Some(a),
            _ => None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, PriorKind::DiscreteAtoms(_))
    }

    /// Point mass, if the prior is one.
    pub fn degenerate_value(&self) -> Option<f64> {
        match self.atom_list() {
            Some([a]) => Some(a.value),
            _ => None,
        }
    }

    pub fn support(&self) -> Support {
        match &self.kind {
            PriorKind::DiscreteAtoms(a) => Support {
                lower: a[0].value,
                upper: a[a.len() - 1].value,
            },
            PriorKind::StandardNormal => Support {
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
            },
            PriorKind::Tabulated(t) => Support {
                lower: t.xs[0],
                upper: *t.xs.last().unwrap(),
            },
            _ => Support {
                lower: 0.0,
                upper: f64::INFINITY,
            },
        }
    }

    /// Density `p(x)`; zero outside the support. Discrete priors have no density.
    pub fn density(&self, x: f64) -> Result<f64> {
        if matches!(self.kind, PriorKind::DiscreteAtoms(_)) {
            return Err(Error::InvalidParameter(
                "discrete prior has no density; use atom_list()".into(),
            ));
        }
        let l = self.log_density(x);
        Ok(if l == f64::NEG_INFINITY { 0.0 } else { l.exp() })
    }

    fn log_density(&self, x: f64) -> f64 {
        match &self.kind {
            PriorKind::DiscreteAtoms(_) => f64::NAN,
            PriorKind::Exponential { delta } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -x / delta - delta.ln()
                }
            }
            PriorKind::Gamma { n, delta } => {
                if x < 0.0 || (x == 0.0 && *n > 1) {
                    f64::NEG_INFINITY
                } else {
                    let nf = *n as f64;
                    let log_pow = if *n == 1 { 0.0 } else { (nf - 1.0) * x.ln() };
                    nf * delta.ln() - ln_gamma(nf) + log_pow - delta * x
                }
            }
            PriorKind::LogNormal { s0, r, vol, maturity } => {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    let (mu, s) = lognormal_params(*s0, *r, *vol, *maturity);
                    let z = (x.ln() - mu) / s;
                    -0.5 * z * z - x.ln() - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
                }
            }
            PriorKind::StandardNormal => -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln(),
            PriorKind::Tabulated(t) => {
                let d = t.density(x);
                if d > 0.0 {
                    d.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Distribution function `P(X ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match &self.kind {
            PriorKind::DiscreteAtoms(a) => a.iter().filter(|a| a.value <= x).map(|a| a.prob).sum(),
            PriorKind::Exponential { delta } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x / delta).exp_m1()
                }
            }
            PriorKind::Gamma { n, delta } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_dist(*n, *delta).cdf(x)
                }
            }
            PriorKind::LogNormal { s0, r, vol, maturity } => {
                if x <= 0.0 {
                    0.0
                } else {
                    let (mu, s) = lognormal_params(*s0, *r, *vol, *maturity);
                    ncdf((x.ln() - mu) / s)
                }
            }
            PriorKind::StandardNormal => ncdf(x),
            PriorKind::Tabulated(t) => t.cdf(x),
        }
    }

    /// Quantile function for `p ∈ (0, 1)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!("quantile level {p} outside (0, 1)")));
        }
        Ok(match &self.kind {
            PriorKind::DiscreteAtoms(a) => {
                let mut acc = 0.0;
                let mut out = a[a.len() - 1].value;
                for atom in a {
                    acc += atom.prob;
                    if acc >= p {
                        out = atom.value;
                        break;
                    }
                }
                out
            }
            PriorKind::Exponential { delta } => -delta * (-p).ln_1p(),
            PriorKind::Gamma { n, delta } => gamma_dist(*n, *delta).inverse_cdf(p),
            PriorKind::LogNormal { s0, r, vol, maturity } => {
                let (mu, s) = lognormal_params(*s0, *r, *vol, *maturity);
                (mu + s * std_normal().inverse_cdf(p)).exp()
            }
            PriorKind::StandardNormal => std_normal().inverse_cdf(p),
            PriorKind::Tabulated(t) => t.quantile(p),
        })
    }

    /// One draw from the prior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            PriorKind::DiscreteAtoms(a) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for atom in a {
                    acc += atom.prob;
                    if u < acc {
                        return atom.value;
                    }
                }
                a[a.len() - 1].value
            }
            PriorKind::Exponential { delta } => Exp::new(1.0 / delta).expect("validated rate").sample(rng),
            PriorKind::Gamma { n, delta } => Gamma::new(*n as f64, 1.0 / delta)
                .expect("validated gamma parameters")
                .sample(rng),
            PriorKind::LogNormal { s0, r, vol, maturity } => {
                let z: f64 = StandardNormal.sample(rng);
                s0 * (r * maturity + vol * maturity.sqrt() * z - 0.5 * vol * vol * maturity).exp()
            }
            PriorKind::StandardNormal => StandardNormal.sample(rng),
            PriorKind::Tabulated(t) => {
                let u: f64 = rng.random();
                t.quantile(u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
            }
        }
    }

    /// Mean, variance and third central moment.
    pub fn moments(&self) -> Moments {
        let closed = |mean: f64, variance: f64, third_central: f64| Moments {
            mean,
            variance,
            third_central,
            tail_warning: false,
        };
        match &self.kind {
            PriorKind::DiscreteAtoms(a) => {
                let mean: f64 = a.iter().map(|a| a.prob * a.value).sum();
                let variance = a.iter().map(|a| a.prob * (a.value - mean).powi(2)).sum();
                let third = a.iter().map(|a| a.prob * (a.value - mean).powi(3)).sum();
                closed(mean, variance, third)
            }
            PriorKind::Exponential { delta } => closed(*delta, delta * delta, 2.0 * delta.powi(3)),
            PriorKind::Gamma { n, delta } => {
                let nf = *n as f64;
                closed(nf / delta, nf / (delta * delta), 2.0 * nf / delta.powi(3))
            }
            PriorKind::LogNormal { s0, r, vol, maturity } => {
                let m = s0 * (r * maturity).exp();
                let e = (vol * vol * maturity).exp_m1();
                closed(m, m * m * e, m.powi(3) * e * e * (e + 3.0))
            }
            PriorKind::StandardNormal => closed(0.0, 1.0, 0.0),
            PriorKind::Tabulated(t) => {
                let rule = QuadratureRule::composite(&t.xs, 4).expect("validated grid");
                let mut m = [0.0f64; 4];
                for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
                    let f = w * t.density(x);
                    m[0] += f;
                    m[1] += f * x;
                    m[2] += f * x * x;
                    m[3] += f * x * x * x;
                }
                let mean = m[1] / m[0];
                let variance = m[2] / m[0] - mean * mean;
                let third = m[3] / m[0] - 3.0 * mean * m[2] / m[0] + 2.0 * mean.powi(3);
                let fmax = t.fs.iter().copied().fold(0.0, f64::max);
                Moments {
                    mean,
                    variance,
                    third_central: third,
                    tail_warning: *t.fs.last().unwrap() > 1e-3 * fmax,
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.moments().mean
    }

    /// Quadrature rule adapted to the prior (continuous kinds only).
    ///
    /// Semi-infinite kinds use Gauss–Legendre under `x = L·u/(1−u)` with `L` the
    /// `1 − 10⁻⁶` quantile; the standard normal mirrors that map on both half-lines;
    /// tabulated densities use composite Gauss–Legendre between their grid points.
    pub fn quadrature_rule(&self, n: usize) -> Result<QuadratureRule> {
        if n < 2 {
            return Err(Error::InvalidParameter("quadrature needs at least two nodes".into()));
        }
        match &self.kind {
            PriorKind::DiscreteAtoms(_) => Err(Error::InvalidParameter(
                "discrete priors are represented by their atoms, not a quadrature rule".into(),
            )),
            PriorKind::StandardNormal => QuadratureRule::real_line(self.quantile(1.0 - SCALE_TAIL)?, n / 2),
            PriorKind::Tabulated(t) => {
                let segments = t.xs.len() - 1;
                let per = (n / segments).clamp(4, 32);
                QuadratureRule::composite(&t.xs, per)
            }
            _ => QuadratureRule::semi_infinite(self.quantile(1.0 - SCALE_TAIL)?, n),
        }
    }

    /// Support points and log-masses used by the filter.
    pub fn discretize(&self, n: usize) -> Result<Discretization> {
        if let Some(atoms) = self.atom_list() {
            return Ok(Discretization {
                nodes: atoms.iter().map(|a| a.value).collect(),
                log_masses: atoms.iter().map(|a| a.prob.ln()).collect(),
            });
        }
        let rule = self.quadrature_rule(n)?;
        let log_masses = rule
            .nodes()
            .iter()
            .zip(rule.weights())
            .map(|(&x, &w)| w.ln() + self.log_density(x))
            .collect();
        Ok(Discretization {
            nodes: rule.nodes().to_vec(),
            log_masses,
        })
    }

    /// [`discretize`](Self::discretize) with the default node count.
    pub fn default_discretization(&self) -> Result<Discretization> {
        self.discretize(DEFAULT_NODES)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn lognormal_params(s0: f64, r: f64, vol: f64, maturity: f64) -> (f64, f64) {
    (
        s0.ln() + r * maturity - 0.5 * vol * vol * maturity,
        vol * maturity.sqrt(),
    )
}

fn gamma_dist(n: u32, delta: f64) -> GammaDist {
    GammaDist::new(n as f64, delta).expect("validated gamma parameters")
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}
