//! Deterministic market inputs: discount curves and information-flow schedules.

use crate::error::{Error, Result};
use std::path::Path;

/// Initial discount function `t ↦ P_{0t}`.
#[derive(Debug, Clone, PartialEq)]
pub enum DiscountCurve {
    /// `P_{0t} = e^{-rt}`.
    Flat { rate: f64 },
    /// Log-linear interpolation of `ln P_{0t}` between knots (flat forwards).
    Tabulated { times: Vec<f64>, log_discount: Vec<f64> },
}

impl DiscountCurve {
    pub fn flat(rate: f64) -> Result<Self> {
        if !rate.is_finite() || rate < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "flat rate must be finite and nonnegative, got {rate}"
            )));
        }
        Ok(DiscountCurve::Flat { rate })
    }

    /// Curve through `(t, P_{0t})` points. A `(0, 1)` knot is added when absent.
    pub fn tabulated(mut points: Vec<(f64, f64)>) -> Result<Self> {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.first().map(|p| p.0) != Some(0.0) {
            points.insert(0, (0.0, 1.0));
        }
        if points.len() < 2 {
            return Err(Error::InvalidParameter("discount curve needs a knot after t = 0".into()));
        }
        if points[0].1 != 1.0 {
            return Err(Error::InvalidParameter(format!("P(0,0) must be 1, got {}", points[0].1)));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidParameter("discount curve times must be strictly increasing".into()));
            }
            if !(w[1].1 > 0.0) || w[1].1 > w[0].1 {
                return Err(Error::InvalidParameter(format!(
                    "discount factors must be positive and nonincreasing (P({}) = {})",
                    w[1].0, w[1].1
                )));
            }
        }
        Ok(DiscountCurve::Tabulated {
            times: points.iter().map(|p| p.0).collect(),
            log_discount: points.iter().map(|p| p.1.ln()).collect(),
        })
    }

    /// Reads `(t, P_{0t})` rows from a CSV file with a header row.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let rows = read_numeric_csv(path.as_ref(), 2)?;
        Self::tabulated(rows.into_iter().map(|r| (r[0], r[1])).collect())
    }

    fn domain_end(&self) -> f64 {
        match self {
            DiscountCurve::Flat { .. } => f64::INFINITY,
            DiscountCurve::Tabulated { times, .. } => *times.last().unwrap(),
        }
    }

    fn check(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.domain_end()) {
            return Err(Error::TimeOutOfRange {
                t,
                lower: 0.0,
                upper: self.domain_end(),
            });
        }
        Ok(())
    }

    fn segment(times: &[f64], t: f64) -> usize {
        times.partition_point(|&k| k <= t).clamp(1, times.len() - 1) - 1
    }

    /// `P_{0t}`.
    pub fn p0(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(match self {
            DiscountCurve::Flat { rate } => (-rate * t).exp(),
            DiscountCurve::Tabulated { times, log_discount } => {
                let i = Self::segment(times, t);
                let s = (t - times[i]) / (times[i + 1] - times[i]);
                (log_discount[i] + s * (log_discount[i + 1] - log_discount[i])).exp()
            }
        })
    }

    /// `P_{tT} = P_{0T}/P_{0t}`.
    pub fn discount_factor(&self, t: f64, maturity: f64) -> Result<f64> {
        if t > maturity {
            return Err(Error::TimeOutOfRange {
                t,
                lower: 0.0,
                upper: maturity,
            });
        }
        if let DiscountCurve::Flat { rate } = self {
            self.check(t)?;
            return Ok((-rate * (maturity - t)).exp());
        }
        Ok(self.p0(maturity)? / self.p0(t)?)
    }

    /// `r_t = −d ln P_{0t}/dt`; the right derivative at knots.
    pub fn short_rate(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(match self {
            DiscountCurve::Flat { rate } => *rate,
            DiscountCurve::Tabulated { times, log_discount } => {
                let i = Self::segment(times, t);
                -(log_discount[i + 1] - log_discount[i]) / (times[i + 1] - times[i])
            }
        })
    }
}

/// A linear piece `σ(u)` of an information-flow schedule on `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub sigma_start: f64,
    pub sigma_end: f64,
}

impl Segment {
    fn sigma_at(&self, u: f64) -> f64 {
        if self.sigma_start == self.sigma_end {
            return self.sigma_start;
        }
        let s = (u - self.start) / (self.end - self.start);
        self.sigma_start + s * (self.sigma_end - self.sigma_start)
    }

    /// `∫_start^u σ` and `∫_start^u σ²`, exact for linear σ.
    fn partial_integrals(&self, u: f64) -> (f64, f64) {
        let h = u - self.start;
        let a = self.sigma_start;
        let b = self.sigma_at(u);
        (0.5 * h * (a + b), h * (a * a + a * b + b * b) / 3.0)
    }
}

/// Default maturity guard, as a fraction of the maturity.
pub const DEFAULT_EPS_FRACTION: f64 = 1e-9;

/// Deterministic information-flow rate `σ_t` on `[start, T]`.
///
/// The schedule is stored as exact linear segments, so `∫σ` and `∫σ²` carry no
/// quadrature error. Schedules produced by [`FlowSchedule::reinitialize`] start at
/// the re-initialisation time; all cumulative integrals run from `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSchedule {
    segments: Vec<Segment>,
    cum_sigma: Vec<f64>,
    cum_sigma_sq: Vec<f64>,
    eps_fraction: f64,
}

impl FlowSchedule {
    pub fn constant(sigma: f64, maturity: f64) -> Result<Self> {
        Self::from_segments(vec![Segment {
            start: 0.0,
            end: maturity,
            sigma_start: sigma,
            sigma_end: sigma,
        }])
    }

    /// `σ = values[i]` on `[breaks[i], breaks[i+1])`; `breaks` runs from 0 to the maturity.
    pub fn piecewise_constant(breaks: &[f64], values: &[f64]) -> Result<Self> {
        if breaks.len() != values.len() + 1 {
            return Err(Error::InvalidParameter(
                "piecewise-constant schedule needs one more break than values".into(),
            ));
        }
        Self::from_segments(
            breaks
                .windows(2)
                .zip(values)
                .map(|(b, &v)| Segment {
                    start: b[0],
                    end: b[1],
                    sigma_start: v,
                    sigma_end: v,
                })
                .collect(),
        )
    }

    /// Continuous piecewise-linear σ through `(breaks[i], values[i])`.
    pub fn piecewise_linear(breaks: &[f64], values: &[f64]) -> Result<Self> {
        if breaks.len() != values.len() || breaks.len() < 2 {
            return Err(Error::InvalidParameter(
                "piecewise-linear schedule needs matching breaks and values".into(),
            ));
        }
        Self::from_segments(
            breaks
                .windows(2)
                .zip(values.windows(2))
                .map(|(b, v)| Segment {
                    start: b[0],
                    end: b[1],
                    sigma_start: v[0],
                    sigma_end: v[1],
                })
                .collect(),
        )
    }

    /// Contiguous segments; the last segment's end is the maturity.
    pub fn from_segments(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidParameter("schedule needs at least one segment".into()));
        }
        if segments[0].start < 0.0 {
            return Err(Error::InvalidParameter("schedule cannot start before t = 0".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            if [s.start, s.end, s.sigma_start, s.sigma_end].iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("schedule segment {i}")));
            }
            if s.end <= s.start {
                return Err(Error::InvalidParameter(format!("schedule segment {i} has nonpositive length")));
            }
            if s.sigma_start < 0.0 || s.sigma_end < 0.0 {
                return Err(Error::InvalidParameter(format!("schedule segment {i} has negative σ")));
            }
            if i > 0 && (s.start - segments[i - 1].end).abs() > 1e-12 * s.end.max(1.0) {
                return Err(Error::InvalidParameter(format!("schedule segment {i} is not contiguous")));
            }
        }
        let mut cum_sigma = vec![0.0];
        let mut cum_sigma_sq = vec![0.0];
        for s in &segments {
            let (a, b) = s.partial_integrals(s.end);
            cum_sigma.push(cum_sigma.last().unwrap() + a);
            cum_sigma_sq.push(cum_sigma_sq.last().unwrap() + b);
        }
        Ok(Self {
            segments,
            cum_sigma,
            cum_sigma_sq,
            eps_fraction: DEFAULT_EPS_FRACTION,
        })
    }

    /// Reads segments from a CSV with a header row and rows `t_start,t_end,σ` or
    /// `t_start,t_end,σ_start,σ_end`.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let rows = read_numeric_csv(path.as_ref(), 3)?;
        let segments = rows
            .into_iter()
            .map(|r| Segment {
                start: r[0],
                end: r[1],
                sigma_start: r[2],
                sigma_end: *r.get(3).unwrap_or(&r[2]),
            })
            .collect();
        Self::from_segments(segments)
    }

    /// Same schedule with a different maturity guard `ε = eps_fraction · T`.
    pub fn with_eps_fraction(mut self, eps_fraction: f64) -> Result<Self> {
        if !(eps_fraction > 0.0 && eps_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!("eps fraction {eps_fraction} outside (0, 1)")));
        }
        self.eps_fraction = eps_fraction;
        Ok(self)
    }

    pub fn maturity(&self) -> f64 {
        self.segments.last().unwrap().end
    }

    pub fn start(&self) -> f64 {
        self.segments[0].start
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn eps(&self) -> f64 {
        self.eps_fraction * self.maturity()
    }

    /// Latest admissible evaluation time for singular quantities.
    pub fn last_regular_time(&self) -> f64 {
        self.maturity() - self.eps()
    }

    /// The constant rate, when the schedule is a single flat segment.
    pub fn constant_sigma(&self) -> Option<f64> {
        match self.segments.as_slice() {
            [s] if s.sigma_start == s.sigma_end => Some(s.sigma_start),
            _ => None,
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        self.segments.iter().all(|s| s.sigma_start == 0.0 && s.sigma_end == 0.0)
    }

    /// Interior segment boundaries.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments[1..].iter().map(|s| s.start).collect()
    }

    fn check_closed(&self, t: f64) -> Result<()> {
        if !(t >= self.start() && t <= self.maturity()) {
            return Err(Error::TimeOutOfRange {
                t,
                lower: self.start(),
                upper: self.maturity(),
            });
        }
        Ok(())
    }

    /// Rejects `t` outside `[start, T − ε]`.
    pub fn check_regular(&self, t: f64) -> Result<()> {
        if !(t >= self.start() && t <= self.last_regular_time()) {
            return Err(Error::TimeOutOfRange {
                t,
                lower: self.start(),
                upper: self.last_regular_time(),
            });
        }
        Ok(())
    }

    fn locate(&self, t: f64) -> usize {
        self.segments
            .partition_point(|s| s.end <= t)
            .min(self.segments.len() - 1)
    }

    /// `σ_t` (right-continuous at breakpoints).
    pub fn sigma(&self, t: f64) -> Result<f64> {
        self.check_closed(t)?;
        Ok(self.segments[self.locate(t)].sigma_at(t))
    }

    /// `Σ(t) = ∫_start^t σ_s ds`.
    pub fn cumulative_sigma(&self, t: f64) -> Result<f64> {
        self.check_closed(t)?;
        let i = self.locate(t);
        Ok(self.cum_sigma[i] + self.segments[i].partial_integrals(t).0)
    }

    /// `∫_start^t σ_s² ds`.
    pub fn cumulative_sigma_sq(&self, t: f64) -> Result<f64> {
        self.check_closed(t)?;
        let i = self.locate(t);
        Ok(self.cum_sigma_sq[i] + self.segments[i].partial_integrals(t).1)
    }

    /// `ν_t = σ_t + Σ(t)/(T − t)`.
    pub fn nu(&self, t: f64) -> Result<f64> {
        self.check_regular(t)?;
        Ok(self.sigma(t)? + self.cumulative_sigma(t)? / (self.maturity() - t))
    }

    /// `ω_t² = Σ(t)²/(T − t) + ∫σ²`, which equals `∫ν_s² ds`.
    pub fn omega_squared(&self, t: f64) -> Result<f64> {
        self.check_regular(t)?;
        let big = self.cumulative_sigma(t)?;
        Ok(big * big / (self.maturity() - t) + self.cumulative_sigma_sq(t)?)
    }

    /// Re-initialised schedule `σ̃_u = σ_u + Σ(at)/(T − at)` on `[at, T]`.
    pub fn reinitialize(&self, at: f64) -> Result<Self> {
        self.check_regular(at)?;
        let shift = self.cumulative_sigma(at)? / (self.maturity() - at);
        let first = self.locate(at);
        let mut segments: Vec<Segment> = self.segments[first..]
            .iter()
            .map(|s| Segment {
                sigma_start: s.sigma_start + shift,
                sigma_end: s.sigma_end + shift,
                ..*s
            })
            .collect();
        let head = &mut segments[0];
        head.sigma_start = self.segments[first].sigma_at(at) + shift;
        head.start = at;
        if head.end <= head.start {
            segments.remove(0);
        }
        let mut out = Self::from_segments(segments)?;
        out.eps_fraction = self.eps_fraction;
        Ok(out)
    }
}

fn read_numeric_csv(path: &Path, min_cols: usize) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row: Option<Vec<f64>> = record.iter().map(|s| s.parse::<f64>().ok()).collect();
        match row {
            Some(r) if r.len() >= min_cols => rows.push(r),
            _ => {
                return Err(Error::Io(format!(
                    "{}: data row {} needs {} numeric columns",
                    path.display(),
                    line + 1,
                    min_cols
                )))
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::QuadratureRule;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn piecewise() -> FlowSchedule {
        FlowSchedule::piecewise_constant(&[0.0, 1.0, 2.0], &[1.0, 2.0]).unwrap()
    }

    /// Composite Gauss–Legendre over the schedule's segments restricted to `[a, b]`.
    fn integrate_on_segments(s: &FlowSchedule, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let mut breaks = vec![a];
        breaks.extend(s.breakpoints().into_iter().filter(|&x| x > a && x < b));
        breaks.push(b);
        let rule = QuadratureRule::composite(&breaks, 40).unwrap();
        rule.nodes().iter().zip(rule.weights()).map(|(&x, &w)| w * f(x)).sum()
    }

    #[test]
    fn discount_examples() {
        let zero = DiscountCurve::flat(0.0).unwrap();
        assert_eq!(zero.discount_factor(0.3, 2.0).unwrap(), 1.0);
        let c = DiscountCurve::flat(0.05).unwrap();
        assert_abs_diff_eq!(c.discount_factor(0.5, 2.0).unwrap(), (-0.075f64).exp(), epsilon = 1e-15);
        assert_eq!(c.discount_factor(1.0, 1.0).unwrap(), 1.0);
        assert!(c.discount_factor(2.0, 1.0).is_err());
        assert_eq!(c.short_rate(0.7).unwrap(), 0.05);
        assert_eq!(zero.short_rate(0.7).unwrap(), 0.0);
    }

    #[test]
    fn tabulated_short_rate_matches_finite_difference() {
        let pts: Vec<(f64, f64)> = (0..=10).map(|i| (i as f64 * 0.5, (-0.03 * i as f64 * 0.5).exp())).collect();
        let c = DiscountCurve::tabulated(pts).unwrap();
        for t in [0.0, 0.25, 1.0, 3.3, 4.9] {
            let h = 1e-4;
            let fd = -((c.p0(t + h).unwrap()).ln() - (c.p0(t).unwrap()).ln()) / h;
            assert_abs_diff_eq!(c.short_rate(t).unwrap(), 0.03, epsilon = 1e-10);
            assert_abs_diff_eq!(fd, 0.03, epsilon = 1e-10);
        }
        assert!(c.short_rate(5.5).is_err());
        assert!(DiscountCurve::tabulated(vec![(1.0, 0.9), (2.0, 0.95)]).is_err());
    }

    #[test]
    fn curve_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("curve.csv");
        std::fs::write(&p, "t,P\n0,1\n1,0.97\n2,0.94\n").unwrap();
        let c = DiscountCurve::load_csv(&p).unwrap();
        assert_abs_diff_eq!(c.p0(1.0).unwrap(), 0.97, epsilon = 1e-15);
        let s = dir.path().join("sched.csv");
        std::fs::write(&s, "t_start,t_end,sigma\n0,1,1\n1,2,2\n").unwrap();
        let sched = FlowSchedule::load_csv(&s).unwrap();
        assert_eq!(sched, piecewise());
        std::fs::write(&s, "t_start,t_end,s0,s1\n0,1,1,2\n1,2,2,0.5\n").unwrap();
        let lin = FlowSchedule::load_csv(&s).unwrap();
        assert_abs_diff_eq!(lin.sigma(1.5).unwrap(), 1.25, epsilon = 1e-15);
    }

    #[test]
    fn cumulative_sigma_examples() {
        let c = FlowSchedule::constant(0.7, 2.0).unwrap();
        assert_abs_diff_eq!(c.cumulative_sigma(1.2).unwrap(), 0.84, epsilon = 1e-15);
        assert_eq!(c.cumulative_sigma(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(piecewise().cumulative_sigma(1.5).unwrap(), 2.0, epsilon = 1e-15);
        let lin = FlowSchedule::piecewise_linear(&[0.0, 2.0], &[0.0, 2.0]).unwrap();
        assert_abs_diff_eq!(lin.cumulative_sigma(1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(lin.cumulative_sigma_sq(1.0).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn nu_and_omega_examples() {
        let (sigma, t_mat) = (0.8, 2.0);
        let c = FlowSchedule::constant(sigma, t_mat).unwrap();
        for t in [0.0, 0.5, 1.9] {
            assert_abs_diff_eq!(c.nu(t).unwrap(), sigma * t_mat / (t_mat - t), epsilon = 1e-14);
            let tau = t * t_mat / (t_mat - t);
            assert_abs_diff_eq!(c.omega_squared(t).unwrap(), sigma * sigma * tau, epsilon = 1e-13);
        }
        assert_eq!(c.nu(0.0).unwrap(), sigma);
        assert_eq!(c.omega_squared(0.0).unwrap(), 0.0);
        assert!(c.nu(2.0).is_err());
        assert!(c.omega_squared(2.0).is_err());
        let z = FlowSchedule::constant(0.0, 1.0).unwrap();
        assert_eq!(z.nu(0.4).unwrap(), 0.0);
    }

    #[test]
    fn omega_squared_equals_integral_of_nu_squared() {
        for s in [piecewise(), FlowSchedule::piecewise_linear(&[0.0, 0.7, 2.0], &[0.2, 1.5, 0.4]).unwrap()] {
            for t in [0.3, 1.0, 1.6] {
                let num = integrate_on_segments(&s, 0.0, t, |u| s.nu(u).unwrap().powi(2));
                assert_abs_diff_eq!(num, s.omega_squared(t).unwrap(), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn nu_over_time_to_maturity_identity() {
        let s = FlowSchedule::piecewise_linear(&[0.0, 0.5, 2.0], &[1.0, 0.3, 2.0]).unwrap();
        for t in [0.2, 0.9, 1.8] {
            let lhs = integrate_on_segments(&s, 0.0, t, |u| s.nu(u).unwrap() / (2.0 - u));
            let rhs = s.cumulative_sigma(t).unwrap() / (2.0 - t);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-8);
        }
    }

    #[test]
    fn nu_blows_up_near_maturity() {
        let s = piecewise();
        assert!(s.nu(2.0 - 1e-6).unwrap() > 1e6);
    }

    #[test]
    fn reinitialize_examples() {
        let s = piecewise();
        assert_eq!(s.reinitialize(0.0).unwrap(), s);
        let c = FlowSchedule::constant(0.5, 2.0).unwrap();
        let r = c.reinitialize(0.8).unwrap();
        assert_abs_diff_eq!(r.sigma(1.0).unwrap(), 0.5 + 0.5 * 0.8 / 1.2, epsilon = 1e-15);
        assert_eq!(r.start(), 0.8);
        let z = FlowSchedule::constant(0.0, 1.0).unwrap().reinitialize(0.3).unwrap();
        assert!(z.is_identically_zero());
        assert!(c.reinitialize(2.0).is_err());
    }

    proptest! {
        #[test]
        fn reinitialize_tower(s1 in 0.0f64..0.9, gap in 0.0f64..0.9, t_frac in 0.0f64..1.0) {
            let sched = FlowSchedule::piecewise_linear(&[0.0, 0.4, 1.1, 2.0], &[0.3, 1.2, 0.8, 1.6]).unwrap();
            let s2 = s1 + gap;
            let once = sched.reinitialize(s2).unwrap();
            let twice = sched.reinitialize(s1).unwrap().reinitialize(s2).unwrap();
            let t = s2 + t_frac * (1.99 - s2);
            prop_assert!((once.sigma(t).unwrap() - twice.sigma(t).unwrap()).abs() <= 1e-12);
            prop_assert!((once.cumulative_sigma(t).unwrap() - twice.cumulative_sigma(t).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn omega_squared_nondecreasing(a in 0.0f64..1.9, b in 0.0f64..1.9) {
            let s = piecewise();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(s.omega_squared(hi).unwrap() >= s.omega_squared(lo).unwrap());
        }
    }
}
