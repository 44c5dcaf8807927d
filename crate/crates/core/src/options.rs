//! European calls on a single-flow asset.
//!
//! At expiry `t` the conditional density depends on the information only through
//! `a_t = Σ(t)ξ_t/(T−t) + ∫σ dξ`, which is `ω_t Y` with `Y` standard normal under the
//! bridge measure. The call is in the money iff `Y` exceeds the critical value `y*`.

use crate::error::{Error, Result};
use crate::filter::{ConditionalDensity, InformationState};
use crate::market::{DiscountCurve, FlowSchedule};
use crate::numerics::{find_root_increasing, logsumexp_weights, ncdf, stats, RootOptions, TimeGrid, DEFAULT_NODES};
use crate::priors::PriorDistribution;
use crate::stochastic::{ensemble, simulate_information_path};

/// Where the payoff integrand changes sign, if it does.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalValue {
    Root(f64),
    /// `S_t > K` on every path.
    AlwaysIn,
    /// `S_t ≤ K` on every path.
    AlwaysOut,
}

impl CriticalValue {
    pub fn root(self) -> Option<f64> {
        match self {
            CriticalValue::Root(y) => Some(y),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CallSpec {
    pub strike: f64,
    pub expiry: f64,
    pub prior: PriorDistribution,
    pub schedule: FlowSchedule,
    pub curve: DiscountCurve,
    base: ConditionalDensity,
}

impl CallSpec {
    pub fn new(
        strike: f64,
        expiry: f64,
        prior: PriorDistribution,
        schedule: FlowSchedule,
        curve: DiscountCurve,
    ) -> Result<Self> {
        Self::with_nodes(strike, expiry, prior, schedule, curve, DEFAULT_NODES)
    }

    pub fn with_nodes(
        strike: f64,
        expiry: f64,
        prior: PriorDistribution,
        schedule: FlowSchedule,
        curve: DiscountCurve,
        nodes: usize,
    ) -> Result<Self> {
        if !(strike >= 0.0 && strike.is_finite()) {
            return Err(Error::InvalidParameter(format!("strike must be nonnegative, got {strike}")));
        }
        if !(expiry > 0.0) {
            return Err(Error::InvalidParameter(format!("expiry must be positive, got {expiry}")));
        }
        if schedule.start() != 0.0 {
            return Err(Error::InvalidParameter("option schedules must start at 0".into()));
        }
        schedule.check_regular(expiry)?;
        let base = ConditionalDensity::from_prior(&prior, nodes)?;
        Ok(Self {
            strike,
            expiry,
            prior,
            schedule,
            curve,
            base,
        })
    }

    pub fn maturity(&self) -> f64 {
        self.schedule.maturity()
    }

    /// `ω_t = (Σ(t)²/(T−t) + ∫₀^t σ² ds)^{1/2}`.
    pub fn omega(&self) -> Result<f64> {
        Ok(self.schedule.omega_squared(self.expiry)?.sqrt())
    }

    fn p_t_maturity(&self) -> Result<f64> {
        self.curve.discount_factor(self.expiry, self.maturity())
    }

    /// `P_{0T}·E[X] − P_{0t}K`.
    pub fn forward_value(&self) -> Result<f64> {
        Ok(self.curve.p0(self.maturity())? * self.base.mean() - self.curve.p0(self.expiry)? * self.strike)
    }

    /// `P_{tT}·E^y[X] − K` under the prior tilted by `e^{x·ay − ½x²b}`.
    fn critical_function(&self, a: f64, b: f64, p: f64) -> impl Fn(f64) -> f64 + '_ {
        move |y| {
            let logs: Vec<f64> = self
                .base
                .nodes()
                .iter()
                .zip(self.base.log_weights())
                .map(|(&x, &l)| l + x * a * y - 0.5 * x * x * b)
                .collect();
            match logsumexp_weights(&logs) {
                Ok((_, w)) => p * self.base.nodes().iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() - self.strike,
                Err(_) => f64::NAN,
            }
        }
    }

    fn solve(&self, a: f64, b: f64) -> Result<CriticalValue> {
        let p = self.p_t_maturity()?;
        if a == 0.0 {
            let g = p * self.base.mean() - self.strike;
            return Ok(if g > 0.0 { CriticalValue::AlwaysIn } else { CriticalValue::AlwaysOut });
        }
        let g = self.critical_function(a, b, p);
        let scale = self.strike.max(p * self.base.mean().abs()).max(f64::MIN_POSITIVE);
        match find_root_increasing(&g, 0.0, RootOptions::default()) {
            Ok(y) if g(y).abs() <= 1e-8 * scale => Ok(CriticalValue::Root(y)),
            Ok(y) => dense_scan(&g, y).map(CriticalValue::Root),
            Err(Error::NoSignChange { positive: true }) => Ok(CriticalValue::AlwaysIn),
            Err(Error::NoSignChange { positive: false }) => Ok(CriticalValue::AlwaysOut),
            Err(e) => Err(e),
        }
    }

    /// Critical value `y*` of the standardized information `a_t/ω_t`.
    pub fn critical_value(&self) -> Result<CriticalValue> {
        let omega = self.omega()?;
        self.solve(omega, omega * omega)
    }

    /// Critical value `ξ*` of the information process itself (constant rate only).
    pub fn critical_xi(&self) -> Result<CriticalValue> {
        let sigma = self.constant_sigma()?;
        let (t, maturity) = (self.expiry, self.maturity());
        let k = maturity / (maturity - t);
        self.solve(k * sigma, k * sigma * sigma * t)
    }

    fn constant_sigma(&self) -> Result<f64> {
        self.schedule
            .constant_sigma()
            .ok_or_else(|| Error::InvalidParameter("the ξ* representation needs a constant information rate".into()))
    }

    /// `C₀ = P_{0t} ∫(P_{tT}x − K) p(x) N(ω_t x − y*) dx`.
    pub fn call_price_general(&self) -> Result<f64> {
        let omega = self.omega()?;
        let p0t = self.curve.p0(self.expiry)?;
        let p = self.p_t_maturity()?;
        match self.critical_value()? {
            CriticalValue::AlwaysIn => self.forward_value(),
            CriticalValue::AlwaysOut => Ok(0.0),
            CriticalValue::Root(y) => Ok(p0t * self.base.expectation(|x| (p * x - self.strike) * ncdf(omega * x - y))),
        }
    }

    /// `C₀ = P_{0T}∫x p(x) N(σx√τ − z*) dx − P_{0t}K∫p(x) N(σx√τ − z*) dx`,
    /// `τ = tT/(T−t)`, `z* = ξ*(T/(t(T−t)))^{1/2}`.
    pub fn call_price_constant(&self) -> Result<f64> {
        let sigma = self.constant_sigma()?;
        let (t, maturity) = (self.expiry, self.maturity());
        let tau = t * maturity / (maturity - t);
        match self.critical_xi()? {
            CriticalValue::AlwaysIn => self.forward_value(),
            CriticalValue::AlwaysOut => Ok(0.0),
            CriticalValue::Root(xi) => {
                let z = xi * (maturity / (t * (maturity - t))).sqrt();
                let s = sigma * tau.sqrt();
                let p0 = self.curve.p0(maturity)?;
                let p0t = self.curve.p0(t)?;
                let first = self.base.expectation(|x| x * ncdf(s * x - z));
                let second = self.base.expectation(|x| ncdf(s * x - z));
                Ok(p0 * first - p0t * self.strike * second)
            }
        }
    }

    /// Analytic call price: the `ξ*` form for a constant rate, the `y*` form otherwise.
    pub fn call_price_analytic(&self) -> Result<f64> {
        if self.schedule.constant_sigma().is_some() {
            self.call_price_constant()
        } else {
            self.call_price_general()
        }
    }

    /// Put with the same strike and expiry, from put-call parity.
    pub fn put_price_analytic(&self) -> Result<f64> {
        Ok(self.call_price_analytic()? - self.forward_value()?)
    }

    /// Monte Carlo estimate and standard error of `P_{0t}(S_t − K)⁺`.
    pub fn call_price_mc(&self, n_paths: usize, seed: u64) -> Result<(f64, f64)> {
        if n_paths < 2 {
            return Err(Error::InvalidParameter("Monte Carlo needs at least two paths".into()));
        }
        let t = self.expiry;
        let piecewise_flat = self.schedule.segments().iter().all(|s| s.sigma_start == s.sigma_end);
        let grid = if piecewise_flat {
            // left-endpoint Itô sums are exact when every jump of σ is a node
            TimeGrid::new(vec![0.0, t])?.with_nodes(&self.schedule.breakpoints()).truncated(t)
        } else {
            TimeGrid::uniform_with_breakpoints(t, 512, &self.schedule.breakpoints())?.truncated(t)
        };
        let p0t = self.curve.p0(t)?;
        let p = self.p_t_maturity()?;
        let payoffs = ensemble(seed, n_paths, |_, mut rng| {
            let path = simulate_information_path(&self.prior, &self.schedule, &grid, &mut rng)?;
            let info = *path.information()?.last().unwrap();
            let cd = crate::filter::condition_from(&self.base, &self.schedule, t, InformationState::new(info.xi, info.stieltjes))?;
            Ok(p0t * (p * cd.mean() - self.strike).max(0.0))
        })?;
        Ok(stats::mean_se(&payoffs))
    }
}

/// Locates a sign change of `g` on a dense grid around `centre`, then bisects.
fn dense_scan<G: Fn(f64) -> f64>(g: &G, centre: f64) -> Result<f64> {
    let half_width = centre.abs().max(1.0) * 20.0;
    let n = 4000;
    let mut prev_y = centre - half_width;
    let mut prev = g(prev_y);
    for i in 1..=n {
        let y = centre - half_width + 2.0 * half_width * i as f64 / n as f64;
        let v = g(y);
        if prev <= 0.0 && v >= 0.0 {
            let (mut lo, mut hi) = (prev_y, y);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(0.5 * (lo + hi));
        }
        prev_y = y;
        prev = v;
    }
    Err(Error::NoSignChange { positive: prev > 0.0 })
}
