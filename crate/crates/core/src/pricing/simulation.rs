//! Joint simulation of factor information processes and the asset prices they drive.

use super::{volatility_vector, Asset, FactorSet, FactorState};
use crate::error::{Error, Result};
use crate::market::DiscountCurve;
use crate::numerics::TimeGrid;
use crate::stochastic::{ensemble, filter_path, reconstruct_innovation, simulate_information_path, RngStream};
use std::collections::HashMap;

/// Factors, assets and discounting of one scenario.
#[derive(Debug, Clone)]
pub struct Market {
    pub factors: FactorSet,
    pub assets: Vec<Asset>,
    pub curve: DiscountCurve,
}

impl Market {
    pub fn new(factors: FactorSet, assets: Vec<Asset>, curve: DiscountCurve) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for a in &assets {
            factors.validate(a)?;
            if !seen.insert(a.id().to_string()) {
                return Err(Error::InvalidParameter(format!("duplicate asset id `{}`", a.id())));
            }
        }
        Ok(Self { factors, assets, curve })
    }

    /// Uniform grid on `[0, horizon]` refined with schedule breakpoints and factor maturities.
    pub fn grid(&self, horizon: f64, steps: usize) -> Result<TimeGrid> {
        let mut extra = Vec::new();
        for f in self.factors.factors() {
            extra.extend(f.schedule().breakpoints());
            extra.push(f.maturity());
        }
        for a in &self.assets {
            extra.extend(a.flows().iter().map(|f| f.pay_date));
        }
        TimeGrid::uniform_with_breakpoints(horizon, steps, &extra)
    }
}

/// One simulated scenario path. Outer indices follow the market's factor and asset order.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub factor_values: Vec<f64>,
    /// `ξ_t`; after a factor's maturity it stays at its terminal value `X·Σ(T)`.
    pub xi: Vec<Vec<f64>>,
    pub conditional_means: Vec<Vec<f64>>,
    pub conditional_variances: Vec<Vec<f64>>,
    /// Innovation `W_t`, frozen once the factor is revealed.
    pub innovations: Vec<Vec<f64>>,
    pub prices: Vec<Vec<f64>>,
    /// `Γ^α_t` per asset, node and factor.
    pub gammas: Vec<Vec<Vec<f64>>>,
    /// `Σ_{T_k ≤ t} P_{0T_k} D_{T_k}`, the discounted dividends paid so far.
    pub paid: Vec<Vec<f64>>,
}

impl PathSample {
    /// `P_{0t} S_t` plus discounted dividends paid, per node.
    pub fn discounted_total_value(&self, market: &Market, grid: &TimeGrid, asset: usize) -> Result<Vec<f64>> {
        grid.nodes()
            .iter()
            .enumerate()
            .map(|(i, &t)| Ok(market.curve.p0(t)? * self.prices[asset][i] + self.paid[asset][i]))
            .collect()
    }
}

pub fn simulate_market_path(market: &Market, grid: &TimeGrid, rng: &mut RngStream) -> Result<PathSample> {
    let factors = market.factors.factors();
    let nodes = grid.nodes();
    let n = nodes.len();
    let mut factor_values = Vec::with_capacity(factors.len());
    let mut xi = Vec::with_capacity(factors.len());
    let mut means = Vec::with_capacity(factors.len());
    let mut variances = Vec::with_capacity(factors.len());
    let mut innovations = Vec::with_capacity(factors.len());
    let mut states: Vec<Vec<FactorState>> = Vec::with_capacity(factors.len());

    for f in factors {
        let schedule = f.schedule();
        let live_grid = grid.truncated(schedule.last_regular_time());
        let path = simulate_information_path(f.prior(), schedule, &live_grid, rng)?;
        let densities = filter_path(f.base(), &path)?;
        let info = path.information()?;
        let x = path.factor_value;
        let terminal_xi = x * schedule.cumulative_sigma(schedule.maturity())?;
        let mut m: Vec<f64> = densities.iter().map(|d| d.mean()).collect();
        let mut v: Vec<f64> = densities.iter().map(|d| d.variance()).collect();
        let mut w = reconstruct_innovation(&path, &m)?;
        let mut s: Vec<FactorState> = info.into_iter().map(FactorState::Live).collect();
        let mut p = path.xi.clone();
        let frozen = *w.last().unwrap();
        m.resize(n, x);
        v.resize(n, 0.0);
        w.resize(n, frozen);
        s.resize(n, FactorState::Revealed(x));
        p.resize(n, terminal_xi);
        factor_values.push(x);
        xi.push(p);
        means.push(m);
        variances.push(v);
        innovations.push(w);
        states.push(s);
    }

    let mut prices = Vec::with_capacity(market.assets.len());
    let mut gammas = Vec::with_capacity(market.assets.len());
    let mut paid = Vec::with_capacity(market.assets.len());
    for asset in &market.assets {
        let mut price_row = Vec::with_capacity(n);
        let mut gamma_row = Vec::with_capacity(n);
        let mut paid_row = Vec::with_capacity(n);
        let mut cash = 0.0;
        let mut next_flow = 0;
        for (i, &t) in nodes.iter().enumerate() {
            let node_states: HashMap<String, FactorState> = factors
                .iter()
                .zip(&states)
                .map(|(f, s)| (f.id().to_string(), s[i]))
                .collect();
            while next_flow < asset.flows().len() && asset.flows()[next_flow].pay_date <= t {
                let flow = &asset.flows()[next_flow];
                let value = flow.payoff.eval(|id| {
                    let k = factors.iter().position(|f| f.id() == id).expect("validated factor id");
                    factor_values[k]
                });
                cash += market.curve.p0(flow.pay_date)? * value;
                next_flow += 1;
            }
            let val = volatility_vector(asset, &market.factors, &market.curve, t, &node_states)?;
            let g: Vec<f64> = factors
                .iter()
                .map(|f| val.gamma.iter().find(|(id, _)| id == f.id()).map_or(0.0, |(_, g)| *g))
                .collect();
            price_row.push(val.price);
            gamma_row.push(g);
            paid_row.push(cash);
        }
        prices.push(price_row);
        gammas.push(gamma_row);
        paid.push(paid_row);
    }

    Ok(PathSample {
        factor_values,
        xi,
        conditional_means: means,
        conditional_variances: variances,
        innovations,
        prices,
        gammas,
        paid,
    })
}

/// `n_paths` independent paths; path `i` uses stream `i` of `seed`.
pub fn simulate_market(market: &Market, grid: &TimeGrid, seed: u64, n_paths: usize) -> Result<Vec<PathSample>> {
    ensemble(seed, n_paths, |_, mut rng| simulate_market_path(market, grid, &mut rng))
}

/// Per-step residuals `ΔS − r S Δt − Σ_α Γ^α ΔW^α` of one asset, over steps with no payment.
pub fn dynamics_residuals(market: &Market, grid: &TimeGrid, sample: &PathSample, asset: usize) -> Result<Vec<f64>> {
    let nodes = grid.nodes();
    let flows = market.assets[asset].flows();
    let mut out = Vec::new();
    for i in 0..nodes.len() - 1 {
        let (t0, t1) = (nodes[i], nodes[i + 1]);
        if flows.iter().any(|f| f.pay_date > t0 && f.pay_date <= t1) || t0 >= flows.last().unwrap().pay_date {
            continue;
        }
        let s = &sample.prices[asset];
        let r = market.curve.short_rate(t0)?;
        let mut res = s[i + 1] - s[i] - r * s[i] * (t1 - t0);
        for (k, w) in sample.innovations.iter().enumerate() {
            res -= sample.gammas[asset][i][k] * (w[i + 1] - w[i]);
        }
        out.push(res);
    }
    Ok(out)
}
