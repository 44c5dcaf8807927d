//! Asset prices from conditional densities: single flows, multi-flow assets over
//! X-factors, and the volatility vector.

mod closed_form;
pub mod payoff;
mod simulation;

pub use closed_form::{closed_form_exponential, closed_form_gamma, f_k, price_gbm_factor, MIN_PRECISION};
pub use payoff::{expectation, Expr};
pub use simulation::{dynamics_residuals, simulate_market, simulate_market_path, Market, PathSample};

use crate::error::{Error, Result};
use crate::filter::{condition_from, ConditionalDensity, InformationState};
use crate::market::{DiscountCurve, FlowSchedule};
use crate::numerics::DEFAULT_NODES;
use crate::priors::PriorDistribution;
use std::collections::HashMap;

/// Default cap on non-degenerate factors in one tensor-product expectation.
pub const DEFAULT_TENSOR_LIMIT: usize = 3;

/// `S_t = 1{t<T} P_{tT} E_t[D_T]` for one flow.
pub fn price_single(
    prior: &PriorDistribution,
    schedule: &FlowSchedule,
    curve: &DiscountCurve,
    t: f64,
    info: InformationState,
) -> Result<f64> {
    if t >= schedule.maturity() {
        return Ok(0.0);
    }
    let base = ConditionalDensity::from_prior(prior, DEFAULT_NODES)?;
    price_single_on(&base, schedule, curve, t, info)
}

/// [`price_single`] reusing a prebuilt base density.
pub fn price_single_on(
    base: &ConditionalDensity,
    schedule: &FlowSchedule,
    curve: &DiscountCurve,
    t: f64,
    info: InformationState,
) -> Result<f64> {
    let maturity = schedule.maturity();
    if t >= maturity {
        return Ok(0.0);
    }
    let cd = condition_from(base, schedule, t, info)?;
    Ok(curve.discount_factor(t, maturity)? * cd.mean())
}

/// A market factor `X^α` revealed at its maturity.
#[derive(Debug, Clone)]
pub struct XFactor {
    id: String,
    prior: PriorDistribution,
    schedule: FlowSchedule,
    base: ConditionalDensity,
}

impl XFactor {
    pub fn new(id: impl Into<String>, prior: PriorDistribution, schedule: FlowSchedule, nodes: usize) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::InvalidParameter("factor id must be nonempty".into()));
        }
        if schedule.start() != 0.0 {
            return Err(Error::InvalidParameter(format!("schedule of factor `{id}` must start at 0")));
        }
        let base = ConditionalDensity::from_prior(&prior, nodes)?;
        Ok(Self {
            id,
            prior,
            schedule,
            base,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn maturity(&self) -> f64 {
        self.schedule.maturity()
    }

    pub fn prior(&self) -> &PriorDistribution {
        &self.prior
    }

    pub fn schedule(&self) -> &FlowSchedule {
        &self.schedule
    }

    pub fn base(&self) -> &ConditionalDensity {
        &self.base
    }

    /// `π_t` for this factor given its state.
    pub fn density(&self, t: f64, state: FactorState) -> Result<ConditionalDensity> {
        match state {
            FactorState::Revealed(x) => Ok(ConditionalDensity::degenerate(t, x)),
            FactorState::Live(info) => {
                if t >= self.maturity() {
                    return Err(Error::MissingFactorState(format!(
                        "factor `{}` matures at {} and needs its revealed value at t = {t}",
                        self.id,
                        self.maturity()
                    )));
                }
                condition_from(&self.base, &self.schedule, t, info)
            }
        }
    }
}

/// What is known about a factor at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorState {
    Live(InformationState),
    Revealed(f64),
}

#[derive(Debug, Clone)]
pub struct CashFlow {
    pub pay_date: f64,
    pub payoff: Expr,
}

impl CashFlow {
    pub fn new(pay_date: f64, payoff: &str) -> Result<Self> {
        Ok(Self {
            pay_date,
            payoff: Expr::parse(payoff)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Asset {
    id: String,
    flows: Vec<CashFlow>,
}

impl Asset {
    pub fn new(id: impl Into<String>, flows: Vec<CashFlow>) -> Result<Self> {
        let id = id.into();
        if flows.is_empty() {
            return Err(Error::InvalidParameter(format!("asset `{id}` has no cash flows")));
        }
        if flows.windows(2).any(|w| w[1].pay_date <= w[0].pay_date) {
            return Err(Error::InvalidParameter(format!("pay dates of asset `{id}` must be strictly increasing")));
        }
        Ok(Self { id, flows })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn flows(&self) -> &[CashFlow] {
        &self.flows
    }
}

/// The X-factors of a market, indexed by id.
#[derive(Debug, Clone, Default)]
pub struct FactorSet {
    factors: Vec<XFactor>,
    index: HashMap<String, usize>,
    tensor_limit: usize,
}

impl FactorSet {
    pub fn new(factors: Vec<XFactor>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, f) in factors.iter().enumerate() {
            if index.insert(f.id.clone(), i).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate factor id `{}`", f.id)));
            }
        }
        Ok(Self {
            factors,
            index,
            tensor_limit: DEFAULT_TENSOR_LIMIT,
        })
    }

    pub fn with_tensor_limit(mut self, limit: usize) -> Self {
        self.tensor_limit = limit;
        self
    }

    pub fn get(&self, id: &str) -> Result<&XFactor> {
        self.index
            .get(id)
            .map(|&i| &self.factors[i])
            .ok_or_else(|| Error::UnknownFactor(id.to_string()))
    }

    pub fn factors(&self) -> &[XFactor] {
        &self.factors
    }

    /// Checks that every payoff refers to known factors revealed no later than its pay date.
    pub fn validate(&self, asset: &Asset) -> Result<()> {
        for flow in &asset.flows {
            for id in flow.payoff.factors() {
                let f = self.get(&id)?;
                if f.maturity() > flow.pay_date * (1.0 + 1e-12) {
                    return Err(Error::InvalidParameter(format!(
                        "flow of asset `{}` paid at {} depends on factor `{id}` maturing at {}",
                        asset.id,
                        flow.pay_date,
                        f.maturity()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Conditional densities at `t` of every factor the asset's live flows depend on.
    pub fn densities(
        &self,
        asset: &Asset,
        t: f64,
        states: &HashMap<String, FactorState>,
    ) -> Result<HashMap<String, ConditionalDensity>> {
        self.validate(asset)?;
        let mut out = HashMap::new();
        for flow in asset.flows.iter().filter(|f| t < f.pay_date) {
            for id in flow.payoff.factors() {
                if out.contains_key(&id) {
                    continue;
                }
                let state = states.get(&id).ok_or_else(|| Error::MissingFactorState(id.clone()))?;
                let d = self.get(&id)?.density(t, *state)?;
                out.insert(id, d);
            }
        }
        Ok(out)
    }
}

/// Price and volatility components of one asset at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Valuation {
    pub price: f64,
    /// `Γ^α_t` per factor id, in sorted id order.
    pub gamma: Vec<(String, f64)>,
}

impl Valuation {
    /// `Γ_t = (Σ_α (Γ^α_t)²)^{1/2}`.
    pub fn total_volatility(&self) -> f64 {
        self.gamma.iter().map(|(_, g)| g * g).sum::<f64>().sqrt()
    }
}

/// `S_t = Σ_k 1{t<T_k} P_{tT_k} E_t[Δ_{T_k}]` (ex-dividend at each pay date).
pub fn price_asset(
    asset: &Asset,
    factors: &FactorSet,
    curve: &DiscountCurve,
    t: f64,
    states: &HashMap<String, FactorState>,
) -> Result<f64> {
    let densities = factors.densities(asset, t, states)?;
    price_with(asset, factors, curve, t, &densities)
}

fn price_with(
    asset: &Asset,
    factors: &FactorSet,
    curve: &DiscountCurve,
    t: f64,
    densities: &HashMap<String, ConditionalDensity>,
) -> Result<f64> {
    let mut total = 0.0;
    for flow in asset.flows.iter().filter(|f| t < f.pay_date) {
        let e = expectation(&flow.payoff, densities, factors.tensor_limit)?;
        total += curve.discount_factor(t, flow.pay_date)? * e;
    }
    Ok(total)
}

/// Price together with `Γ^α_t = Σ_k ν^α_t P_{tT_k} Cov_t[Δ_{T_k}, X^α]` for each live factor.
pub fn volatility_vector(
    asset: &Asset,
    factors: &FactorSet,
    curve: &DiscountCurve,
    t: f64,
    states: &HashMap<String, FactorState>,
) -> Result<Valuation> {
    let densities = factors.densities(asset, t, states)?;
    let price = price_with(asset, factors, curve, t, &densities)?;
    let mut ids: Vec<&String> = densities.keys().collect();
    ids.sort();
    let mut gamma = Vec::with_capacity(ids.len());
    for id in ids {
        let d = &densities[id];
        let factor = factors.get(id)?;
        if d.nodes().len() == 1 || t >= factor.maturity() {
            gamma.push((id.clone(), 0.0));
            continue;
        }
        let nu = factor.schedule().nu(t)?;
        let mean = d.mean();
        // Cov[Δ, X] = E[Δ·(X − m)]
        let centred = Expr::Sub(Box::new(Expr::factor(id)), Box::new(Expr::Const(mean)));
        let mut g = 0.0;
        for flow in asset.flows.iter().filter(|f| t < f.pay_date) {
            if !flow.payoff.factors().contains(id) {
                continue;
            }
            let product = Expr::Mul(Box::new(flow.payoff.clone()), Box::new(centred.clone()));
            let cov = expectation(&product, &densities, factors.tensor_limit)?;
            g += curve.discount_factor(t, flow.pay_date)? * cov;
        }
        gamma.push((id.clone(), nu * g));
    }
    Ok(Valuation { price, gamma })
}

/// Payoff of the k-th flow of a dividend-growth asset: `D₀ · X₁ ⋯ X_k`.
pub fn dividend_growth_payoff(d0: f64, factor_ids: &[&str]) -> Expr {
    factor_ids
        .iter()
        .fold(Expr::Const(d0), |acc, id| Expr::Mul(Box::new(acc), Box::new(Expr::factor(id))))
}

/// Default growth-factor prior: gamma with shape `n` scaled to mean `1 + g`.
pub fn growth_factor_prior(g: f64, shape: u32) -> Result<PriorDistribution> {
    if !(g > -1.0) {
        return Err(Error::InvalidParameter(format!("growth rate must exceed -1, got {g}")));
    }
    PriorDistribution::gamma(shape, shape as f64 / (1.0 + g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn live(sigma: f64, xi: f64) -> FactorState {
        FactorState::Live(InformationState::constant_sigma(sigma, xi))
    }

    #[test]
    fn price_single_basics() {
        let curve = DiscountCurve::flat(0.04).unwrap();
        let prior = PriorDistribution::exponential(2.0).unwrap();
        let sched = FlowSchedule::constant(1.0, 1.0).unwrap();
        let p0 = price_single(&prior, &sched, &curve, 0.0, InformationState::new(0.0, 0.0)).unwrap();
        assert_relative_eq!(p0, curve.p0(1.0).unwrap() * 2.0, max_relative = 1e-10);
        assert_eq!(price_single(&prior, &sched, &curve, 1.0, InformationState::new(0.0, 0.0)).unwrap(), 0.0);

        let zero = FlowSchedule::constant(0.0, 1.0).unwrap();
        for &t in &[0.2, 0.7] {
            let p = price_single(&prior, &zero, &curve, t, InformationState::new(3.0, 0.0)).unwrap();
            assert_relative_eq!(p, curve.discount_factor(t, 1.0).unwrap() * 2.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn quadrature_matches_exponential_closed_form() {
        let curve = DiscountCurve::flat(0.0).unwrap();
        let prior = PriorDistribution::exponential(1.0).unwrap();
        let sched = FlowSchedule::constant(1.0, 1.0).unwrap();
        for &xi in &[-0.5, 0.0, 0.5] {
            let q = price_single(&prior, &sched, &curve, 0.5, InformationState::constant_sigma(1.0, xi)).unwrap();
            let c = closed_form_exponential(1.0, 1.0, &curve, 0.5, 1.0, xi).unwrap();
            assert_relative_eq!(q, c, max_relative = 1e-8);
        }
    }

    fn two_factor_market() -> (FactorSet, DiscountCurve) {
        let f1 = XFactor::new(
            "X1",
            PriorDistribution::exponential(1.0).unwrap(),
            FlowSchedule::constant(0.8, 1.0).unwrap(),
            128,
        )
        .unwrap();
        let f2 = XFactor::new(
            "X2",
            PriorDistribution::atoms(vec![(0.5, 0.3), (2.0, 0.7)]).unwrap(),
            FlowSchedule::constant(1.2, 2.0).unwrap(),
            0,
        )
        .unwrap();
        (FactorSet::new(vec![f1, f2]).unwrap(), DiscountCurve::flat(0.05).unwrap())
    }

    #[test]
    fn additive_payoff_is_linear() {
        let (factors, curve) = two_factor_market();
        let asset = Asset::new("A", vec![CashFlow::new(2.0, "X1 + X2").unwrap()]).unwrap();
        let t = 0.4;
        let states: HashMap<String, FactorState> = [("X1".into(), live(0.8, 0.3)), ("X2".into(), live(1.2, -0.2))].into();
        let v = volatility_vector(&asset, &factors, &curve, t, &states).unwrap();
        let d1 = factors.get("X1").unwrap().density(t, states["X1"]).unwrap();
        let d2 = factors.get("X2").unwrap().density(t, states["X2"]).unwrap();
        let p = curve.discount_factor(t, 2.0).unwrap();
        assert_relative_eq!(v.price, p * (d1.mean() + d2.mean()), max_relative = 1e-13);
        let nu1 = factors.get("X1").unwrap().schedule().nu(t).unwrap();
        let nu2 = factors.get("X2").unwrap().schedule().nu(t).unwrap();
        assert_relative_eq!(v.gamma[0].1, nu1 * p * d1.variance(), max_relative = 1e-10);
        assert_relative_eq!(v.gamma[1].1, nu2 * p * d2.variance(), max_relative = 1e-10);
        assert_relative_eq!(v.total_volatility(), v.gamma[0].1.hypot(v.gamma[1].1), max_relative = 1e-15);
    }

    #[test]
    fn single_factor_volatility_matches_variance_formula() {
        let (factors, curve) = two_factor_market();
        let asset = Asset::new("A", vec![CashFlow::new(1.0, "X1").unwrap()]).unwrap();
        let t = 0.6;
        let states: HashMap<String, FactorState> = [("X1".into(), live(0.8, 0.1))].into();
        let v = volatility_vector(&asset, &factors, &curve, t, &states).unwrap();
        let d = factors.get("X1").unwrap().density(t, states["X1"]).unwrap();
        let expected = curve.discount_factor(t, 1.0).unwrap() * 0.8 / (1.0 - t) * d.variance();
        assert_relative_eq!(v.gamma[0].1, expected, max_relative = 1e-10);
    }

    #[test]
    fn ex_dividend_and_revealed_factors() {
        let (factors, curve) = two_factor_market();
        let asset = Asset::new(
            "A",
            vec![CashFlow::new(1.0, "X1").unwrap(), CashFlow::new(2.0, "X1 * X2").unwrap()],
        )
        .unwrap();
        let states: HashMap<String, FactorState> =
            [("X1".into(), FactorState::Revealed(1.7)), ("X2".into(), live(1.2, 0.4))].into();
        let t = 1.0;
        let v = volatility_vector(&asset, &factors, &curve, t, &states).unwrap();
        let d2 = factors.get("X2").unwrap().density(t, states["X2"]).unwrap();
        assert_relative_eq!(v.price, curve.discount_factor(t, 2.0).unwrap() * 1.7 * d2.mean(), max_relative = 1e-13);
        assert_eq!(v.gamma[0], ("X1".to_string(), 0.0));
        // a live state for a matured factor is an error
        let bad: HashMap<String, FactorState> = [("X1".into(), live(0.8, 0.0)), ("X2".into(), live(1.2, 0.4))].into();
        assert!(matches!(price_asset(&asset, &factors, &curve, t, &bad), Err(Error::MissingFactorState(_))));
    }

    #[test]
    fn validation_errors() {
        let (factors, _) = two_factor_market();
        let early = Asset::new("A", vec![CashFlow::new(1.5, "X2").unwrap()]).unwrap();
        assert!(factors.validate(&early).is_err());
        let unknown = Asset::new("A", vec![CashFlow::new(1.5, "Z").unwrap()]).unwrap();
        assert_eq!(factors.validate(&unknown).unwrap_err(), Error::UnknownFactor("Z".into()));
        assert!(Asset::new("A", vec![CashFlow::new(2.0, "1").unwrap(), CashFlow::new(1.0, "1").unwrap()]).is_err());
    }

    #[test]
    fn dividend_growth_at_time_zero() {
        let g = 0.03;
        let curve = DiscountCurve::flat(0.05).unwrap();
        let ids = ["G1", "G2", "G3"];
        let factors = FactorSet::new(
            ids.iter()
                .enumerate()
                .map(|(k, id)| {
                    XFactor::new(
                        *id,
                        growth_factor_prior(g, 4).unwrap(),
                        FlowSchedule::constant(0.5, (k + 1) as f64).unwrap(),
                        DEFAULT_NODES,
                    )
                    .unwrap()
                })
                .collect(),
        )
        .unwrap();
        let flows = (1..=3)
            .map(|k| CashFlow {
                pay_date: k as f64,
                payoff: dividend_growth_payoff(2.0, &ids[..k]),
            })
            .collect();
        let asset = Asset::new("D", flows).unwrap();
        let states = ids.iter().map(|id| (id.to_string(), live(0.5, 0.0))).collect();
        let p = price_asset(&asset, &factors, &curve, 0.0, &states).unwrap();
        let expected: f64 = (1..=3).map(|k| 2.0 * curve.p0(k as f64).unwrap() * (1.0 + g).powi(k)).sum();
        assert_relative_eq!(p, expected, max_relative = 1e-9);
    }
}
