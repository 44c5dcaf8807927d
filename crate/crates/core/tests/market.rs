use infoprice_core::numerics::stats;
use infoprice_core::pricing::{
    dynamics_residuals, simulate_market, Asset, CashFlow, FactorSet, Market, XFactor,
};
use infoprice_core::{DiscountCurve, FlowSchedule, PriorDistribution};

fn factor(id: &str, sigma: f64, maturity: f64) -> XFactor {
    XFactor::new(
        id,
        PriorDistribution::exponential(1.0).unwrap(),
        FlowSchedule::constant(sigma, maturity).unwrap(),
        96,
    )
    .unwrap()
}

fn market(payoffs: &[(&str, &str)], factors: Vec<XFactor>) -> Market {
    let assets = payoffs
        .iter()
        .map(|(id, p)| Asset::new(*id, vec![CashFlow::new(1.0, p).unwrap()]).unwrap())
        .collect();
    Market::new(FactorSet::new(factors).unwrap(), assets, DiscountCurve::flat(0.03).unwrap()).unwrap()
}

#[test]
fn residual_rms_is_first_order_in_the_step() {
    let m = market(&[("S", "X1 + X2")], vec![factor("X1", 1.0, 1.0), factor("X2", 0.7, 1.0)]);
    let rms: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&steps| {
            let grid = m.grid(0.5, steps).unwrap();
            let paths = simulate_market(&m, &grid, 1, 400).unwrap();
            let r: Vec<f64> = paths
                .iter()
                .flat_map(|p| dynamics_residuals(&m, &grid, p, 0).unwrap())
                .collect();
            (r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64).sqrt()
        })
        .collect();
    for w in rms.windows(2) {
        assert!(w[0] / w[1] >= 1.8, "{rms:?}");
    }
}

#[test]
fn shared_factor_correlates_prices() {
    let m = market(
        &[("A", "C + I1"), ("B", "C + I2"), ("D", "I3")],
        vec![factor("C", 1.0, 1.0), factor("I1", 1.0, 1.0), factor("I2", 1.0, 1.0), factor("I3", 1.0, 1.0)],
    );
    let grid = m.grid(0.5, 1).unwrap();
    let paths = simulate_market(&m, &grid, 3, 3000).unwrap();
    let incr = |a: usize| paths.iter().map(|p| p.prices[a][1] - p.prices[a][0]).collect::<Vec<f64>>();
    let (a, b, d) = (incr(0), incr(1), incr(2));
    let shared = stats::correlation(&a, &b);
    assert!(shared > 4.0 * stats::correlation_se(shared, paths.len()) && shared < 1.0);
    let disjoint = stats::correlation(&a, &d);
    assert!(disjoint.abs() <= 4.0 * stats::correlation_se(disjoint, paths.len()));
}

#[test]
fn discounted_total_value_is_a_martingale() {
    let factors = vec![factor("X1", 1.0, 0.5), factor("X2", 0.8, 1.0)];
    let asset = Asset::new(
        "S",
        vec![CashFlow::new(0.5, "X1").unwrap(), CashFlow::new(1.0, "X1 * X2").unwrap()],
    )
    .unwrap();
    let m = Market::new(FactorSet::new(factors).unwrap(), vec![asset], DiscountCurve::flat(0.04).unwrap()).unwrap();
    let grid = m.grid(0.9, 6).unwrap();
    let paths = simulate_market(&m, &grid, 12, 3000).unwrap();
    let values: Vec<Vec<f64>> = paths.iter().map(|p| p.discounted_total_value(&m, &grid, 0).unwrap()).collect();
    let s0 = values[0][0];
    for i in 0..grid.len() {
        let col: Vec<f64> = values.iter().map(|v| v[i]).collect();
        let (mean, se) = stats::mean_se(&col);
        assert!((mean - s0).abs() <= 4.0 * se.max(1e-14), "t = {}: {mean} vs {s0} ± {se}", grid.nodes()[i]);
    }
}
