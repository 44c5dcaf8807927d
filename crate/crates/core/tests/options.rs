use infoprice_core::options::{CallSpec, CriticalValue};
use infoprice_core::{DiscountCurve, FlowSchedule, PriorDistribution};

fn curve() -> DiscountCurve {
    DiscountCurve::flat(0.03).unwrap()
}

fn spec_at(ratio: f64, prior: PriorDistribution, schedule: FlowSchedule) -> CallSpec {
    let c = curve();
    let fwd = c.discount_factor(0.5, schedule.maturity()).unwrap() * prior.mean();
    CallSpec::new(ratio * fwd, 0.5, prior, schedule, c).unwrap()
}

#[test]
fn analytic_within_mc_error() {
    let priors = [
        PriorDistribution::exponential(1.0).unwrap(),
        PriorDistribution::atoms(vec![(0.4, 0.6), (2.5, 0.4)]).unwrap(),
    ];
    for prior in priors {
        for ratio in [0.8, 1.0, 1.2] {
            let s = spec_at(ratio, prior.clone(), FlowSchedule::constant(1.0, 1.0).unwrap());
            let a = s.call_price_analytic().unwrap();
            let (mc, se) = s.call_price_mc(20_000, 7).unwrap();
            assert!((a - mc).abs() <= 4.0 * se, "ratio {ratio}: analytic {a}, mc {mc} ± {se}");
        }
    }
}

#[test]
fn time_dependent_rate_within_mc_error() {
    let sched = FlowSchedule::piecewise_constant(&[0.0, 0.3, 0.6, 1.0], &[0.5, 1.5, 1.0]).unwrap();
    for ratio in [0.8, 1.0, 1.2] {
        let s = spec_at(ratio, PriorDistribution::exponential(1.0).unwrap(), sched.clone());
        let a = s.call_price_analytic().unwrap();
        let (mc, se) = s.call_price_mc(20_000, 11).unwrap();
        assert!((a - mc).abs() <= 4.0 * se, "ratio {ratio}: analytic {a}, mc {mc} ± {se}");
    }
}

#[test]
fn parity_bounds_and_shape_in_strike() {
    let c = curve();
    let prior = PriorDistribution::gamma(2, 1.5).unwrap();
    let sched = FlowSchedule::constant(0.8, 1.0).unwrap();
    let s0 = c.p0(1.0).unwrap() * prior.mean();
    let prices: Vec<f64> = (0..11)
        .map(|i| {
            let k = 0.2 * i as f64;
            let s = CallSpec::new(k, 0.5, prior.clone(), sched.clone(), c.clone()).unwrap();
            let call = s.call_price_analytic().unwrap();
            let put = s.put_price_analytic().unwrap();
            let fwd = s0 - c.p0(0.5).unwrap() * k;
            assert!((call - put - fwd).abs() <= 1e-10);
            assert!(call >= fwd.max(0.0) - 1e-12 && call <= s0 + 1e-12);
            call
        })
        .collect();
    for w in prices.windows(2) {
        assert!(w[1] < w[0]);
    }
    for w in prices.windows(3) {
        assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-12);
    }
}

#[test]
fn critical_value_sides() {
    let c = curve();
    let sched = FlowSchedule::constant(1.0, 1.0).unwrap();
    let p = c.discount_factor(0.5, 1.0).unwrap();
    let atom = |k: f64| {
        CallSpec::new(k, 0.5, PriorDistribution::degenerate(1.0).unwrap(), sched.clone(), c.clone())
            .unwrap()
            .critical_value()
            .unwrap()
    };
    assert_eq!(atom(0.5 * p), CriticalValue::AlwaysIn);
    assert_eq!(atom(1.5 * p), CriticalValue::AlwaysOut);
}

#[test]
fn more_information_never_cheapens_at_the_money() {
    let prior = PriorDistribution::exponential(1.0).unwrap();
    let mut last = 0.0;
    for i in 0..=10 {
        let sigma = 0.2 * i as f64;
        let s = spec_at(1.0, prior.clone(), FlowSchedule::constant(sigma, 1.0).unwrap());
        let v = s.call_price_analytic().unwrap();
        assert!(v >= last - 1e-12, "σ = {sigma}: {v} < {last}");
        last = v;
    }
}
