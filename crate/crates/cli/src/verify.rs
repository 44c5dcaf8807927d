//! Statistical verification suites run per factor of a scenario.

use crate::args::{Suite, VerifyArgs};
use crate::commands::{load, require_seed};
use crate::output::{fmt, Table};
use anyhow::Result;
use infoprice_core::filter::{condition_from, consistency_reinitialize, reinitialized_information};
use infoprice_core::numerics::{stats, TimeGrid};
use infoprice_core::pricing::XFactor;
use infoprice_core::stochastic::{
    ensemble, filter_path, inverse_roundtrip_ensemble, reconstruct_innovation, roundtrip_refinement, sample_bridge,
    simulate_information_path,
};

/// Multiple of the standard error allowed for Monte Carlo checks.
const Z_BOUND: f64 = 4.0;
/// Paths used for the deterministic consistency check.
const CONSISTENCY_PATHS: usize = 32;
/// Paths for the inverse-suite refinement study.
const REFINEMENT_PATHS: usize = 200;
/// Steps of the round trip used for the bridge/factor correlation.
const CORRELATION_STEPS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub factor: String,
    pub name: String,
    pub statistic: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(factor: &str, name: impl Into<String>, statistic: f64, bound: f64) -> Self {
        Self {
            factor: factor.to_string(),
            name: name.into(),
            statistic,
            bound,
            pass: statistic <= bound,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteParams {
    pub paths: usize,
    pub seed: u64,
    pub steps: usize,
}

pub fn run_suite(factor: &XFactor, suite: Suite, p: SuiteParams) -> Result<Vec<Check>> {
    match suite {
        Suite::Bridge => bridge(factor, p),
        Suite::Filter => filter(factor, p),
        Suite::Consistency => consistency(factor, p),
        Suite::Innovation => innovation(factor, p),
        Suite::Inverse => inverse(factor, p),
    }
}

fn z(diff: f64, se: f64) -> f64 {
    stats::z_score(diff, se, 0.0)
}

fn bridge(f: &XFactor, p: SuiteParams) -> Result<Vec<Check>> {
    let maturity = f.maturity();
    let (s, t) = (0.25 * maturity, 0.5 * maturity);
    let grid = TimeGrid::new(vec![0.0, s, t])?;
    let draws = ensemble(p.seed, p.paths, |_, mut rng| sample_bridge(maturity, &grid, &mut rng))?;
    let bs: Vec<f64> = draws.iter().map(|b| b[1]).collect();
    let bt: Vec<f64> = draws.iter().map(|b| b[2]).collect();
    let (var, var_se) = stats::variance_se(&bt);
    let (cov, cov_se) = stats::covariance_se(&bs, &bt);
    Ok(vec![
        Check::at_most(f.id(), "variance_z", z(var - t * (maturity - t) / maturity, var_se), Z_BOUND),
        Check::at_most(f.id(), "covariance_z", z(cov - s * (maturity - t) / maturity, cov_se), Z_BOUND),
    ])
}

fn live_grid(f: &XFactor, horizon_fraction: f64, steps: usize, extra: &[f64]) -> Result<TimeGrid> {
    let horizon = (horizon_fraction * f.maturity()).min(f.schedule().last_regular_time());
    Ok(TimeGrid::uniform_with_breakpoints(horizon, steps, &f.schedule().breakpoints())?.with_nodes(extra))
}

fn filter(f: &XFactor, p: SuiteParams) -> Result<Vec<Check>> {
    let grid = live_grid(f, 0.9, p.steps, &[])?;
    let rows = ensemble(p.seed, p.paths, |_, mut rng| {
        let path = simulate_information_path(f.prior(), f.schedule(), &grid, &mut rng)?;
        Ok(filter_path(f.base(), &path)?
            .iter()
            .map(|d| (d.mean(), d.variance()))
            .collect::<Vec<_>>())
    })?;
    let d0 = f.base().mean();
    let mut mean_z: f64 = 0.0;
    let mut variance_z: f64 = 0.0;
    for i in 0..grid.len() {
        let d: Vec<f64> = rows.iter().map(|r| r[i].0).collect();
        let (m, se) = stats::mean_se(&d);
        mean_z = mean_z.max(stats::z_score(m - d0, se, d0));
        if i > 0 {
            let diff: Vec<f64> = rows.iter().map(|r| r[i].1 - r[i - 1].1).collect();
            let (dm, dse) = stats::mean_se(&diff);
            // one-sided: only an increase counts against monotonicity
            variance_z = variance_z.max(if dm > 0.0 { stats::z_score(dm, dse, f.base().variance()) } else { 0.0 });
        }
    }
    Ok(vec![
        Check::at_most(f.id(), "max_mean_z", mean_z, Z_BOUND),
        Check::at_most(f.id(), "max_variance_increase_z", variance_z, Z_BOUND),
    ])
}

fn consistency(f: &XFactor, p: SuiteParams) -> Result<Vec<Check>> {
    let maturity = f.maturity();
    let starts = [0.2 * maturity, 0.5 * maturity, 0.8 * maturity];
    let grid = live_grid(f, 0.95, p.steps, &starts)?;
    let worst = ensemble(p.seed, p.paths.min(CONSISTENCY_PATHS), |_, mut rng| {
        let path = simulate_information_path(f.prior(), f.schedule(), &grid, &mut rng)?;
        let info = path.information()?;
        let nodes = grid.nodes();
        let mut worst: f64 = 0.0;
        for &s in &starts {
            let i = grid.index_of(s).expect("start times are grid nodes");
            let at_s = condition_from(f.base(), f.schedule(), s, info[i])?;
            for j in i + 1..nodes.len() {
                let t = nodes[j];
                let direct = condition_from(f.base(), f.schedule(), t, info[j])?;
                let eta = reinitialized_information(f.schedule(), s, t, info[i], info[j])?;
                let again = consistency_reinitialize(&at_s, f.schedule(), s, t, eta)?;
                for (a, b) in direct.log_weights().iter().zip(again.log_weights()) {
                    // nodes below e^-700 carry no representable mass
                    if *a > -700.0 || *b > -700.0 {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
        }
        Ok(worst)
    })?
    .into_iter()
    .fold(0.0, f64::max);
    Ok(vec![Check::at_most(f.id(), "max_log_weight_deviation", worst, 1e-10)])
}

fn innovation(f: &XFactor, p: SuiteParams) -> Result<Vec<Check>> {
    let horizon = (0.75 * f.maturity()).min(f.schedule().last_regular_time());
    let grid = TimeGrid::uniform(horizon, p.steps)?;
    let ws = ensemble(p.seed, p.paths, |_, mut rng| {
        let path = simulate_information_path(f.prior(), f.schedule(), &grid, &mut rng)?;
        let means: Vec<f64> = filter_path(f.base(), &path)?.iter().map(|d| d.mean()).collect();
        reconstruct_innovation(&path, &means)
    })?;
    let nodes = grid.nodes();
    let (mut mean_z, mut var_z): (f64, f64) = (0.0, 0.0);
    for i in 0..p.steps {
        let h = nodes[i + 1] - nodes[i];
        let dw: Vec<f64> = ws.iter().map(|w| w[i + 1] - w[i]).collect();
        let (m, se) = stats::mean_se(&dw);
        mean_z = mean_z.max(z(m, se));
        let (v, vse) = stats::variance_se(&dw);
        var_z = var_z.max(z(v - h, vse));
    }
    let terminal: Vec<f64> = ws.iter().map(|w| *w.last().unwrap()).collect();
    Ok(vec![
        Check::at_most(f.id(), "max_increment_mean_z", mean_z, Z_BOUND),
        Check::at_most(f.id(), "max_increment_variance_z", var_z, Z_BOUND),
        Check::at_most(
            f.id(),
            "terminal_jarque_bera",
            stats::jarque_bera(&terminal),
            stats::JARQUE_BERA_CRIT_1PCT,
        ),
    ])
}

fn inverse(f: &XFactor, p: SuiteParams) -> Result<Vec<Check>> {
    let horizon = (0.5 * f.maturity()).min(f.schedule().last_regular_time());
    let study = roundtrip_refinement(
        f.prior(),
        f.base(),
        f.schedule(),
        horizon,
        p.steps,
        2,
        p.seed,
        p.paths.min(REFINEMENT_PATHS),
    )?;
    let ratios: Vec<f64> = study.median_max_error.windows(2).map(|w| w[0] / w[1]).collect();
    let grid = TimeGrid::uniform(horizon, CORRELATION_STEPS)?;
    let summary = inverse_roundtrip_ensemble(f.prior(), f.base(), f.schedule(), &grid, p.seed ^ 1, p.paths, CORRELATION_STEPS)?;
    let mut checks = vec![Check::at_most(f.id(), "median_max_error", study.median_max_error[0], 5e-2)];
    for (k, r) in ratios.iter().enumerate() {
        // error must shrink: the inverse ratio stays below one
        checks.push(Check::at_most(f.id(), format!("refinement_{}_over_{}", study.steps[k + 1], study.steps[k]), 1.0 / r, 1.0 - 1e-12));
    }
    checks.push(Check::at_most(
        f.id(),
        "bridge_factor_correlation_z",
        z(summary.bridge_factor_correlation, summary.correlation_se),
        Z_BOUND,
    ));
    Ok(checks)
}

/// Runs the suite on every factor; returns whether all checks passed.
pub fn verify(args: &VerifyArgs) -> Result<bool> {
    let scenario = load(&args.common)?;
    let seed = require_seed(args.seed, &scenario)?;
    let paths = args.paths.or(scenario.job.paths).unwrap_or(10_000);
    let default_steps = if args.suite == Suite::Inverse { 1024 } else { 64 };
    let steps = args.grid.or(scenario.job.grid).unwrap_or(default_steps);
    let mut table = Table::new(["suite", "factor", "check", "statistic", "bound", "pass"]);
    let suite_name = format!("{:?}", args.suite).to_lowercase();
    let mut all = true;
    for (k, factor) in scenario.market.factors.factors().iter().enumerate() {
        let params = SuiteParams {
            paths,
            seed: seed.wrapping_add(k as u64),
            steps,
        };
        for c in run_suite(factor, args.suite, params)? {
            all &= c.pass;
            table.push(vec![
                suite_name.clone(),
                c.factor,
                c.name,
                fmt(c.statistic),
                fmt(c.bound),
                if c.pass { "PASS" } else { "FAIL" }.to_string(),
            ]);
        }
    }
    table.emit(args.common.out.as_deref(), &format!("verify_{suite_name}.csv"))?;
    eprintln!("verify {suite_name}: {}", if all { "PASS" } else { "FAIL" });
    Ok(all)
}
