use crate::args::{Common, OptionArgs, PriceArgs, SimulateArgs};
use crate::output::{fmt, Table};
use crate::scenario::{Overrides, Scenario};
use anyhow::{anyhow, bail, Context, Result};
use infoprice_core::filter::InformationState;
use infoprice_core::numerics::{stats, TimeGrid};
use infoprice_core::options::{CallSpec, CriticalValue};
use infoprice_core::pricing::{simulate_market, volatility_vector, FactorState, PathSample};
use infoprice_core::stochastic::stieltjes_sums;
use std::collections::HashMap;

pub fn load(common: &Common) -> Result<Scenario> {
    Scenario::load(
        &common.scenario,
        Overrides {
            nodes: common.nodes,
            eps: common.eps,
        },
    )
}

pub fn require_seed(flag: Option<u64>, scenario: &Scenario) -> Result<u64> {
    flag.or(scenario.job.seed)
        .ok_or_else(|| anyhow!("this job is stochastic: set `seed` in [job] or pass --seed"))
}

fn price_header(scenario: &Scenario) -> Vec<String> {
    let mut h = vec!["asset".to_string(), "t".into(), "price".into(), "gamma_total".into()];
    for id in scenario.factor_ids() {
        h.push(format!("mean_{id}"));
        h.push(format!("variance_{id}"));
        h.push(format!("gamma_{id}"));
    }
    h
}

/// Rows of the price table for one time and one set of factor states.
fn price_rows(scenario: &Scenario, t: f64, states: &HashMap<String, FactorState>, table: &mut Table) -> Result<()> {
    let market = &scenario.market;
    let moments = market
        .factors
        .factors()
        .iter()
        .map(|f| {
            let state = states
                .get(f.id())
                .ok_or_else(|| anyhow!("no information for factor `{}` at t = {t}", f.id()))?;
            let d = f.density(t, *state).with_context(|| format!("factor `{}` at t = {t}", f.id()))?;
            Ok((d.mean(), d.variance()))
        })
        .collect::<Result<Vec<_>>>()?;
    for asset in &market.assets {
        let v = volatility_vector(asset, &market.factors, &market.curve, t, states)
            .with_context(|| format!("asset `{}` at t = {t}", asset.id()))?;
        let mut row = vec![asset.id().to_string(), fmt(t), fmt(v.price), fmt(v.total_volatility())];
        for (f, (m, var)) in market.factors.factors().iter().zip(&moments) {
            let g = v.gamma.iter().find(|(id, _)| id == f.id()).map_or(0.0, |(_, g)| *g);
            row.extend([fmt(*m), fmt(*var), fmt(g)]);
        }
        table.push(row);
    }
    Ok(())
}

pub fn price(args: &PriceArgs) -> Result<()> {
    let scenario = load(&args.common)?;
    let mut table = Table::new(price_header(&scenario));
    match &args.path {
        Some(path) => price_path(&scenario, path, &mut table)?,
        None => {
            let lookup = |list: &[(String, f64)], id: &str| list.iter().rev().find(|(k, _)| k == id).map(|(_, v)| *v);
            for known in args.xi.iter().chain(&args.stieltjes).chain(&args.reveal) {
                scenario.market.factors.get(&known.0)?;
            }
            for &t in &args.at {
                let mut states = HashMap::new();
                for f in scenario.market.factors.factors() {
                    let id = f.id();
                    let state = if let Some(x) = lookup(&args.reveal, id) {
                        FactorState::Revealed(x)
                    } else if t >= f.maturity() {
                        bail!("factor `{id}` matures at {} <= t = {t}; pass --reveal {id}=VALUE", f.maturity());
                    } else {
                        let xi = lookup(&args.xi, id).unwrap_or(0.0);
                        let st = match (lookup(&args.stieltjes, id), f.schedule().constant_sigma()) {
                            (Some(s), _) => s,
                            (None, Some(sigma)) => sigma * xi,
                            (None, None) if t == 0.0 => 0.0,
                            (None, None) => bail!(
                                "factor `{id}` has a time-varying rate; pass --stieltjes {id}=VALUE or use --path"
                            ),
                        };
                        if t <= f.schedule().start() && (xi != 0.0 || st != 0.0) {
                            bail!("factor `{id}`: ξ is identically zero at t = {t}; price that time in a separate call without --xi/--stieltjes");
                        }
                        FactorState::Live(InformationState::new(xi, st))
                    };
                    states.insert(id.to_string(), state);
                }
                price_rows(&scenario, t, &states, &mut table)?;
            }
        }
    }
    table.emit(args.common.out.as_deref(), "price.csv")?;
    Ok(())
}

/// Prices along an observed information path given as `t,<id>,...` rows of `ξ`.
fn price_path(scenario: &Scenario, path: &std::path::Path, table: &mut Table) -> Result<()> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let header = reader.headers()?.clone();
    if header.get(0) != Some("t") {
        bail!("{}: first column must be `t`", path.display());
    }
    let ids = scenario.factor_ids();
    let columns = ids
        .iter()
        .map(|id| {
            header
                .iter()
                .position(|h| h == id)
                .ok_or_else(|| anyhow!("{}: no column for factor `{id}`", path.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut times = Vec::new();
    let mut xi: Vec<Vec<f64>> = vec![Vec::new(); ids.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |col: usize| -> Result<f64> {
            record
                .get(col)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| anyhow!("{}: data row {}, column {}: not a number", path.display(), line + 1, col + 1))
        };
        times.push(parse(0)?);
        for (k, &c) in columns.iter().enumerate() {
            xi[k].push(parse(c)?);
        }
    }
    let grid = TimeGrid::new(times.clone()).with_context(|| format!("{}: time column", path.display()))?;
    let factors = scenario.market.factors.factors();
    for (k, f) in factors.iter().enumerate() {
        if times[0] <= f.schedule().start() && xi[k][0] != 0.0 {
            bail!("{}: `{}` must be 0 at the start time {}", path.display(), f.id(), times[0]);
        }
    }
    let mut stieltjes = Vec::with_capacity(ids.len());
    let mut revealed = Vec::with_capacity(ids.len());
    for (k, f) in factors.iter().enumerate() {
        let live = grid.truncated(f.schedule().last_regular_time());
        stieltjes.push(stieltjes_sums(f.schedule(), &live, &xi[k][..live.len()])?);
        let big = f.schedule().cumulative_sigma(f.maturity())?;
        revealed.push(
            grid.index_of(f.maturity())
                .filter(|_| big > 0.0)
                .map(|i| xi[k][i] / big),
        );
    }
    for (i, &t) in times.iter().enumerate() {
        let mut states = HashMap::new();
        for (k, f) in factors.iter().enumerate() {
            let state = if i < stieltjes[k].len() {
                FactorState::Live(InformationState::new(xi[k][i], stieltjes[k][i]))
            } else {
                match revealed[k] {
                    Some(x) if t >= f.maturity() => FactorState::Revealed(x),
                    _ => bail!(
                        "{}: t = {t} is past the last regular time of factor `{}`; include a row at its maturity {}",
                        path.display(),
                        f.id(),
                        f.maturity()
                    ),
                }
            };
            states.insert(f.id().to_string(), state);
        }
        price_rows(scenario, t, &states, table)?;
    }
    Ok(())
}

pub fn default_horizon(scenario: &Scenario) -> f64 {
    let market = &scenario.market;
    let last_pay = market
        .assets
        .iter()
        .filter_map(|a| a.flows().last().map(|f| f.pay_date))
        .fold(0.0, f64::max);
    if last_pay > 0.0 {
        last_pay
    } else {
        market.factors.factors().iter().map(|f| f.maturity()).fold(0.0, f64::max)
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let scenario = load(&args.common)?;
    let seed = require_seed(args.seed, &scenario)?;
    let n_paths = args.paths.or(scenario.job.paths).unwrap_or(1000);
    if n_paths == 0 {
        bail!("--paths must be positive");
    }
    let steps = args.grid.or(scenario.job.grid).unwrap_or(64);
    let horizon = args.horizon.or(scenario.job.horizon).unwrap_or_else(|| default_horizon(&scenario));
    let market = &scenario.market;
    let grid = market.grid(horizon, steps)?;
    let samples = simulate_market(market, &grid, seed, n_paths)?;
    let out = args.common.out.clone().unwrap_or_else(|| ".".into());

    let ids = scenario.factor_ids();
    let mut header = vec!["path".to_string(), "t".into()];
    for id in &ids {
        for col in ["xi", "mean", "variance", "innovation"] {
            header.push(format!("{col}_{id}"));
        }
    }
    for a in &market.assets {
        for col in ["price", "paid", "gamma_total"] {
            header.push(format!("{col}_{}", a.id()));
        }
    }
    let mut paths = Table::new(header);
    for (p, s) in samples.iter().enumerate() {
        for (i, &t) in grid.nodes().iter().enumerate() {
            let mut row = vec![p.to_string(), fmt(t)];
            for k in 0..ids.len() {
                row.extend([
                    fmt(s.xi[k][i]),
                    fmt(s.conditional_means[k][i]),
                    fmt(s.conditional_variances[k][i]),
                    fmt(s.innovations[k][i]),
                ]);
            }
            for a in 0..market.assets.len() {
                let g = s.gammas[a][i].iter().map(|g| g * g).sum::<f64>().sqrt();
                row.extend([fmt(s.prices[a][i]), fmt(s.paid[a][i]), fmt(g)]);
            }
            paths.push(row);
        }
    }
    paths.emit(Some(&out), "paths.csv")?;

    let summary = summary_table(&scenario, &grid, &samples)?;
    summary.emit(Some(&out), "summary.csv")?;
    correlation_table(&scenario, &grid, &samples).emit(Some(&out), "correlations.csv")?;
    Ok(())
}

fn summary_table(scenario: &Scenario, grid: &TimeGrid, samples: &[PathSample]) -> Result<Table> {
    let market = &scenario.market;
    let mut table = Table::new([
        "t",
        "asset",
        "mean_price",
        "variance_price",
        "mean_discounted_value",
        "se_discounted_value",
        "martingale_z",
    ]);
    for (a, asset) in market.assets.iter().enumerate() {
        let values = samples
            .iter()
            .map(|s| s.discounted_total_value(market, grid, a))
            .collect::<infoprice_core::Result<Vec<_>>>()?;
        let s0 = values[0][0];
        for (i, &t) in grid.nodes().iter().enumerate() {
            let prices: Vec<f64> = samples.iter().map(|s| s.prices[a][i]).collect();
            let disc: Vec<f64> = values.iter().map(|v| v[i]).collect();
            let (m, se) = stats::mean_se(&disc);
            let z = stats::z_score(m - s0, se, s0);
            let var = if prices.len() > 1 { stats::variance(&prices) } else { 0.0 };
            table.push(vec![
                fmt(t),
                asset.id().to_string(),
                fmt(stats::mean(&prices)),
                fmt(var),
                fmt(m),
                fmt(se),
                fmt(z),
            ]);
        }
    }
    Ok(table)
}

/// Correlation of price increments over `[0, t*]`, with `t*` the last node before any payment.
fn correlation_table(scenario: &Scenario, grid: &TimeGrid, samples: &[PathSample]) -> Table {
    let market = &scenario.market;
    let mut table = Table::new(["asset_a", "asset_b", "t_start", "t_end", "correlation", "se", "z"]);
    let first_pay = market
        .assets
        .iter()
        .filter_map(|a| a.flows().first().map(|f| f.pay_date))
        .fold(f64::INFINITY, f64::min);
    let Some(end) = grid.nodes().iter().rposition(|&t| t < first_pay) else {
        return table;
    };
    if end == 0 || samples.len() < 3 {
        return table;
    }
    let incr = |a: usize| samples.iter().map(|s| s.prices[a][end] - s.prices[a][0]).collect::<Vec<f64>>();
    for a in 0..market.assets.len() {
        for b in a + 1..market.assets.len() {
            let r = stats::correlation(&incr(a), &incr(b));
            let se = stats::correlation_se(r, samples.len());
            let z = if se > 0.0 { r / se } else { 0.0 };
            table.push(vec![
                market.assets[a].id().to_string(),
                market.assets[b].id().to_string(),
                fmt(0.0),
                fmt(grid.nodes()[end]),
                fmt(r),
                fmt(se),
                fmt(z),
            ]);
        }
    }
    table
}

pub fn option(args: &OptionArgs) -> Result<()> {
    let scenario = load(&args.common)?;
    let factors = scenario.market.factors.factors();
    let factor = match &args.factor {
        Some(id) => scenario.market.factors.get(id)?,
        None if factors.len() == 1 => &factors[0],
        None => bail!("scenario has {} factors; choose one with --factor", factors.len()),
    };
    let seed = match args.mc {
        Some(_) => Some(require_seed(args.seed, &scenario)?),
        None => None,
    };
    let mut table = Table::new([
        "factor",
        "strike",
        "expiry",
        "critical_kind",
        "critical_value",
        "call",
        "put",
        "forward",
        "mc",
        "mc_se",
    ]);
    for &strike in &args.strike {
        let spec = CallSpec::with_nodes(
            strike,
            args.expiry,
            factor.prior().clone(),
            factor.schedule().clone(),
            scenario.market.curve.clone(),
            scenario.nodes,
        )
        .with_context(|| format!("option with strike {strike}"))?;
        let constant = factor.schedule().constant_sigma().is_some();
        let critical = if constant { spec.critical_xi()? } else { spec.critical_value()? };
        let (kind, value) = match critical {
            CriticalValue::Root(v) => (if constant { "xi_star" } else { "y_star" }, fmt(v)),
            CriticalValue::AlwaysIn => ("always_in", String::new()),
            CriticalValue::AlwaysOut => ("always_out", String::new()),
        };
        let call = spec.call_price_analytic()?;
        let forward = spec.forward_value()?;
        let (mc, se) = match (args.mc, seed) {
            (Some(n), Some(seed)) => {
                let (m, s) = spec.call_price_mc(n, seed)?;
                (fmt(m), fmt(s))
            }
            _ => (String::new(), String::new()),
        };
        table.push(vec![
            factor.id().to_string(),
            fmt(strike),
            fmt(args.expiry),
            kind.to_string(),
            value,
            fmt(call),
            fmt(call - forward),
            fmt(forward),
            mc,
            se,
        ]);
    }
    table.emit(args.common.out.as_deref(), "option.csv")?;
    Ok(())
}
