//! Scenario files: TOML with `[curve]`, `[[factor]]`, `[[asset]]`, `[numerics]` and `[job]`.

use anyhow::{bail, Context, Result};
use infoprice_core::numerics::DEFAULT_NODES;
use infoprice_core::pricing::{growth_factor_prior, Asset, CashFlow, FactorSet, Market, XFactor, DEFAULT_TENSOR_LIMIT};
use infoprice_core::{DiscountCurve, FlowSchedule, PriorDistribution};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    curve: CurveSpec,
    #[serde(default)]
    numerics: NumericsSpec,
    #[serde(rename = "factor", default)]
    factors: Vec<FactorSpec>,
    #[serde(rename = "asset", default)]
    assets: Vec<AssetSpec>,
    #[serde(default)]
    job: JobSpec,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum CurveSpec {
    Flat { rate: f64 },
    Points { points: Vec<[f64; 2]> },
    File { path: PathBuf },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NumericsSpec {
    nodes: Option<usize>,
    eps: Option<f64>,
    tensor_limit: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorSpec {
    id: String,
    maturity: f64,
    prior: PriorSpec,
    schedule: ScheduleSpec,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum PriorSpec {
    DiscreteAtoms { atoms: Vec<[f64; 2]> },
    Degenerate { value: f64 },
    Exponential { delta: f64 },
    Gamma { n: u32, delta: f64 },
    Lognormal { s0: f64, r: f64, vol: f64 },
    StandardNormal,
    Tabulated {
        xs: Option<Vec<f64>>,
        densities: Option<Vec<f64>>,
        path: Option<PathBuf>,
    },
    /// Dividend-growth factor with mean `1 + g`.
    Growth { g: f64, shape: Option<u32> },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ScheduleSpec {
    Constant { sigma: f64 },
    /// Constant `σ = 1/√T`.
    Gbm,
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
    PiecewiseLinear { breaks: Vec<f64>, values: Vec<f64> },
    File { path: PathBuf },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssetSpec {
    id: String,
    flows: Vec<FlowSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowSpec {
    pay_date: f64,
    payoff: String,
}

/// Parameters of stochastic jobs; command-line flags take precedence.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub grid: Option<usize>,
    pub horizon: Option<f64>,
}

/// Command-line overrides applied while building the scenario.
#[derive(Debug, Default, Clone, Copy)]
pub struct Overrides {
    pub nodes: Option<usize>,
    pub eps: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub market: Market,
    pub job: JobSpec,
    pub nodes: usize,
}

impl Scenario {
    pub fn load(path: &Path, overrides: Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading scenario {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, overrides).with_context(|| format!("in scenario {}", path.display()))
    }

    pub fn parse(text: &str, base_dir: &Path, overrides: Overrides) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text)?;
        let nodes = overrides.nodes.or(file.numerics.nodes).unwrap_or(DEFAULT_NODES);
        let eps = overrides.eps.or(file.numerics.eps);
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };

        let curve = match &file.curve {
            CurveSpec::Flat { rate } => DiscountCurve::flat(*rate),
            CurveSpec::Points { points } => DiscountCurve::tabulated(points.iter().map(|p| (p[0], p[1])).collect()),
            CurveSpec::File { path } => DiscountCurve::load_csv(resolve(path)),
        }
        .context("field `curve`")?;

        if file.factors.is_empty() {
            bail!("scenario defines no [[factor]]");
        }
        let mut factors = Vec::with_capacity(file.factors.len());
        for (i, f) in file.factors.iter().enumerate() {
            let label = format!("factor[{i}] (`{}`)", f.id);
            let prior = build_prior(&f.prior, f.maturity, &resolve).with_context(|| format!("{label}.prior"))?;
            let mut schedule =
                build_schedule(&f.schedule, f.maturity, &resolve).with_context(|| format!("{label}.schedule"))?;
            if (schedule.maturity() - f.maturity).abs() > 1e-12 * f.maturity.max(1.0) {
                bail!(
                    "{label}.schedule: schedule ends at {} but the factor matures at {}",
                    schedule.maturity(),
                    f.maturity
                );
            }
            if let Some(eps) = eps {
                schedule = schedule.with_eps_fraction(eps).with_context(|| format!("{label}: --eps"))?;
            }
            factors.push(XFactor::new(f.id.clone(), prior, schedule, nodes).with_context(|| label.clone())?);
        }
        let factors = FactorSet::new(factors)?
            .with_tensor_limit(file.numerics.tensor_limit.unwrap_or(DEFAULT_TENSOR_LIMIT));

        let mut assets = Vec::with_capacity(file.assets.len());
        for (i, a) in file.assets.iter().enumerate() {
            let flows = a
                .flows
                .iter()
                .enumerate()
                .map(|(k, fl)| {
                    CashFlow::new(fl.pay_date, &fl.payoff)
                        .with_context(|| format!("asset[{i}] (`{}`).flows[{k}].payoff `{}`", a.id, fl.payoff))
                })
                .collect::<Result<Vec<_>>>()?;
            let asset = Asset::new(a.id.clone(), flows).with_context(|| format!("asset[{i}] (`{}`)", a.id))?;
            factors.validate(&asset).with_context(|| format!("asset[{i}] (`{}`)", a.id))?;
            assets.push(asset);
        }
        let market = Market::new(factors, assets, curve)?;
        Ok(Self {
            market,
            job: file.job,
            nodes,
        })
    }

    pub fn factor_ids(&self) -> Vec<String> {
        self.market.factors.factors().iter().map(|f| f.id().to_string()).collect()
    }
}

fn build_prior(spec: &PriorSpec, maturity: f64, resolve: &dyn Fn(&Path) -> PathBuf) -> Result<PriorDistribution> {
    Ok(match spec {
        PriorSpec::DiscreteAtoms { atoms } => PriorDistribution::atoms(atoms.iter().map(|a| (a[0], a[1])).collect())?,
        PriorSpec::Degenerate { value } => PriorDistribution::degenerate(*value)?,
        PriorSpec::Exponential { delta } => PriorDistribution::exponential(*delta)?,
        PriorSpec::Gamma { n, delta } => PriorDistribution::gamma(*n, *delta)?,
        PriorSpec::Lognormal { s0, r, vol } => PriorDistribution::lognormal(*s0, *r, *vol, maturity)?,
        PriorSpec::StandardNormal => PriorDistribution::standard_normal(),
        PriorSpec::Tabulated { xs, densities, path } => match (xs, densities, path) {
            (Some(xs), Some(d), None) => PriorDistribution::tabulated(xs.clone(), d.clone())?,
            (None, None, Some(p)) => PriorDistribution::load_tabulated_csv(resolve(p))?,
            _ => bail!("tabulated prior needs either `xs` and `densities` or `path`"),
        },
        PriorSpec::Growth { g, shape } => growth_factor_prior(*g, shape.unwrap_or(4))?,
    })
}

fn build_schedule(spec: &ScheduleSpec, maturity: f64, resolve: &dyn Fn(&Path) -> PathBuf) -> Result<FlowSchedule> {
    Ok(match spec {
        ScheduleSpec::Constant { sigma } => FlowSchedule::constant(*sigma, maturity)?,
        ScheduleSpec::Gbm => FlowSchedule::constant(1.0 / maturity.sqrt(), maturity)?,
        ScheduleSpec::PiecewiseConstant { breaks, values } => FlowSchedule::piecewise_constant(breaks, values)?,
        ScheduleSpec::PiecewiseLinear { breaks, values } => FlowSchedule::piecewise_linear(breaks, values)?,
        ScheduleSpec::File { path } => FlowSchedule::load_csv(resolve(path))?,
    })
}
