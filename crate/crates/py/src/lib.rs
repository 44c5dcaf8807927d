//! Python bindings: priors, schedules, curves, single-factor prices, options and path simulation.

use infoprice_core::filter::{ConditionalDensity, InformationState};
use infoprice_core::options::{CallSpec, CriticalValue};
use infoprice_core::pricing;
use infoprice_core::stochastic::{filter_path, simulate_information_path as simulate_path};
use infoprice_core::{DiscountCurve as CoreCurve, FlowSchedule as CoreSchedule, PriorDistribution, RngStream, TimeGrid};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: infoprice_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A priori law of a cash flow or market factor.
#[pyclass(module = "infoprice", frozen)]
pub struct Prior(PriorDistribution);

#[pymethods]
impl Prior {
    /// Exponential law with mean `delta`.
    #[staticmethod]
    fn exponential(delta: f64) -> PyResult<Self> {
        PriorDistribution::exponential(delta).map(Self).map_err(err)
    }

    #[staticmethod]
    fn gamma(n: u32, delta: f64) -> PyResult<Self> {
        PriorDistribution::gamma(n, delta).map(Self).map_err(err)
    }

    /// Discrete law from `(value, probability)` pairs.
    #[staticmethod]
    fn atoms(atoms: Vec<(f64, f64)>) -> PyResult<Self> {
        PriorDistribution::atoms(atoms).map(Self).map_err(err)
    }

    #[staticmethod]
    fn degenerate(value: f64) -> PyResult<Self> {
        PriorDistribution::degenerate(value).map(Self).map_err(err)
    }

    #[staticmethod]
    fn standard_normal() -> Self {
        Self(PriorDistribution::standard_normal())
    }

    #[staticmethod]
    fn lognormal(s0: f64, r: f64, vol: f64, maturity: f64) -> PyResult<Self> {
        PriorDistribution::lognormal(s0, r, vol, maturity).map(Self).map_err(err)
    }

    #[staticmethod]
    fn tabulated(xs: Vec<f64>, densities: Vec<f64>) -> PyResult<Self> {
        PriorDistribution::tabulated(xs, densities).map(Self).map_err(err)
    }

    fn mean(&self) -> f64 {
        self.0.mean()
    }

    fn density(&self, x: f64) -> PyResult<f64> {
        self.0.density(x).map_err(err)
    }

    fn cdf(&self, x: f64) -> f64 {
        self.0.cdf(x)
    }

    fn __repr__(&self) -> String {
        format!("Prior({:?})", self.0.kind())
    }
}

/// Deterministic information-flow rate `σ_t` on `[0, T]`.
#[pyclass(module = "infoprice", frozen)]
pub struct FlowSchedule(CoreSchedule);

#[pymethods]
impl FlowSchedule {
    #[staticmethod]
    fn constant(sigma: f64, maturity: f64) -> PyResult<Self> {
        CoreSchedule::constant(sigma, maturity).map(Self).map_err(err)
    }

    /// `values[i]` holds on `[breaks[i], breaks[i+1])`.
    #[staticmethod]
    fn piecewise_constant(breaks: Vec<f64>, values: Vec<f64>) -> PyResult<Self> {
        CoreSchedule::piecewise_constant(&breaks, &values).map(Self).map_err(err)
    }

    #[staticmethod]
    fn piecewise_linear(breaks: Vec<f64>, values: Vec<f64>) -> PyResult<Self> {
        CoreSchedule::piecewise_linear(&breaks, &values).map(Self).map_err(err)
    }

    #[getter]
    fn maturity(&self) -> f64 {
        self.0.maturity()
    }

    fn sigma(&self, t: f64) -> PyResult<f64> {
        self.0.sigma(t).map_err(err)
    }

    fn cumulative_sigma(&self, t: f64) -> PyResult<f64> {
        self.0.cumulative_sigma(t).map_err(err)
    }
}

#[pyclass(module = "infoprice", frozen)]
pub struct DiscountCurve(CoreCurve);

#[pymethods]
impl DiscountCurve {
    #[staticmethod]
    fn flat(rate: f64) -> PyResult<Self> {
        CoreCurve::flat(rate).map(Self).map_err(err)
    }

    /// Log-linear interpolation through `(t, P_{0t})` points.
    #[staticmethod]
    fn tabulated(points: Vec<(f64, f64)>) -> PyResult<Self> {
        CoreCurve::tabulated(points).map(Self).map_err(err)
    }

    fn p0(&self, t: f64) -> PyResult<f64> {
        self.0.p0(t).map_err(err)
    }

    fn discount_factor(&self, t: f64, maturity: f64) -> PyResult<f64> {
        self.0.discount_factor(t, maturity).map_err(err)
    }
}

fn state(schedule: &CoreSchedule, xi: f64, stieltjes: Option<f64>) -> PyResult<InformationState> {
    match (stieltjes, schedule.constant_sigma()) {
        (Some(s), _) => Ok(InformationState::new(xi, s)),
        (None, Some(sigma)) => Ok(InformationState::constant_sigma(sigma, xi)),
        (None, None) => Err(PyValueError::new_err("time-varying rate: pass stieltjes = ∫σ dξ")),
    }
}

/// Price at `t` of a single cash flow paid at the schedule's maturity.
#[pyfunction]
#[pyo3(signature = (prior, schedule, curve, t, xi, stieltjes = None))]
fn price_single(
    prior: PyRef<'_, Prior>,
    schedule: PyRef<'_, FlowSchedule>,
    curve: PyRef<'_, DiscountCurve>,
    t: f64,
    xi: f64,
    stieltjes: Option<f64>,
) -> PyResult<f64> {
    let info = state(&schedule.0, xi, stieltjes)?;
    pricing::price_single(&prior.0, &schedule.0, &curve.0, t, info).map_err(err)
}

/// Closed-form price for an exponential prior with mean `delta`.
#[pyfunction]
fn closed_form_exponential(
    delta: f64,
    sigma: f64,
    curve: PyRef<'_, DiscountCurve>,
    t: f64,
    maturity: f64,
    xi: f64,
) -> PyResult<f64> {
    pricing::closed_form_exponential(delta, sigma, &curve.0, t, maturity, xi).map_err(err)
}

/// Closed-form price for a gamma prior of integer shape `n` and rate `delta`.
#[pyfunction]
fn closed_form_gamma(
    n: u32,
    delta: f64,
    sigma: f64,
    curve: PyRef<'_, DiscountCurve>,
    t: f64,
    maturity: f64,
    xi: f64,
) -> PyResult<f64> {
    pricing::closed_form_gamma(n, delta, sigma, &curve.0, t, maturity, xi).map_err(err)
}

/// `∫ₓ^∞ zᵏ e^{−z²/2} dz`.
#[pyfunction]
fn f_k(k: usize, x: f64) -> f64 {
    pricing::f_k(k, x)
}

#[pyfunction]
fn price_gbm_factor(s0: f64, r: f64, vol: f64, sigma: f64, maturity: f64, t: f64, xi: f64) -> PyResult<f64> {
    pricing::price_gbm_factor(s0, r, vol, sigma, maturity, t, xi).map_err(err)
}

/// European call on a single-flow asset, struck at `strike`, exercised at `expiry`.
#[pyclass(module = "infoprice", frozen)]
pub struct CallOption(CallSpec);

#[pymethods]
impl CallOption {
    #[new]
    fn new(
        strike: f64,
        expiry: f64,
        prior: PyRef<'_, Prior>,
        schedule: PyRef<'_, FlowSchedule>,
        curve: PyRef<'_, DiscountCurve>,
    ) -> PyResult<Self> {
        CallSpec::new(strike, expiry, prior.0.clone(), schedule.0.clone(), curve.0.clone())
            .map(Self)
            .map_err(err)
    }

    fn call(&self) -> PyResult<f64> {
        self.0.call_price_analytic().map_err(err)
    }

    fn put(&self) -> PyResult<f64> {
        self.0.put_price_analytic().map_err(err)
    }

    /// Present value of the payoff at expiry less the discounted strike.
    fn forward(&self) -> PyResult<f64> {
        self.0.forward_value().map_err(err)
    }

    /// `("root", y*)`, `("always_in", None)` or `("always_out", None)`.
    fn critical_value(&self) -> PyResult<(&'static str, Option<f64>)> {
        Ok(match self.0.critical_value().map_err(err)? {
            CriticalValue::Root(y) => ("root", Some(y)),
            CriticalValue::AlwaysIn => ("always_in", None),
            CriticalValue::AlwaysOut => ("always_out", None),
        })
    }

    /// Monte Carlo estimate and its standard error.
    fn monte_carlo(&self, py: Python<'_>, n_paths: usize, seed: u64) -> PyResult<(f64, f64)> {
        py.detach(|| self.0.call_price_mc(n_paths, seed)).map_err(err)
    }
}

/// One information path on a uniform grid, with the filtered conditional mean.
///
/// Returns a dict with keys `t`, `xi`, `bridge`, `mean`, `variance` (lists) and `factor_value`.
#[pyfunction]
#[pyo3(signature = (prior, schedule, horizon, steps, seed, stream = 0, nodes = infoprice_core::numerics::DEFAULT_NODES))]
#[allow(clippy::too_many_arguments)]
fn simulate_information_path<'py>(
    py: Python<'py>,
    prior: PyRef<'_, Prior>,
    schedule: PyRef<'_, FlowSchedule>,
    horizon: f64,
    steps: usize,
    seed: u64,
    stream: u64,
    nodes: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let grid = TimeGrid::uniform(horizon, steps).map_err(err)?;
    let mut rng = RngStream::new(seed, stream);
    let path = simulate_path(&prior.0, &schedule.0, &grid, &mut rng).map_err(err)?;
    let base = ConditionalDensity::from_prior(&prior.0, nodes).map_err(err)?;
    let filtered = filter_path(&base, &path).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("t", grid.nodes().to_vec())?;
    out.set_item("xi", path.xi.clone())?;
    out.set_item("bridge", path.bridge.clone())?;
    out.set_item("mean", filtered.iter().map(|d| d.mean()).collect::<Vec<_>>())?;
    out.set_item("variance", filtered.iter().map(|d| d.variance()).collect::<Vec<_>>())?;
    out.set_item("factor_value", path.factor_value)?;
    Ok(out)
}

#[pymodule]
fn infoprice(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Prior>()?;
    m.add_class::<FlowSchedule>()?;
    m.add_class::<DiscountCurve>()?;
    m.add_class::<CallOption>()?;
    m.add_function(wrap_pyfunction!(price_single, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_exponential, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(f_k, m)?)?;
    m.add_function(wrap_pyfunction!(price_gbm_factor, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_information_path, m)?)?;
    Ok(())
}
