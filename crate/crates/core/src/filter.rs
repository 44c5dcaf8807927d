//! The conditional density `π_t(x)` of a factor given market information.
//!
//! A density lives on a fixed support (exact atoms, or the prior-adapted
//! quadrature nodes) and is stored as normalized log-weights. Conditioning on
//! information only reweights the support: node `x` receives the extra log-weight
//!
//! ```text
//! x·[Σ(t)ξ_t/(T−t) + ∫σ dξ] − ½x²·[Σ(t)²/(T−t) + ∫σ² ds]
//! ```
//!
//! where the integrals run from the start of the schedule.

use crate::error::{Error, Result};
use crate::market::FlowSchedule;
use crate::numerics::logsumexp_weights;
use crate::priors::PriorDistribution;
use std::sync::Arc;

/// Information observed for one factor at time `t`: `ξ_t` and the Itô sum `∫σ_s dξ_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InformationState {
    pub xi: f64,
    pub stieltjes: f64,
}

impl InformationState {
    pub fn new(xi: f64, stieltjes: f64) -> Self {
        Self { xi, stieltjes }
    }

    /// For a constant rate the Stieltjes term is exactly `σ ξ_t`.
    pub fn constant_sigma(sigma: f64, xi: f64) -> Self {
        Self {
            xi,
            stieltjes: sigma * xi,
        }
    }
}

/// Snapshot of the filter at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDensity {
    t: f64,
    nodes: Arc<[f64]>,
    log_weights: Vec<f64>,
    normalizer_log: f64,
}

impl ConditionalDensity {
    /// The prior on its default support, as a time-0 density.
    pub fn from_prior(prior: &PriorDistribution, nodes: usize) -> Result<Self> {
        let d = prior.discretize(nodes)?;
        Self::from_log_masses(0.0, d.nodes, &d.log_masses)
    }

    /// Normalizes arbitrary log-masses on `nodes` into a density at time `t`.
    pub fn from_log_masses(t: f64, nodes: Vec<f64>, log_masses: &[f64]) -> Result<Self> {
        if nodes.len() != log_masses.len() || nodes.is_empty() {
            return Err(Error::InvalidParameter("support and log-masses must have equal nonzero length".into()));
        }
        let (log_total, _) = logsumexp_weights(log_masses)?;
        Ok(Self {
            t,
            nodes: nodes.into(),
            log_weights: log_masses.iter().map(|l| l - log_total).collect(),
            normalizer_log: log_total,
        })
    }

    /// Point mass at `value` (a factor whose value has been revealed).
    pub fn degenerate(t: f64, value: f64) -> Self {
        Self {
            t,
            nodes: vec![value].into(),
            log_weights: vec![0.0],
            normalizer_log: 0.0,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// `log Φ_t`, the log of the total unnormalized mass relative to the base density.
    pub fn normalizer_log(&self) -> f64 {
        self.normalizer_log
    }

    pub fn weights(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes
            .iter()
            .zip(&self.log_weights)
            .map(|(&x, &l)| (x, l.exp()))
    }

    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.weights().filter(|(_, w)| *w > 0.0).map(|(x, w)| w * f(x)).sum()
    }

    /// `D_{tT} = E_t[X]`.
    pub fn mean(&self) -> f64 {
        self.expectation(|x| x)
    }

    /// `V_t = E_t[(X − D_{tT})²]`.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expectation(|x| (x - m) * (x - m))
    }

    /// `κ_t = E_t[(X − D_{tT})³]`.
    pub fn third_central(&self) -> f64 {
        let m = self.mean();
        self.expectation(|x| (x - m).powi(3))
    }

    /// Copy of the density with each node's log-weight shifted by `delta(x)`, renormalized.
    fn reweighted<F: Fn(f64) -> f64>(&self, t: f64, delta: F) -> Result<Self> {
        let shifted: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.log_weights)
            .map(|(&x, &l)| if l == f64::NEG_INFINITY { l } else { l + delta(x) })
            .collect();
        let (log_total, _) = match logsumexp_weights(&shifted) {
            Err(Error::ZeroMass) => return Err(Error::MassCollapse { step: 0 }),
            other => other?,
        };
        if !log_total.is_finite() {
            return Err(Error::MassCollapse { step: 0 });
        }
        Ok(Self {
            t,
            nodes: self.nodes.clone(),
            log_weights: shifted.iter().map(|l| l - log_total).collect(),
            normalizer_log: log_total,
        })
    }
}

/// Linear and quadratic exponent coefficients `(a, b)` of the filter at `t`.
pub fn exponent_coefficients(schedule: &FlowSchedule, t: f64, info: InformationState) -> Result<(f64, f64)> {
    schedule.check_regular(t)?;
    let big = schedule.cumulative_sigma(t)?;
    let tau = schedule.maturity() - t;
    let a = big * info.xi / tau + info.stieltjes;
    let b = big * big / tau + schedule.cumulative_sigma_sq(t)?;
    Ok((a, b))
}

/// Conditions `base` (the density at the schedule's start) on the information at `t`.
pub fn condition_from(
    base: &ConditionalDensity,
    schedule: &FlowSchedule,
    t: f64,
    info: InformationState,
) -> Result<ConditionalDensity> {
    if (base.t - schedule.start()).abs() > 1e-12 * schedule.maturity().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "base density is at t = {} but the schedule starts at {}",
            base.t,
            schedule.start()
        )));
    }
    if !info.xi.is_finite() || !info.stieltjes.is_finite() {
        return Err(Error::NonFinite("information state".into()));
    }
    let (a, b) = exponent_coefficients(schedule, t, info)?;
    base.reweighted(t, |x| x * a - 0.5 * x * x * b)
}

/// `π_t` for a prior, on the prior's default support.
pub fn condition(
    prior: &PriorDistribution,
    schedule: &FlowSchedule,
    t: f64,
    info: InformationState,
) -> Result<ConditionalDensity> {
    let base = ConditionalDensity::from_prior(prior, crate::numerics::DEFAULT_NODES)?;
    condition_from(&base, schedule, t, info)
}

/// One Euler step of `dπ = ν_t (x − D_{tT}) π dW`, followed by renormalization.
///
/// Nodes whose multiplier `1 + ν(x − D)dW` is not positive lose all their mass.
pub fn evolve_density_sde(cd: &ConditionalDensity, dw: f64, dt: f64, nu_t: f64) -> Result<ConditionalDensity> {
    if !dw.is_finite() || !dt.is_finite() || !nu_t.is_finite() {
        return Err(Error::NonFinite("density SDE increment".into()));
    }
    let d = cd.mean();
    cd.reweighted(cd.t + dt, |x| {
        let factor = 1.0 + nu_t * (x - d) * dw;
        if factor > 0.0 {
            factor.ln()
        } else {
            f64::NEG_INFINITY
        }
    })
}

/// Information of the re-initialised process on `[s, T]`.
///
/// Returns `η_t = ξ_t − (T−t)/(T−s) ξ_s` and `∫_s^t σ̃ dη`, given the original
/// `ξ` and Itô sums `∫₀σ dξ` at `s` and `t`.
pub fn reinitialized_information(
    schedule: &FlowSchedule,
    s: f64,
    t: f64,
    at_s: InformationState,
    at_t: InformationState,
) -> Result<InformationState> {
    if s > t {
        return Err(Error::InvalidParameter(format!("re-initialisation time {s} after {t}")));
    }
    let maturity = schedule.maturity();
    let shift = schedule.cumulative_sigma(s)? / (maturity - s);
    let tilde_sigma = schedule.cumulative_sigma(t)? - schedule.cumulative_sigma(s)? + shift * (t - s);
    let eta = at_t.xi - (maturity - t) / (maturity - s) * at_s.xi;
    let stieltjes = (at_t.stieltjes - at_s.stieltjes) + shift * (at_t.xi - at_s.xi) + at_s.xi / (maturity - s) * tilde_sigma;
    Ok(InformationState::new(eta, stieltjes))
}

/// Updates the filter state at `s` to time `t` using the re-initialised schedule
/// and information process.
pub fn consistency_reinitialize(
    cd_s: &ConditionalDensity,
    schedule: &FlowSchedule,
    s: f64,
    t: f64,
    eta: InformationState,
) -> Result<ConditionalDensity> {
    if s > t {
        return Err(Error::InvalidParameter(format!("re-initialisation time {s} after {t}")));
    }
    if s == t {
        return Ok(cd_s.clone());
    }
    let tilde = schedule.reinitialize(s)?;
    condition_from(cd_s, &tilde, t, eta)
}
