//! Information-based asset pricing.
//!
//! Market information about a future cash flow `D_T` is modelled as the process
//! `ξ_t = D_T ∫₀ᵗ σ_s ds + β_{tT}`, where `β_{tT}` is a Brownian bridge pinned to zero
//! at `0` and `T`. Prices are discounted conditional expectations of the cash flows
//! given the filtration generated by `ξ`, which makes the conditional density of
//! `D_T` (the filter) the central object of the crate.
//!
//! Module map:
//!
//! * [`numerics`] normal CDF, log-sum-exp weights, semi-infinite quadrature, root finding, time grids
//! * [`priors`] a priori laws of dividends and market factors
//! * [`market`] discount curves and information-flow schedules
//! * [`stochastic`] bridges, information paths, innovations and the inverse round trip
//! * [`filter`] conditional densities and their moments
//! * [`pricing`] single and multi-factor prices, closed forms, volatility structure
//! * [`options`] European calls: analytic formulas and a Monte Carlo oracle

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod filter;
pub mod market;
pub mod numerics;
pub mod options;
pub mod pricing;
pub mod priors;
pub mod stochastic;

pub use error::{Error, Result};
pub use filter::{ConditionalDensity, InformationState};
pub use market::{DiscountCurve, FlowSchedule};
pub use numerics::{QuadratureRule, TimeGrid};
pub use priors::PriorDistribution;
pub use stochastic::{InformationPath, RngStream};
