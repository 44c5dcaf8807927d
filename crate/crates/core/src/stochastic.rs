//! Random path generation: Brownian bridges, information paths, innovations and
//! the inverse (density-to-information) round trip.

use crate::error::{Error, Result};
use crate::filter::{condition_from, evolve_density_sde, ConditionalDensity, InformationState};
use crate::market::FlowSchedule;
use crate::numerics::{stats, TimeGrid};
use crate::priors::PriorDistribution;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Random stream keyed by `(seed, stream_id)`.
///
/// Each stream is an independent ChaCha8 stream of the same key, so a path's
/// draws depend only on its index and never on scheduling.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Runs `f` once per stream id `0..n_paths` in parallel and returns the results in path order.
pub fn ensemble<T, F>(seed: u64, n_paths: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, RngStream) -> Result<T> + Sync + Send,
{
    (0..n_paths as u64)
        .into_par_iter()
        .map(|id| f(id, RngStream::new(seed, id)))
        .collect()
}

/// Exact draw of a standard Brownian bridge on `[0, T]` at the grid nodes.
///
/// Nodes are filled sequentially from the Gaussian law of `β_{t_{i+1}}` given
/// `β_{t_i}` and the pin `β_T = 0`.
pub fn sample_bridge(maturity: f64, grid: &TimeGrid, rng: &mut RngStream) -> Result<Vec<f64>> {
    grid.check_within(maturity)?;
    let nodes = grid.nodes();
    let mut out = Vec::with_capacity(nodes.len());
    out.push(0.0);
    for w in nodes.windows(2) {
        let (s, t) = (w[0], w[1]);
        let prev = *out.last().unwrap();
        let remaining = maturity - s;
        let mean = prev * (maturity - t) / remaining;
        let var = (t - s) * (maturity - t) / remaining;
        let z = rng.normal();
        out.push(if var > 0.0 { mean + var.sqrt() * z } else { mean });
    }
    Ok(out)
}

/// One simulated trajectory of a factor's information process.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationPath {
    pub grid: TimeGrid,
    pub factor_value: f64,
    pub bridge: Vec<f64>,
    pub xi: Vec<f64>,
    pub schedule: FlowSchedule,
}

impl InformationPath {
    /// Builds `ξ_i = X·Σ(t_i) + β_i` from a factor value and bridge values.
    pub fn from_parts(schedule: &FlowSchedule, grid: TimeGrid, factor_value: f64, bridge: Vec<f64>) -> Result<Self> {
        if bridge.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} bridge values for {} grid nodes",
                bridge.len(),
                grid.len()
            )));
        }
        let xi = grid
            .nodes()
            .iter()
            .zip(&bridge)
            .map(|(&t, &b)| Ok(factor_value * schedule.cumulative_sigma(t)? + b))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            grid,
            factor_value,
            bridge,
            xi,
            schedule: schedule.clone(),
        })
    }

    /// Itô sums `∫₀^{t_i} σ dξ` at every node.
    pub fn stieltjes(&self) -> Result<Vec<f64>> {
        stieltjes_sums(&self.schedule, &self.grid, &self.xi)
    }

    /// Information states at every node.
    pub fn information(&self) -> Result<Vec<InformationState>> {
        Ok(self
            .xi
            .iter()
            .zip(self.stieltjes()?)
            .map(|(&xi, s)| InformationState::new(xi, s))
            .collect())
    }

    /// Path restricted to the first `len` nodes.
    pub fn prefix(&self, len: usize) -> Self {
        Self {
            grid: TimeGrid::new(self.grid.nodes()[..len].to_vec()).expect("prefix of a valid grid"),
            factor_value: self.factor_value,
            bridge: self.bridge[..len].to_vec(),
            xi: self.xi[..len].to_vec(),
            schedule: self.schedule.clone(),
        }
    }

    /// Path sampled on every `step`-th node of this one.
    pub fn subsample(&self, step: usize) -> Self {
        let pick = |v: &[f64]| v.iter().step_by(step).copied().collect::<Vec<f64>>();
        Self {
            grid: TimeGrid::new(pick(self.grid.nodes())).expect("subsample of a valid grid"),
            factor_value: self.factor_value,
            bridge: pick(&self.bridge),
            xi: pick(&self.xi),
            schedule: self.schedule.clone(),
        }
    }
}

/// Left-endpoint sums of `∫σ dξ` along a grid. For a constant rate the sum telescopes to `σ ξ_t`.
pub fn stieltjes_sums(schedule: &FlowSchedule, grid: &TimeGrid, xi: &[f64]) -> Result<Vec<f64>> {
    if xi.len() != grid.len() {
        return Err(Error::GridMismatch(format!("{} ξ values for {} grid nodes", xi.len(), grid.len())));
    }
    if let Some(sigma) = schedule.constant_sigma() {
        return Ok(xi.iter().map(|x| sigma * (x - xi[0])).collect());
    }
    let mut out = Vec::with_capacity(xi.len());
    out.push(0.0);
    for i in 0..xi.len() - 1 {
        let sigma = schedule.sigma(grid.nodes()[i])?;
        out.push(out[i] + sigma * (xi[i + 1] - xi[i]));
    }
    Ok(out)
}

fn check_path_grid(schedule: &FlowSchedule, grid: &TimeGrid) -> Result<()> {
    let maturity = schedule.maturity();
    grid.check_within(maturity)?;
    let nodes = grid.nodes();
    let regular = schedule.last_regular_time();
    if let Some(&bad) = nodes[..nodes.len() - 1].iter().find(|&&t| t > regular) {
        return Err(Error::TimeOutOfRange {
            t: bad,
            lower: 0.0,
            upper: regular,
        });
    }
    Ok(())
}

/// Draws a factor value from the prior, then an exact bridge, and forms `ξ`.
pub fn simulate_information_path(
    prior: &PriorDistribution,
    schedule: &FlowSchedule,
    grid: &TimeGrid,
    rng: &mut RngStream,
) -> Result<InformationPath> {
    check_path_grid(schedule, grid)?;
    let factor_value = prior.sample(rng);
    let bridge = sample_bridge(schedule.maturity(), grid, rng)?;
    InformationPath::from_parts(schedule, grid.clone(), factor_value, bridge)
}

/// Filter states along a path; a node at the maturity yields the revealed value.
pub fn filter_path(base: &ConditionalDensity, path: &InformationPath) -> Result<Vec<ConditionalDensity>> {
    let info = path.information()?;
    let maturity = path.schedule.maturity();
    path.grid
        .nodes()
        .iter()
        .zip(info)
        .map(|(&t, state)| {
            if t >= maturity {
                Ok(ConditionalDensity::degenerate(t, path.factor_value))
            } else {
                condition_from(base, &path.schedule, t, state)
            }
        })
        .collect()
}

/// Innovation `W_t = ξ_t + ∫ξ_s/(T−s) ds − ∫ν_s D_{sT} ds`, trapezoidal in time.
///
/// `dtt` holds the conditional means `D_{t_i T}` on the path's grid.
pub fn reconstruct_innovation(path: &InformationPath, dtt: &[f64]) -> Result<Vec<f64>> {
    if dtt.len() != path.grid.len() {
        return Err(Error::GridMismatch(format!(
            "{} conditional means for {} grid nodes",
            dtt.len(),
            path.grid.len()
        )));
    }
    let schedule = &path.schedule;
    let maturity = schedule.maturity();
    let nodes = path.grid.nodes();
    let drift = |i: usize| -> Result<f64> {
        Ok(path.xi[i] / (maturity - nodes[i]) - schedule.nu(nodes[i])? * dtt[i])
    };
    let mut w = Vec::with_capacity(nodes.len());
    w.push(0.0);
    let mut prev = drift(0)?;
    for i in 0..nodes.len() - 1 {
        let next = drift(i + 1)?;
        let h = nodes[i + 1] - nodes[i];
        w.push(w[i] + (path.xi[i + 1] - path.xi[i]) + 0.5 * h * (prev + next));
        prev = next;
    }
    Ok(w)
}

/// Result of pushing one path through the innovation and back.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrip {
    pub path: InformationPath,
    pub innovation: Vec<f64>,
    /// `D_{tT}` of the exact filter.
    pub filtered_mean: Vec<f64>,
    /// `D_{tT}` of the density driven by the innovation through the SDE.
    pub evolved_mean: Vec<f64>,
    pub xi_reconstructed: Vec<f64>,
}

impl RoundTrip {
    pub fn xi_original(&self) -> &[f64] {
        &self.path.xi
    }

    pub fn max_abs_error(&self) -> f64 {
        self.path
            .xi
            .iter()
            .zip(&self.xi_reconstructed)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Round trip on a given path: filter, innovation, density SDE, then the rebuilt `ξ`.
///
/// The SDE `dπ = ν(x − D)π dW` is stepped by Euler with renormalization; `ξ` is
/// rebuilt from `dξ = dW + (νD − ξ/(T−t)) dt`, the differential form of
/// `ξ_t = (T−t)∫₀ᵗ (dW_s + ν_s D_{sT} ds)/(T−s)`, using the same trapezoid rule as
/// the innovation so that the two transforms invert each other exactly when the
/// two conditional means agree.
pub fn roundtrip_path(base: &ConditionalDensity, path: InformationPath) -> Result<RoundTrip> {
    let schedule = path.schedule.clone();
    let maturity = schedule.maturity();
    let nodes = path.grid.nodes().to_vec();
    let filtered_mean: Vec<f64> = filter_path(base, &path)?.iter().map(|cd| cd.mean()).collect();
    let innovation = reconstruct_innovation(&path, &filtered_mean)?;

    let mut evolved_mean = Vec::with_capacity(nodes.len());
    let mut density = base.clone();
    evolved_mean.push(density.mean());
    let mut nus = Vec::with_capacity(nodes.len());
    for (i, &t) in nodes.iter().enumerate() {
        nus.push(schedule.nu(t)?);
        if i + 1 < nodes.len() {
            let dw = innovation[i + 1] - innovation[i];
            density = evolve_density_sde(&density, dw, nodes[i + 1] - t, nus[i]).map_err(|e| match e {
                Error::MassCollapse { .. } => Error::MassCollapse { step: i },
                other => other,
            })?;
            evolved_mean.push(density.mean());
        }
    }

    let mut xi_rec = Vec::with_capacity(nodes.len());
    xi_rec.push(path.xi[0]);
    for i in 0..nodes.len() - 1 {
        let h = nodes[i + 1] - nodes[i];
        let explicit = xi_rec[i] * (1.0 - 0.5 * h / (maturity - nodes[i]));
        let forcing = (innovation[i + 1] - innovation[i])
            + 0.5 * h * (nus[i] * evolved_mean[i] + nus[i + 1] * evolved_mean[i + 1]);
        xi_rec.push((explicit + forcing) / (1.0 + 0.5 * h / (maturity - nodes[i + 1])));
    }
    Ok(RoundTrip {
        path,
        innovation,
        filtered_mean,
        evolved_mean,
        xi_reconstructed: xi_rec,
    })
}

/// Simulates a path and runs [`roundtrip_path`] on it.
pub fn inverse_filter_roundtrip(
    prior: &PriorDistribution,
    base: &ConditionalDensity,
    schedule: &FlowSchedule,
    grid: &TimeGrid,
    rng: &mut RngStream,
) -> Result<RoundTrip> {
    let path = simulate_information_path(prior, schedule, grid, rng)?;
    roundtrip_path(base, path)
}

/// Ensemble summary of the round trip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundTripSummary {
    pub paths: usize,
    pub mean_max_error: f64,
    pub worst_max_error: f64,
    /// Sample correlation of `ξ_rec(t) − X·Σ(t)` with `X` at the probe node.
    pub bridge_factor_correlation: f64,
    pub correlation_se: f64,
}

/// Runs the round trip over `n_paths` streams and correlates the rebuilt bridge
/// with the factor at grid node `probe`.
pub fn inverse_roundtrip_ensemble(
    prior: &PriorDistribution,
    base: &ConditionalDensity,
    schedule: &FlowSchedule,
    grid: &TimeGrid,
    seed: u64,
    n_paths: usize,
    probe: usize,
) -> Result<RoundTripSummary> {
    if probe >= grid.len() {
        return Err(Error::GridMismatch(format!("probe node {probe} beyond grid of {}", grid.len())));
    }
    let big = schedule.cumulative_sigma(grid.nodes()[probe])?;
    let rows = ensemble(seed, n_paths, |_, mut rng| {
        let rt = inverse_filter_roundtrip(prior, base, schedule, grid, &mut rng)?;
        let x = rt.path.factor_value;
        Ok((rt.max_abs_error(), rt.xi_reconstructed[probe] - x * big, x))
    })?;
    let errors: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let betas: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let factors: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let corr = stats::correlation(&betas, &factors);
    Ok(RoundTripSummary {
        paths: n_paths,
        mean_max_error: stats::mean(&errors),
        worst_max_error: errors.iter().copied().fold(0.0, f64::max),
        bridge_factor_correlation: corr,
        correlation_se: stats::correlation_se(corr, n_paths),
    })
}

/// Round-trip errors of the same paths sampled on successively doubled grids.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementStudy {
    pub steps: Vec<usize>,
    /// Median over paths of `max_t |ξ_rec − ξ|`, one entry per grid.
    pub median_max_error: Vec<f64>,
    pub mean_max_error: Vec<f64>,
    pub worst_max_error: Vec<f64>,
}

impl RefinementStudy {
    pub fn is_monotone(&self) -> bool {
        self.median_max_error.windows(2).all(|w| w[1] < w[0])
    }
}

/// Simulates each path on the finest grid (`coarse_steps·2^doublings` steps on
/// `[0, horizon]`) and runs the round trip on it and its subsamples.
#[allow(clippy::too_many_arguments)]
pub fn roundtrip_refinement(
    prior: &PriorDistribution,
    base: &ConditionalDensity,
    schedule: &FlowSchedule,
    horizon: f64,
    coarse_steps: usize,
    doublings: u32,
    seed: u64,
    n_paths: usize,
) -> Result<RefinementStudy> {
    let finest = coarse_steps << doublings;
    let grid = TimeGrid::uniform(horizon, finest)?;
    let levels = doublings as usize + 1;
    let rows = ensemble(seed, n_paths, |_, mut rng| {
        let path = simulate_information_path(prior, schedule, &grid, &mut rng)?;
        (0..levels)
            .map(|k| roundtrip_path(base, path.subsample(1 << (levels - 1 - k))).map(|r| r.max_abs_error()))
            .collect::<Result<Vec<f64>>>()
    })?;
    let column = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<f64>>();
    Ok(RefinementStudy {
        steps: (0..levels).map(|k| coarse_steps << k).collect(),
        median_max_error: (0..levels).map(|k| stats::median(&column(k))).collect(),
        mean_max_error: (0..levels).map(|k| stats::mean(&column(k))).collect(),
        worst_max_error: (0..levels).map(|k| column(k).into_iter().fold(0.0, f64::max)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        let mut c = RngStream::new(7, 4);
        let xa: Vec<f64> = (0..5).map(|_| a.normal()).collect();
        let xb: Vec<f64> = (0..5).map(|_| b.normal()).collect();
        let xc: Vec<f64> = (0..5).map(|_| c.normal()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn bridge_is_pinned() {
        let grid = TimeGrid::uniform(2.0, 8).unwrap();
        let mut rng = RngStream::new(1, 0);
        let b = sample_bridge(2.0, &grid, &mut rng).unwrap();
        assert_eq!(b[0], 0.0);
        assert_eq!(*b.last().unwrap(), 0.0);
        assert!(sample_bridge(1.5, &grid, &mut rng).is_err());
    }

    #[test]
    fn zero_rate_information_is_the_bridge() {
        let prior = PriorDistribution::exponential(1.0).unwrap();
        let sched = FlowSchedule::constant(0.0, 1.0).unwrap();
        let grid = TimeGrid::uniform(0.9, 9).unwrap();
        let p = simulate_information_path(&prior, &sched, &grid, &mut RngStream::new(3, 0)).unwrap();
        assert_eq!(p.xi, p.bridge);
    }

    #[test]
    fn degenerate_prior_path_is_signal_plus_bridge() {
        let prior = PriorDistribution::degenerate(2.0).unwrap();
        let sched = FlowSchedule::constant(0.5, 1.0).unwrap();
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let p = simulate_information_path(&prior, &sched, &grid, &mut RngStream::new(3, 1)).unwrap();
        for ((&t, &x), &b) in grid.nodes().iter().zip(&p.xi).zip(&p.bridge) {
            assert_eq!(x, 2.0 * (0.5 * t) + b);
        }
        assert_abs_diff_eq!(*p.xi.last().unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn path_grid_must_respect_guard() {
        let prior = PriorDistribution::exponential(1.0).unwrap();
        let sched = FlowSchedule::constant(1.0, 1.0).unwrap();
        let grid = TimeGrid::new(vec![0.0, 1.0 - 1e-12, 1.0]).unwrap();
        assert!(simulate_information_path(&prior, &sched, &grid, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn stieltjes_left_sums() {
        let sched = FlowSchedule::piecewise_constant(&[0.0, 0.5, 1.0], &[1.0, 2.0]).unwrap();
        let grid = TimeGrid::new(vec![0.0, 0.25, 0.5, 0.75]).unwrap();
        let s = stieltjes_sums(&sched, &grid, &[0.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s, vec![0.0, 1.0, 3.0, 1.0]);
        let c = FlowSchedule::constant(0.3, 1.0).unwrap();
        let s = stieltjes_sums(&c, &grid, &[0.0, 1.0, 3.0, 2.0]).unwrap();
        assert_abs_diff_eq!(s[3], 0.6, epsilon = 1e-15);
        assert!(stieltjes_sums(&c, &grid, &[0.0]).is_err());
    }

    #[test]
    fn innovation_starts_at_zero_and_checks_grid() {
        let prior = PriorDistribution::exponential(1.0).unwrap();
        let sched = FlowSchedule::constant(1.0, 1.0).unwrap();
        let grid = TimeGrid::uniform(0.5, 16).unwrap();
        let p = simulate_information_path(&prior, &sched, &grid, &mut RngStream::new(5, 0)).unwrap();
        let base = ConditionalDensity::from_prior(&prior, 128).unwrap();
        let means: Vec<f64> = filter_path(&base, &p).unwrap().iter().map(|c| c.mean()).collect();
        let w = reconstruct_innovation(&p, &means).unwrap();
        assert_eq!(w[0], 0.0);
        assert!(reconstruct_innovation(&p, &means[1..]).is_err());
    }

    #[test]
    fn zero_rate_roundtrip_keeps_prior_and_reproduces_xi() {
        let prior = PriorDistribution::exponential(1.0).unwrap();
        let sched = FlowSchedule::constant(0.0, 1.0).unwrap();
        let grid = TimeGrid::uniform(0.8, 64).unwrap();
        let base = ConditionalDensity::from_prior(&prior, 128).unwrap();
        let rt = inverse_filter_roundtrip(&prior, &base, &sched, &grid, &mut RngStream::new(9, 0)).unwrap();
        assert!(rt.evolved_mean.iter().all(|&m| (m - base.mean()).abs() < 1e-15));
        assert!(rt.max_abs_error() < 1e-12);
    }
}
