//! Grid sweeps over collision energy or dipole moment, summed over every
//! channel allowed by the exchange symmetry, plus resonance detection and the
//! two fitters built on top of them.

mod dataset;
mod fit;
mod series;

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::potential::{symmetry_blocks, AdiabaticPotential, Channel, ChannelBasis, CollisionSystem};
use crate::propagator::{propagate, CalibratedParams, GridPolicy};
use crate::units;

pub use dataset::{DataRow, Dataset};
pub use fit::{fit_short_range, FitParameter, FitSpec, ShortRangeFit};
pub use series::{fit_resonance_series, ResonanceSeries};

/// Collision energy for dipole scans, in μK (250 nK).
pub const DEFAULT_SCAN_ENERGY_UK: f64 = 0.25;
pub const DEFAULT_L_MAX: u32 = 7;
pub const DEFAULT_PROMINENCE: f64 = 1.5;
/// Window of the running-median baseline used by [`detect_resonances`].
pub const BASELINE_WINDOW: usize = 15;

pub fn default_scan_energy() -> f64 {
    units::microkelvin_to_hartree(DEFAULT_SCAN_ENERGY_UK)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Energy,
    Dipole,
}

/// One grid point. Rates are quenching rate constants in atomic units;
/// ±M channels are listed separately.
#[derive(Clone, Debug, PartialEq)]
pub struct RatePoint {
    pub x: f64,
    pub total: f64,
    pub per_channel: BTreeMap<Channel, f64>,
    pub p_loss: BTreeMap<Channel, f64>,
    /// Largest propagation error estimate |ΔS| over the channels.
    pub error_estimate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateCurve {
    pub axis: Axis,
    pub points: Vec<RatePoint>,
}

impl RateCurve {
    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn totals(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.total).collect()
    }

    /// Union of the channels present at any point, in order.
    pub fn channels(&self) -> Vec<Channel> {
        let mut all: Vec<Channel> = self.points.iter().flat_map(|p| p.per_channel.keys().copied()).collect();
        all.sort_unstable();
        all.dedup();
        all
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanConfig {
    pub l_max: u32,
    pub policy: GridPolicy,
    /// Worker threads; 0 uses the global rayon pool.
    pub threads: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { l_max: DEFAULT_L_MAX, policy: GridPolicy::default(), threads: 0 }
    }
}

impl ScanConfig {
    pub fn with_l_max(mut self, l_max: u32) -> Self {
        self.l_max = l_max;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }
}

/// Which channels an energy scan propagates.
#[derive(Clone, Debug, PartialEq)]
pub enum ChannelSelection {
    All,
    Only(Vec<Channel>),
}

/// A failed scan: the first error in grid order, with (x, channel) context,
/// and every grid point completed before it.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanFailure {
    pub error: Error,
    pub partial: RateCurve,
}

impl fmt::Display for ScanFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} grid points completed)", self.error, self.partial.points.len())
    }
}

impl std::error::Error for ScanFailure {}

impl From<ScanFailure> for Error {
    fn from(failure: ScanFailure) -> Self {
        failure.error
    }
}

pub type ScanResult = std::result::Result<RateCurve, ScanFailure>;

struct Task {
    point: usize,
    basis: usize,
    channel: Channel,
}

struct Outcome {
    rate: f64,
    p_loss: f64,
    error_estimate: f64,
}

/// Channels with M ≥ 0 of every block, paired with the index of their block.
fn block_channels(blocks: &[ChannelBasis], selection: &ChannelSelection) -> Vec<(usize, Channel)> {
    let mut out = Vec::new();
    for (b, block) in blocks.iter().enumerate() {
        for &channel in block.channels() {
            let wanted = match selection {
                ChannelSelection::All => true,
                ChannelSelection::Only(list) => {
                    list.iter().any(|c| c.l == channel.l && c.m.unsigned_abs() == channel.m.unsigned_abs())
                }
            };
            if wanted {
                out.push((b, channel));
            }
        }
    }
    out
}

fn run_tasks<F>(config: &ScanConfig, tasks: &[Task], job: F) -> Result<Vec<Result<Outcome>>>
where
    F: Fn(&Task) -> Result<Outcome> + Sync,
{
    if config.threads == 0 {
        return Ok(tasks.par_iter().map(&job).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {} worker threads: {e}", config.threads)))?;
    Ok(pool.install(|| tasks.par_iter().map(&job).collect()))
}

fn scan(
    axis: Axis,
    xs: &[f64],
    systems: &[CollisionSystem],
    energies: &[f64],
    calibrated: &CalibratedParams,
    selection: &ChannelSelection,
    config: &ScanConfig,
) -> ScanResult {
    let empty = RateCurve { axis, points: Vec::new() };
    let fail = |error: Error, points: Vec<RatePoint>| ScanFailure { error, partial: RateCurve { axis, points } };

    let symmetry = systems[0].symmetry();
    let blocks = symmetry_blocks(symmetry, config.l_max);
    let channels = block_channels(&blocks, selection);
    if channels.is_empty() {
        return Err(fail(Error::invalid("channel selection matches no allowed channel"), Vec::new()));
    }
    if let Err(e) = config.policy.validate() {
        return Err(fail(e, Vec::new()));
    }

    let tasks: Vec<Task> = (0..xs.len())
        .flat_map(|point| channels.iter().map(move |&(basis, channel)| Task { point, basis, channel }))
        .collect();
    let job = |task: &Task| -> Result<Outcome> {
        let system = &systems[task.point];
        let potential = AdiabaticPotential::new(system, &blocks[task.basis], task.channel)?;
        let result = propagate(&potential, calibrated, energies[task.point], &config.policy)?;
        Ok(Outcome { rate: result.rates.quenching, p_loss: result.p_loss, error_estimate: result.error_estimate })
    };
    let outcomes = match run_tasks(config, &tasks, job) {
        Ok(o) => o,
        Err(e) => return Err(fail(e, empty.points)),
    };

    let mut points = Vec::with_capacity(xs.len());
    for (i, chunk) in outcomes.chunks(channels.len()).enumerate() {
        let mut per_channel = BTreeMap::new();
        let mut p_loss = BTreeMap::new();
        let mut error_estimate: f64 = 0.0;
        for (outcome, &(_, channel)) in chunk.iter().zip(&channels) {
            let outcome = match outcome {
                Ok(o) => o,
                Err(e) => {
                    let error = Error::Scan {
                        dipole: systems[i].dipole(),
                        energy: energies[i],
                        l: channel.l,
                        m: channel.m,
                        source: Box::new(e.clone()),
                    };
                    return Err(fail(error, points));
                }
            };
            error_estimate = error_estimate.max(outcome.error_estimate);
            let mirrors =
                if channel.m == 0 { vec![channel] } else { vec![Channel { m: -channel.m, ..channel }, channel] };
            for c in mirrors {
                per_channel.insert(c, outcome.rate);
                p_loss.insert(c, outcome.p_loss);
            }
        }
        let total = per_channel.values().sum();
        points.push(RatePoint { x: xs[i], total, per_channel, p_loss, error_estimate });
    }
    Ok(RateCurve { axis, points })
}

fn check_grid(name: &str, grid: &[f64], strictly_positive: bool) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(format!("{name} grid is empty")));
    }
    for &x in grid {
        let ok = x.is_finite() && if strictly_positive { x > 0.0 } else { x >= 0.0 };
        if !ok {
            return Err(Error::invalid(format!("{name} grid value {x} is out of range")));
        }
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

/// Total quenching rate versus dipole moment (a.u.) at fixed energy, summed
/// over every channel up to `config.l_max`.
pub fn scan_dipole(
    system: &CollisionSystem,
    calibrated: &CalibratedParams,
    energy: f64,
    d_grid: &[f64],
    config: &ScanConfig,
) -> ScanResult {
    let precondition =
        |e: Error| ScanFailure { error: e, partial: RateCurve { axis: Axis::Dipole, points: Vec::new() } };
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(precondition(Error::invalid(format!("energy must be positive, got {energy}"))));
    }
    check_grid("dipole", d_grid, false).map_err(precondition)?;
    let systems = d_grid.iter().map(|&d| system.with_dipole(d)).collect::<Result<Vec<_>>>().map_err(precondition)?;
    let energies = vec![energy; d_grid.len()];
    scan(Axis::Dipole, d_grid, &systems, &energies, calibrated, &ChannelSelection::All, config)
}

/// Per-channel loss probabilities and rates versus collision energy (hartree).
pub fn scan_energy(
    system: &CollisionSystem,
    calibrated: &CalibratedParams,
    selection: &ChannelSelection,
    e_grid: &[f64],
    config: &ScanConfig,
) -> ScanResult {
    let precondition =
        |e: Error| ScanFailure { error: e, partial: RateCurve { axis: Axis::Energy, points: Vec::new() } };
    check_grid("energy", e_grid, true).map_err(precondition)?;
    let systems = vec![system.clone(); e_grid.len()];
    scan(Axis::Energy, e_grid, &systems, e_grid, calibrated, selection, config)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resonance {
    pub position: f64,
    /// Peak rate over the running-median baseline.
    pub prominence: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Running median of `values` over `window` points, truncated at the ends.
pub fn running_median(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            median(&mut values[lo..hi].to_vec())
        })
        .collect()
}

/// Vertex of the parabola through three points; falls back to the middle one.
fn parabolic_peak(x: [f64; 3], y: [f64; 3]) -> f64 {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let curvature = (d2 - d1) / (x[2] - x[0]);
    if !(curvature < 0.0) {
        return x[1];
    }
    let vertex = 0.5 * (x[0] + x[1]) - d1 / (2.0 * curvature);
    vertex.clamp(x[0], x[2])
}

/// Interior local maxima of K_total standing above `threshold` times the
/// running-median baseline.
pub fn detect_resonances(curve: &RateCurve, threshold: f64) -> Vec<Resonance> {
    let xs = curve.xs();
    let ks = curve.totals();
    if ks.len() < 3 {
        return Vec::new();
    }
    let baseline = running_median(&ks, BASELINE_WINDOW);
    let mut found = Vec::new();
    for i in 1..ks.len() - 1 {
        if !(ks[i] > ks[i - 1] && ks[i] >= ks[i + 1]) || !(baseline[i] > 0.0) {
            continue;
        }
        let prominence = ks[i] / baseline[i];
        if prominence > threshold {
            let position = parabolic_peak([xs[i - 1], xs[i], xs[i + 1]], [ks[i - 1], ks[i], ks[i + 1]]);
            found.push(Resonance { position, prominence });
        }
    }
    found
}
