//! Single-channel propagation on one adiabatic curve, from the absorbing
//! short-range boundary at R_m out to free-wave matching.

mod bessel;
mod johnson;
mod phase;
mod quadrature;

use std::f64::consts::PI;

use num_complex::Complex64;

pub use bessel::{riccati_bessel, RiccatiBessel};

use crate::error::{Error, Result};
use crate::potential::{AdiabaticPotential, Channel, CollisionSystem};
use crate::qdt::{self, ComplexScatteringLength, RateConstants, ShortRangeParams, UNITARITY_TOLERANCE};

/// Default matching radius for KRb-scale systems, bohr.
pub const DEFAULT_R_MATCH: f64 = 20.0;

/// Step and outer-radius policy of the radial grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPolicy {
    /// Steps per local de Broglie wavelength; at least 20.
    pub points_per_wavelength: f64,
    /// Steps per unit of ln R, bounding the step where the wave is slow.
    pub points_per_scale: f64,
    /// R_max is chosen so that |V_tail| ≤ tail_tolerance·E at R_max and 2R_max.
    pub tail_tolerance: f64,
    /// ... and k·R_max ≥ min_kr.
    pub min_kr: f64,
    /// Hard upper bound on R_max, bohr.
    pub r_max_limit: f64,
    /// Second matching radius relative to R_max, for the error estimate.
    pub outer_factor: f64,
    /// Beyond the first R where |V_tail| ≤ phase_switch·(E + centrifugal) the
    /// tail is integrated as a phase.
    pub phase_switch: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self {
            points_per_wavelength: 40.0,
            points_per_scale: 40.0,
            tail_tolerance: 1e-4,
            min_kr: 3.0,
            r_max_limit: 1e9,
            outer_factor: 1.2,
            phase_switch: 1e-2,
        }
    }
}

impl GridPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.points_per_wavelength >= 20.0) {
            return Err(Error::invalid(format!(
                "points per wavelength must be at least 20, got {}",
                self.points_per_wavelength
            )));
        }
        if !(self.points_per_scale > 0.0) {
            return Err(Error::invalid("points per scale must be positive"));
        }
        if !(self.tail_tolerance > 0.0 && self.tail_tolerance < 1.0) {
            return Err(Error::invalid(format!("tail tolerance must lie in (0, 1), got {}", self.tail_tolerance)));
        }
        if !(self.min_kr >= 0.0)
            || !(self.outer_factor > 1.0)
            || !(self.r_max_limit > 0.0)
            || !(self.phase_switch > 0.0)
        {
            return Err(Error::invalid("outer-radius policy out of range"));
        }
        Ok(())
    }

    /// Same policy with every step divided by `factor`.
    pub fn refined(&self, factor: f64) -> Self {
        Self {
            points_per_wavelength: self.points_per_wavelength * factor,
            points_per_scale: self.points_per_scale * factor,
            ..*self
        }
    }
}

/// Radial interval of one propagation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialGrid {
    pub r_match: f64,
    pub r_max: f64,
    pub policy: GridPolicy,
}

impl RadialGrid {
    /// Picks R_max for `potential` at `energy` by geometric search.
    pub fn new(potential: &AdiabaticPotential, energy: f64, r_match: f64, policy: GridPolicy) -> Result<Self> {
        policy.validate()?;
        if !(energy > 0.0) {
            return Err(Error::invalid(format!("energy must be positive, got {energy}")));
        }
        let k = qdt::wavenumber(potential.system().mu(), energy);
        let threshold = policy.tail_tolerance * energy;
        let mut r = (2.0 * r_match).max(policy.min_kr / k);
        loop {
            if r > policy.r_max_limit {
                return Err(Error::Grid(format!(
                    "tail still above {:.1e} of the collision energy at R = {:.3e} bohr",
                    policy.tail_tolerance, policy.r_max_limit
                )));
            }
            if potential.tail(r)?.abs() <= threshold && potential.tail(2.0 * r)?.abs() <= threshold {
                break;
            }
            r *= 1.25;
        }
        Ok(Self { r_match, r_max: r, policy })
    }

    /// Local step at R for local wavenumber κ = √(2μ|V − E|).
    pub fn step(&self, r: f64, kappa: f64) -> f64 {
        let by_wavelength = 2.0 * PI / (kappa * self.policy.points_per_wavelength);
        let by_scale = r / self.policy.points_per_scale;
        by_wavelength.min(by_scale)
    }
}

/// Short-range parameters with the phase that realizes `s`, plus optional
/// per-channel phase overrides (keyed on L and |M|).
///
/// The phase belongs to the bare s-wave curve at `reference_energy`; other
/// curves and energies add the WKB phase they gain or lose inside R_m.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibratedParams {
    pub params: ShortRangeParams,
    pub delta_sr: f64,
    pub reference_energy: f64,
    pub overrides: Vec<(Channel, f64)>,
}

impl CalibratedParams {
    pub fn new(params: ShortRangeParams, delta_sr: f64, reference_energy: f64) -> Self {
        Self { params, delta_sr, reference_energy, overrides: Vec::new() }
    }

    pub fn with_override(mut self, channel: Channel, delta: f64) -> Self {
        self.overrides.retain(|(c, _)| !(c.l == channel.l && c.m.abs() == channel.m.abs()));
        self.overrides.push((channel, delta));
        self
    }

    pub fn with_y(&self, y: f64) -> Result<Self> {
        Ok(Self { params: self.params.with_y(y)?, ..self.clone() })
    }

    pub fn phase_for(&self, channel: Channel) -> f64 {
        self.overrides
            .iter()
            .find(|(c, _)| c.l == channel.l && c.m.abs() == channel.m.abs())
            .map_or(self.delta_sr, |&(_, d)| d)
    }
}

/// WKB wave exp(−i∫κ)/√κ + r·exp(+i∫κ)/√κ at R_m, phases referenced to R_m.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryCondition {
    pub y: f64,
    pub delta_sr: f64,
    pub r_match: f64,
    pub kappa: f64,
    /// dκ/dR at R_m
    pub dkappa: f64,
    pub reflection: Complex64,
}

impl BoundaryCondition {
    pub fn new(potential: &AdiabaticPotential, y: f64, delta_sr: f64, energy: f64, r_match: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::invalid(format!("y must lie in [0, 1], got {y}")));
        }
        if !(r_match > 0.0) {
            return Err(Error::invalid(format!("matching radius must be positive, got {r_match}")));
        }
        let mu = potential.system().mu();
        let v = potential.value(r_match)?;
        let kappa_sq = 2.0 * mu * (energy - v);
        if !(kappa_sq > 0.0) {
            return Err(Error::MatchingRadius { r_match });
        }
        let kappa = kappa_sq.sqrt();
        // deeply allowed: several local wavelengths inside R_m
        if kappa * r_match < 4.0 * PI {
            return Err(Error::MatchingRadius { r_match });
        }
        let h = 1e-4 * r_match;
        let dv = (potential.value(r_match + h)? - potential.value(r_match - h)?) / (2.0 * h);
        let dkappa = -mu * dv / kappa;
        let amplitude = (1.0 - y) / (1.0 + y);
        Ok(Self { y, delta_sr, r_match, kappa, dkappa, reflection: Complex64::from_polar(amplitude, 2.0 * delta_sr) })
    }

    /// Complex ψ'/ψ at R_m (infinite at a node of the y = 0 standing wave).
    pub fn log_derivative(&self) -> Complex64 {
        1.0 / self.inverse_log_derivative()
    }

    /// ψ/ψ' at R_m, finite wherever ψ' ≠ 0.
    pub fn inverse_log_derivative(&self) -> Complex64 {
        let r = self.reflection;
        let i = Complex64::i();
        let numerator = 1.0 + r;
        let denominator = i * self.kappa * (r - 1.0) - self.dkappa / (2.0 * self.kappa) * (1.0 + r);
        numerator / denominator
    }
}

pub fn short_range_boundary(
    potential: &AdiabaticPotential,
    calibrated: &CalibratedParams,
    energy: f64,
) -> Result<BoundaryCondition> {
    let r_match = calibrated.params.r_match;
    let delta = calibrated.phase_for(potential.asymptotic_channel())
        + inner_phase(potential, energy, calibrated.reference_energy, r_match)?;
    BoundaryCondition::new(potential, calibrated.params.y, delta, energy, r_match)
}

/// ∫₀^{R_m} (κ − κ_ref) dR between `potential` at `energy` and the bare s-wave
/// curve at `reference_energy`. Both share the −C₆/R⁶ core, so the integrand
/// stays finite at R → 0.
pub fn inner_phase(potential: &AdiabaticPotential, energy: f64, reference_energy: f64, r_match: f64) -> Result<f64> {
    let mu = potential.system().mu();
    let c6 = potential.system().c6();
    let integrand = |r: f64| -> Result<f64> {
        let core = c6 / r.powi(6);
        let anisotropic = potential.anisotropic(r)?;
        let kappa_sq = 2.0 * mu * (energy + core - anisotropic);
        if !(kappa_sq > 0.0) {
            return Err(Error::MatchingRadius { r_match });
        }
        let kappa_ref = (2.0 * mu * (reference_energy + core)).sqrt();
        Ok(2.0 * mu * (energy - reference_energy - anisotropic) / (kappa_sq.sqrt() + kappa_ref))
    };
    let rule = quadrature::gauss_legendre(16);
    quadrature::integrate(integrand, 0.0, r_match, 4, &rule)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScatteringResult {
    pub channel: Channel,
    pub energy: f64,
    pub k: f64,
    pub s_matrix: Complex64,
    pub scattering_length: ComplexScatteringLength,
    /// 1 − |S|², from the flux so small losses keep full precision.
    pub p_loss: f64,
    pub rates: RateConstants,
    /// |S(R_max) − S(outer_factor·R_max)|
    pub error_estimate: f64,
    pub r_max: f64,
}

struct Matched {
    s: Complex64,
    p_loss: f64,
}

fn match_free(l: u32, k: f64, r: f64, y: Complex64) -> Result<Matched> {
    let f = riccati_bessel(l, k * r);
    let h_plus = Complex64::new(-f.n, f.j);
    let h_minus = Complex64::new(-f.n, -f.j);
    let dh_plus = Complex64::new(-f.dn, f.dj);
    let dh_minus = Complex64::new(-f.dn, -f.dj);
    let denominator = k * dh_plus - y * h_plus;
    let s = (k * dh_minus - y * h_minus) / denominator;
    if !s.is_finite() {
        return Err(Error::Unitarity { modulus: f64::INFINITY });
    }
    let p_loss = -4.0 * k * y.im / denominator.norm_sqr();
    Ok(Matched { s, p_loss })
}

/// Outermost point of the log-derivative region: past it the tail is weak
/// against centrifugal plus collision energy and is carried as a phase.
fn phase_switch_radius(potential: &AdiabaticPotential, energy: f64, grid: &RadialGrid) -> Result<f64> {
    let mu = potential.system().mu();
    let l = potential.asymptotic_channel().l as f64;
    let mut r = 2.0 * grid.r_match;
    while r < grid.r_max {
        let free = energy + l * (l + 1.0) / (2.0 * mu * r * r);
        if potential.tail(r)?.abs() <= grid.policy.phase_switch * free {
            return Ok(r);
        }
        r *= 1.25;
    }
    Ok(grid.r_max)
}

/// Complex phase shift with S = exp(2iδ); Im δ taken from the flux loss so
/// that small losses keep full precision.
fn phase_from(matched: &Matched) -> Option<Complex64> {
    let modulus = matched.s.norm();
    if modulus == 0.0 {
        return None;
    }
    let im = if matched.p_loss < 0.5 { -(-matched.p_loss).ln_1p() / 4.0 } else { -modulus.ln() / 2.0 };
    Some(Complex64::new(matched.s.arg() / 2.0, im))
}

/// Propagates from an explicit boundary condition.
pub fn propagate_from(
    potential: &AdiabaticPotential,
    boundary: &BoundaryCondition,
    energy: f64,
    policy: &GridPolicy,
) -> Result<ScatteringResult> {
    let system = potential.system();
    let mu = system.mu();
    let grid = RadialGrid::new(potential, energy, boundary.r_match, *policy)?;
    let channel = potential.asymptotic_channel();
    let k = qdt::wavenumber(mu, energy);

    let u = |r: f64| -> Result<f64> { Ok(2.0 * mu * (potential.value(r)? - energy)) };
    let step = |r: f64| -> f64 {
        let kappa = match potential.value(r) {
            Ok(v) => (2.0 * mu * (v - energy).abs()).sqrt(),
            Err(_) => k,
        };
        grid.step(r, kappa.max(k))
    };

    let r_switch = phase_switch_radius(potential, energy, &grid)?;
    let y_switch =
        johnson::propagate_log_derivative(&u, &step, boundary.inverse_log_derivative(), boundary.r_match, r_switch)?;
    let at_switch = match_free(channel.l, k, r_switch, y_switch)?;

    let u_tail = |r: f64| -> Result<f64> { Ok(2.0 * mu * potential.tail(r)?) };
    let steps = phase::PhaseStep {
        points_per_scale: policy.points_per_scale,
        points_per_wavelength: policy.points_per_wavelength,
    };
    let r_outer = grid.r_max * policy.outer_factor;
    let (delta, delta_outer) = match phase_from(&at_switch) {
        Some(d0) => {
            let d = phase::integrate_phase(&u_tail, channel.l, k, d0, r_switch, grid.r_max, &steps)?;
            let d_outer = phase::integrate_phase(&u_tail, channel.l, k, d, grid.r_max, r_outer, &steps)?;
            (d, d_outer)
        }
        // total absorption: nothing left for the tail to act on
        None => {
            let d = Complex64::new(0.0, f64::INFINITY);
            (d, d)
        }
    };

    let (s, p_loss, scattering_length) = if delta.im.is_finite() {
        let s = (2.0 * Complex64::i() * delta).exp();
        let p_loss = -(-4.0 * delta.im).exp_m1();
        let beta = p_loss / (k * (1.0 + s).norm_sqr());
        (s, p_loss, ComplexScatteringLength { alpha: -delta.tan().re / k, beta })
    } else {
        let s = Complex64::new(0.0, 0.0);
        (s, 1.0, ComplexScatteringLength { alpha: 0.0, beta: 1.0 / k })
    };
    let s_outer = if delta_outer.im.is_finite() { (2.0 * Complex64::i() * delta_outer).exp() } else { s };

    let modulus = s.norm();
    if !(modulus <= 1.0 + UNITARITY_TOLERANCE) || !(p_loss >= -UNITARITY_TOLERANCE) {
        return Err(Error::Unitarity { modulus });
    }
    let prefactor = system.statistical_factor() * PI / (mu * k);
    let rates = RateConstants { elastic: prefactor * (1.0 - s).norm_sqr(), quenching: prefactor * p_loss.max(0.0) };

    Ok(ScatteringResult {
        channel,
        energy,
        k,
        s_matrix: s,
        scattering_length,
        p_loss,
        rates,
        error_estimate: (s - s_outer).norm(),
        r_max: grid.r_max,
    })
}

pub fn propagate(
    potential: &AdiabaticPotential,
    calibrated: &CalibratedParams,
    energy: f64,
    policy: &GridPolicy,
) -> Result<ScatteringResult> {
    if !(energy > 0.0) {
        return Err(Error::invalid(format!("energy must be positive, got {energy}")));
    }
    let boundary = short_range_boundary(potential, calibrated, energy)?;
    propagate_from(potential, &boundary, energy, policy)
}

/// Calibration energy relative to E0.
pub const CALIBRATION_ENERGY: f64 = 1e-4;
const CALIBRATION_SAMPLES: usize = 48;

/// Finds δ_sr such that a y = 0 propagation on the bare s-wave curve at
/// `CALIBRATION_ENERGY`·E0 gives the scattering length s·ā.
pub fn calibrate_phase(system: &CollisionSystem, params: &ShortRangeParams, policy: &GridPolicy) -> Result<f64> {
    let e0 = qdt::characteristic_energies(system.mu(), system.c6())?.e0;
    calibrate_phase_at(system, params, CALIBRATION_ENERGY * e0, policy)
}

pub fn calibrate_phase_at(
    system: &CollisionSystem,
    params: &ShortRangeParams,
    energy: f64,
    policy: &GridPolicy,
) -> Result<f64> {
    let potential = AdiabaticPotential::uncoupled(system, 0)?;
    let abar = qdt::mean_scattering_length(system.mu(), system.c6())?;
    let k = qdt::wavenumber(system.mu(), energy);
    let ika = Complex64::new(0.0, k * params.s * abar);
    let target = (1.0 - ika) / (1.0 + ika);

    let mismatch = |delta: f64| -> Result<f64> {
        let boundary = BoundaryCondition::new(&potential, 0.0, delta, energy, params.r_match)?;
        let result = propagate_from(&potential, &boundary, energy, policy)?;
        Ok((result.s_matrix * target.conj()).arg())
    };

    let n = CALIBRATION_SAMPLES;
    let deltas: Vec<f64> = (0..=n).map(|j| (j as f64 + 0.5) * PI / n as f64).collect();
    let values = deltas[..n].iter().map(|&d| mismatch(d)).collect::<Result<Vec<_>>>()?;
    let value_at = |j: usize| if j == n { values[0] } else { values[j] };

    let bracket = (0..n).find(|&j| {
        let (a, b) = (value_at(j), value_at(j + 1));
        // arg S rises with δ (every map along the way preserves orientation),
        // so the root is an upward crossing; a downward one is the wrap at ±π
        a.abs() < PI / 2.0 && b.abs() < PI / 2.0 && a < 0.0 && b >= 0.0
    });
    let Some(j) = bracket else {
        return Err(Error::Calibration(format!("no phase in [0, π) reproduces s = {}", params.s)));
    };

    let (mut lo, mut hi) = (deltas[j], deltas[j + 1]);
    let mut f_lo = value_at(j);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let f_mid = mismatch(mid)?;
        if (f_mid <= 0.0) == (f_lo <= 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).rem_euclid(PI))
}

/// Calibrates δ_sr at zero dipole and bundles it with the parameters.
pub fn calibrate(system: &CollisionSystem, params: &ShortRangeParams, policy: &GridPolicy) -> Result<CalibratedParams> {
    let bare = system.with_dipole(0.0)?;
    let e0 = qdt::characteristic_energies(system.mu(), system.c6())?.e0;
    let energy = CALIBRATION_ENERGY * e0;
    Ok(CalibratedParams::new(*params, calibrate_phase_at(&bare, params, energy, policy)?, energy))
}
