//! Variable-phase integration through the weak outer tail:
//! dδ/dR = −(U_tail/k) (ĵ_L cos δ + ĉ_L sin δ)², ĉ = −n̂.
//! Tiny p-wave phases survive this far better than a log-derivative carried
//! over many decades of R.

use num_complex::Complex64;

use super::bessel::riccati_bessel;
use crate::error::Result;

pub(crate) struct PhaseStep {
    pub points_per_scale: f64,
    pub points_per_wavelength: f64,
}

/// Integrates δ from `r_start` to `r_end` in t = ln R with classical RK4.
pub(crate) fn integrate_phase(
    u_tail: &impl Fn(f64) -> Result<f64>,
    l: u32,
    k: f64,
    delta0: Complex64,
    r_start: f64,
    r_end: f64,
    steps: &PhaseStep,
) -> Result<Complex64> {
    let rhs = |t: f64, delta: Complex64| -> Result<Complex64> {
        let r = t.exp();
        let f = riccati_bessel(l, k * r);
        let wave = f.j * delta.cos() - f.n * delta.sin();
        Ok(-r * u_tail(r)? / k * wave * wave)
    };

    let (mut t, t_end) = (r_start.ln(), r_end.ln());
    let mut delta = delta0;
    while t < t_end {
        let r = t.exp();
        let k1 = rhs(t, delta)?;
        let mut dt = (1.0 / steps.points_per_scale)
            .min(2.0 * std::f64::consts::PI / (k * r * steps.points_per_wavelength))
            .min(0.05 / k1.norm().max(1e-300));
        if t + dt >= t_end {
            dt = t_end - t;
        }
        let k2 = rhs(t + 0.5 * dt, delta + 0.5 * dt * k1)?;
        let k3 = rhs(t + 0.5 * dt, delta + 0.5 * dt * k2)?;
        let k4 = rhs(t + dt, delta + dt * k3)?;
        delta += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = if t + dt >= t_end { t_end } else { t + dt };
    }
    Ok(delta)
}
