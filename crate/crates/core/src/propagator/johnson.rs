//! Log-derivative propagation of ψ'' = U(R) ψ.

use num_complex::Complex64;

use crate::error::Result;

/// Propagates the log-derivative Y = ψ'/ψ from `r_start` to `r_end`.
///
/// The initial value is passed as its inverse so that a node at `r_start`
/// (Y infinite) is representable. `step(r)` gives the local step; each Simpson
/// panel spans two steps of equal length and the last panel is shrunk to land
/// on `r_end`.
pub(crate) fn propagate_log_derivative(
    u: &impl Fn(f64) -> Result<f64>,
    step: &impl Fn(f64) -> f64,
    inverse_y0: Complex64,
    r_start: f64,
    r_end: f64,
) -> Result<Complex64> {
    debug_assert!(r_end > r_start);
    let mut r = r_start;
    let mut u_left = u(r)?;
    let mut y: Option<Complex64> = None;

    while r < r_end {
        let mut h = step(r);
        if r + 2.0 * h >= r_end * (1.0 - 1e-14) {
            h = 0.5 * (r_end - r);
        }
        let u_mid = u(r + h)?;
        let u_right = u(r + 2.0 * h)?;

        // panel-edge kick, then free step
        let kick = Complex64::from(h / 3.0 * u_left);
        let mut z = match y {
            Some(y) => free(y + kick, h),
            None => {
                // 1/(Y0 + kick), written without forming Y0
                let inv = inverse_y0 / (1.0 + kick * inverse_y0);
                1.0 / (h + inv)
            }
        };
        z += 4.0 * h / 3.0 * u_mid / (1.0 - h * h * u_mid / 6.0);
        z = free(z, h);
        z += h / 3.0 * u_right;

        y = Some(z);
        u_left = u_right;
        r = if 2.0 * h >= r_end - r { r_end } else { r + 2.0 * h };
    }

    Ok(y.unwrap_or_else(|| 1.0 / inverse_y0))
}

/// Exact log-derivative transfer across a force-free step.
fn free(y: Complex64, h: f64) -> Complex64 {
    y / (1.0 + h * y)
}
