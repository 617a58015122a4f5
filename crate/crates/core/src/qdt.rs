//! Closed-form quantum-defect layer for a −C₆/R⁶ long-range potential:
//! length and energy scales, the low-energy complex scattering lengths of the
//! two lowest partial waves, rate constants, and the simple barrier models.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::potential::CollisionSystem;

/// Γ(1/4)
pub const GAMMA_QUARTER: f64 = 3.625_609_908_221_908;
/// Γ(3/4)
pub const GAMMA_THREE_QUARTERS: f64 = 1.225_416_702_465_177_6;

/// ā₁ / ā = Γ(1/4)⁶ / (144 π² Γ(3/4)²) ≈ 1.064
pub const P_WAVE_LENGTH_RATIO: f64 =
    GAMMA_QUARTER * GAMMA_QUARTER * GAMMA_QUARTER * GAMMA_QUARTER * GAMMA_QUARTER * GAMMA_QUARTER
        / (144.0 * PI * PI * GAMMA_THREE_QUARTERS * GAMMA_THREE_QUARTERS);

/// Universal p-wave transmission at the top of the centrifugal barrier.
pub const P_WAVE_BARRIER_TRANSMISSION: f64 = 0.37;

/// Above this value of kā the threshold expansions are only indicative.
pub const THRESHOLD_VALIDITY: f64 = 0.3;

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {value}")))
    }
}

/// Gribakin–Flambaum mean scattering length ā = 2π (2μC₆)^{1/4} / Γ(1/4)².
pub fn mean_scattering_length(mu: f64, c6: f64) -> Result<f64> {
    check_positive("reduced mass", mu)?;
    check_positive("C6", c6)?;
    Ok(2.0 * PI * (2.0 * mu * c6).powf(0.25) / (GAMMA_QUARTER * GAMMA_QUARTER))
}

/// p-wave analogue ā₁ of the mean scattering length.
pub fn p_wave_mean_scattering_length(mu: f64, c6: f64) -> Result<f64> {
    Ok(P_WAVE_LENGTH_RATIO * mean_scattering_length(mu, c6)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CharacteristicEnergies {
    /// ħ²/(2μā²): validity scale of the s-wave threshold expansion.
    pub e0: f64,
    /// Height of the bare p-wave centrifugal barrier, (4ħ⁶/(27μ³C₆))^{1/2}.
    pub e1: f64,
}

pub fn characteristic_energies(mu: f64, c6: f64) -> Result<CharacteristicEnergies> {
    let abar = mean_scattering_length(mu, c6)?;
    Ok(CharacteristicEnergies { e0: 1.0 / (2.0 * mu * abar * abar), e1: (4.0 / (27.0 * mu.powi(3) * c6)).sqrt() })
}

pub fn wavenumber(mu: f64, energy: f64) -> f64 {
    (2.0 * mu * energy).sqrt()
}

/// Short-range physics reduced to the reduced scattering length `s = a/ā`,
/// the absorption parameter `y` and the matching radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShortRangeParams {
    pub s: f64,
    pub y: f64,
    pub r_match: f64,
}

impl ShortRangeParams {
    pub fn new(s: f64, y: f64, r_match: f64) -> Result<Self> {
        if !s.is_finite() {
            return Err(Error::invalid(format!("s must be finite, got {s}")));
        }
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::invalid(format!("y must lie in [0, 1], got {y}")));
        }
        check_positive("matching radius", r_match)?;
        Ok(Self { s, y, r_match })
    }

    /// The matching radius has to sit inside the mean scattering length.
    pub fn check_against(&self, system: &CollisionSystem) -> Result<()> {
        let abar = mean_scattering_length(system.mu(), system.c6())?;
        if self.r_match >= abar {
            return Err(Error::invalid(format!(
                "matching radius {} bohr must be below the mean scattering length {abar:.1} bohr",
                self.r_match
            )));
        }
        Ok(())
    }

    pub fn with_y(self, y: f64) -> Result<Self> {
        Self::new(self.s, y, self.r_match)
    }

    pub fn with_s(self, s: f64) -> Result<Self> {
        Self::new(s, self.y, self.r_match)
    }
}

/// ã = α − iβ; β carries the loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexScatteringLength {
    pub alpha: f64,
    pub beta: f64,
}

impl ComplexScatteringLength {
    pub fn from_complex(a: Complex64) -> Self {
        Self { alpha: a.re, beta: -a.im }
    }

    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.alpha, -self.beta)
    }
}

/// Threshold form of ã for L = 0 and L = 1 with a −C₆/R⁶ tail.
///
/// L = 0: ã = a + ā y (1 + (1−s)²) / (i + y(1−s)), a = sā.
/// L = 1: ã = −2 ā₁ (kā)² (y + i(s−1)) / (ys + i(s−2)).
pub fn analytic_scattering_length(
    l: u32,
    params: &ShortRangeParams,
    system: &CollisionSystem,
    k: f64,
) -> Result<ComplexScatteringLength> {
    if l > 1 {
        return Err(Error::UnsupportedPartialWave(l));
    }
    if !(0.0..=1.0).contains(&params.y) {
        return Err(Error::invalid(format!("y must lie in [0, 1], got {}", params.y)));
    }
    if !(k >= 0.0) {
        return Err(Error::invalid(format!("wavenumber must be non-negative, got {k}")));
    }

    let abar = mean_scattering_length(system.mu(), system.c6())?;
    if k * abar >= THRESHOLD_VALIDITY {
        log::warn!("k*abar = {:.3} is outside the threshold regime of the analytic scattering length", k * abar);
    }

    let (s, y) = (params.s, params.y);
    let i = Complex64::i();
    let a = if l == 0 {
        s * abar + abar * y * (1.0 + (1.0 - s) * (1.0 - s)) / (i + y * (1.0 - s))
    } else {
        let abar1 = P_WAVE_LENGTH_RATIO * abar;
        -2.0 * abar1 * (k * abar).powi(2) * (y + i * (s - 1.0)) / (y * s + i * (s - 2.0))
    };

    Ok(ComplexScatteringLength::from_complex(a))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateConstants {
    pub elastic: f64,
    pub quenching: f64,
}

/// Allowed excess of |S| over one before it counts as a unitarity violation.
pub const UNITARITY_TOLERANCE: f64 = 1e-9;

/// K_el = g π/(μk) |1−S|², K_qu = g π/(μk) (1−|S|²), atomic units.
pub fn rates_from_s(s: Complex64, k: f64, mu: f64, g: f64) -> Result<RateConstants> {
    check_positive("wavenumber", k)?;
    check_positive("reduced mass", mu)?;
    let modulus = s.norm();
    if modulus > 1.0 + UNITARITY_TOLERANCE {
        return Err(Error::Unitarity { modulus });
    }
    let prefactor = g * PI / (mu * k);
    Ok(RateConstants {
        elastic: prefactor * (1.0 - s).norm_sqr(),
        quenching: prefactor * (1.0 - s.norm_sqr()).max(0.0),
    })
}

/// S = (1 − ikã) / (1 + ikã), the inverse of [`scattering_length_from_s`].
pub fn s_from_scattering_length(a: &ComplexScatteringLength, k: f64) -> Result<Complex64> {
    check_positive("wavenumber", k)?;
    let ika = Complex64::i() * k * a.as_complex();
    let denom = 1.0 + ika;
    if denom.norm() == 0.0 {
        return Err(Error::SingularConversion);
    }
    Ok((1.0 - ika) / denom)
}

/// ã = (1/(ik)) (1 − S)/(1 + S).
pub fn scattering_length_from_s(s: Complex64, k: f64) -> Result<ComplexScatteringLength> {
    check_positive("wavenumber", k)?;
    let denom = 1.0 + s;
    if denom.norm() <= 1e-15 {
        return Err(Error::SingularConversion);
    }
    let a = (1.0 - s) / (denom * Complex64::new(0.0, k));
    Ok(ComplexScatteringLength::from_complex(a))
}

/// Threshold transmission 1 − exp(−4kβ_L) with β₀ = ā and β₁ = ā₁(kā)².
pub fn low_energy_ploss(l: u32, system: &CollisionSystem, k: f64) -> Result<f64> {
    if !(k >= 0.0) {
        return Err(Error::invalid(format!("wavenumber must be non-negative, got {k}")));
    }
    let abar = mean_scattering_length(system.mu(), system.c6())?;
    let beta = match l {
        0 => abar,
        1 => P_WAVE_LENGTH_RATIO * abar * (k * abar).powi(2),
        _ => return Err(Error::UnsupportedPartialWave(l)),
    };
    Ok(-(-4.0 * k * beta).exp_m1())
}

/// f = √(L(L+1)·2(n−2)) / n of the inverse-Morse barrier fit.
pub fn inverse_morse_exponent(l: u32, n: u32) -> Result<f64> {
    if n < 3 {
        return Err(Error::invalid(format!("power n must be at least 3, got {n}")));
    }
    let (l, n) = (l as f64, n as f64);
    Ok((l * (l + 1.0) * 2.0 * (n - 2.0)).sqrt() / n)
}

/// Barrier-top transmission (1 − e^{−4πf})/2 of an inverse-Morse barrier with
/// the curvature of L(L+1)/(2μR²) − C_n/R^n at its maximum.
pub fn inverse_morse_transmission(l: u32, n: u32) -> Result<f64> {
    let f = inverse_morse_exponent(l, n)?;
    Ok(-(-4.0 * PI * f).exp_m1() / 2.0)
}

/// Barrier transmission used by the QT model, and whether it is only the
/// inverse-Morse estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarrierTransmission {
    pub value: f64,
    pub model: bool,
}

pub fn barrier_transmission(l: u32) -> Result<BarrierTransmission> {
    if l == 1 {
        Ok(BarrierTransmission { value: P_WAVE_BARRIER_TRANSMISSION, model: false })
    } else {
        Ok(BarrierTransmission { value: inverse_morse_transmission(l, 6)?, model: true })
    }
}

/// Quantum-threshold model P_b (E/V_b)^{3/2}, capped at one.
pub fn qt_model_ploss(energy: f64, v_barrier: f64, p_barrier: f64) -> Result<f64> {
    if !(energy >= 0.0) {
        return Err(Error::invalid(format!("energy must be non-negative, got {energy}")));
    }
    check_positive("barrier height", v_barrier)?;
    if !(0.0..=1.0).contains(&p_barrier) {
        return Err(Error::invalid(format!("barrier transmission must lie in [0, 1], got {p_barrier}")));
    }
    Ok((p_barrier * (energy / v_barrier).powf(1.5)).min(1.0))
}

/// Field location of the n-th resonance of a series, E' √((n₀+n)/(n∞−n)).
pub fn resonance_position(n: f64, e_scale: f64, n0: f64, n_inf: f64) -> Result<f64> {
    if n >= n_inf {
        return Err(Error::OutOfDomain(format!("resonance index {n} must be below n_inf = {n_inf}")));
    }
    if n0 + n < 0.0 {
        return Err(Error::OutOfDomain(format!("n0 + n = {} is negative", n0 + n)));
    }
    Ok(e_scale * ((n0 + n) / (n_inf - n)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Symmetry;
    use proptest::prelude::*;

    const MU_KRB: f64 = 63.4968 * 1822.888486209;
    const C6_KRB: f64 = 16130.0;

    fn krb() -> CollisionSystem {
        CollisionSystem::new(MU_KRB, C6_KRB, 0.0, Symmetry::IdenticalFermions).unwrap()
    }

    fn params(s: f64, y: f64) -> ShortRangeParams {
        ShortRangeParams::new(s, y, 20.0).unwrap()
    }

    #[test]
    fn gamma_constants() {
        // Γ(1/4) Γ(3/4) = π √2
        assert!((GAMMA_QUARTER * GAMMA_THREE_QUARTERS - PI * 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn krb_length_scales() {
        let abar = mean_scattering_length(MU_KRB, C6_KRB).unwrap();
        assert!((abar - 118.0).abs() < 0.5, "abar = {abar}");
        assert!((P_WAVE_LENGTH_RATIO - 1.064).abs() < 5e-4);
        let a16 = mean_scattering_length(16.0 * MU_KRB, C6_KRB).unwrap();
        assert!((a16 - 2.0 * abar).abs() < 1e-12 * abar);
        assert!(mean_scattering_length(0.0, 1.0).is_err());
        assert!(mean_scattering_length(1.0, -1.0).is_err());
    }

    #[test]
    fn krb_characteristic_energies() {
        let e = characteristic_energies(MU_KRB, C6_KRB).unwrap();
        let e0 = crate::units::hartree_to_microkelvin(e.e0);
        let e1 = crate::units::hartree_to_microkelvin(e.e1);
        assert!((e0 - 98.0).abs() < 0.02 * 98.0, "E0 = {e0}");
        assert!((e1 - 24.3).abs() < 0.02 * 24.3, "E1 = {e1}");
    }

    #[test]
    fn s_wave_without_absorption_is_real() {
        let sys = krb();
        let abar = mean_scattering_length(MU_KRB, C6_KRB).unwrap();
        for s in [-3.0, -0.5, 0.0, 1.0, 2.5] {
            let a = analytic_scattering_length(0, &params(s, 0.0), &sys, 1e-5).unwrap();
            assert!((a.alpha - s * abar).abs() < 1e-12 * abar);
            assert_eq!(a.beta, 0.0);
        }
    }

    #[test]
    fn universal_limits() {
        let sys = krb();
        let abar = mean_scattering_length(MU_KRB, C6_KRB).unwrap();
        let abar1 = P_WAVE_LENGTH_RATIO * abar;
        let k = 0.1 / abar;
        for s in [-1.0, 0.0, 0.5, 2.0] {
            let a0 = analytic_scattering_length(0, &params(s, 1.0), &sys, k).unwrap();
            assert!((a0.alpha - abar).abs() < 1e-12 * abar);
            assert!((a0.beta - abar).abs() < 1e-12 * abar);
            let a1 = analytic_scattering_length(1, &params(s, 1.0), &sys, k).unwrap();
            assert!((a1.alpha + abar1 * 0.01).abs() < 1e-12 * abar1);
            assert!((a1.beta - abar1 * 0.01).abs() < 1e-12 * abar1);
        }
    }

    #[test]
    fn analytic_errors() {
        let sys = krb();
        assert!(matches!(
            analytic_scattering_length(2, &params(0.0, 0.5), &sys, 1e-4),
            Err(Error::UnsupportedPartialWave(2))
        ));
        let bad = ShortRangeParams { s: 0.0, y: 1.5, r_match: 20.0 };
        assert!(matches!(analytic_scattering_length(0, &bad, &sys, 1e-4), Err(Error::InvalidArgument(_))));
        assert!(ShortRangeParams::new(0.0, -0.1, 20.0).is_err());
        assert!(params(0.0, 1.0).check_against(&sys).is_ok());
        assert!(ShortRangeParams::new(0.0, 1.0, 200.0).unwrap().check_against(&sys).is_err());
    }

    #[test]
    fn rate_examples() {
        let (k, mu) = (1e-3, MU_KRB);
        let r = rates_from_s(Complex64::new(1.0, 0.0), k, mu, 1.0).unwrap();
        assert_eq!((r.elastic, r.quenching), (0.0, 0.0));

        let r = rates_from_s(Complex64::new(0.0, 0.0), k, mu, 1.0).unwrap();
        assert!((r.quenching - PI / (mu * k)).abs() < 1e-15 * r.quenching);

        let s = Complex64::from_polar(1.0, 0.6);
        for g in [1.0, 2.0] {
            let r = rates_from_s(s, k, mu, g).unwrap();
            assert!(r.quenching.abs() < 1e-12 * PI / (mu * k));
            let expected = g * PI / (mu * k) * 4.0 * 0.3f64.sin().powi(2);
            assert!((r.elastic - expected).abs() < 1e-12 * expected);
        }

        assert!(matches!(rates_from_s(Complex64::new(1.0 + 1e-6, 0.0), k, mu, 1.0), Err(Error::Unitarity { .. })));
    }

    #[test]
    fn conversion_examples() {
        let a = scattering_length_from_s(Complex64::new(1.0, 0.0), 0.01).unwrap();
        assert_eq!((a.alpha, a.beta), (0.0, 0.0));
        assert!(matches!(scattering_length_from_s(Complex64::new(-1.0, 0.0), 0.01), Err(Error::SingularConversion)));

        // small kβ: 1 - |S|^2 = 4kβ + O((kβ)^2)
        let k = 1e-4;
        let beta = 50.0;
        let s = s_from_scattering_length(&ComplexScatteringLength { alpha: 0.0, beta }, k).unwrap();
        let loss = 1.0 - s.norm_sqr();
        assert!((loss - 4.0 * k * beta).abs() < 3.0 * (4.0 * k * beta).powi(2));
    }

    #[test]
    fn low_energy_transmission() {
        let sys = krb();
        let abar = mean_scattering_length(MU_KRB, C6_KRB).unwrap();
        assert_eq!(low_energy_ploss(0, &sys, 0.0).unwrap(), 0.0);
        assert_eq!(low_energy_ploss(1, &sys, 0.0).unwrap(), 0.0);

        let k = 1e-4 / abar;
        let p0 = low_energy_ploss(0, &sys, k).unwrap();
        assert!((p0 / (4.0 * k * abar) - 1.0).abs() < 1e-3);

        // p wave: doubling k multiplies the loss by 8
        let (k1, k2) = (1e-3 / abar, 2e-3 / abar);
        let ratio = low_energy_ploss(1, &sys, k2).unwrap() / low_energy_ploss(1, &sys, k1).unwrap();
        assert!((ratio - 8.0).abs() < 1e-6);
        assert!(low_energy_ploss(2, &sys, k).is_err());
    }

    #[test]
    fn inverse_morse() {
        let f6 = inverse_morse_exponent(1, 6).unwrap();
        let f3 = inverse_morse_exponent(1, 3).unwrap();
        assert!((f6 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f6, f3);
        let p = inverse_morse_transmission(1, 6).unwrap();
        assert!((p - (1.0 - (-8.0 * PI / 3.0).exp()) / 2.0).abs() < 1e-12);
        assert!((p - 0.49988).abs() < 1e-5);
        assert_eq!(inverse_morse_transmission(1, 3).unwrap(), p);
        assert_eq!(inverse_morse_transmission(0, 6).unwrap(), 0.0);
        assert!(inverse_morse_transmission(1, 2).is_err());
    }

    #[test]
    fn barrier_transmission_flags() {
        assert_eq!(barrier_transmission(1).unwrap(), BarrierTransmission { value: 0.37, model: false });
        assert!(barrier_transmission(3).unwrap().model);
    }

    #[test]
    fn qt_model() {
        let vb = 7.7e-11;
        assert!((qt_model_ploss(vb, vb, 0.37).unwrap() - 0.37).abs() < 1e-15);
        assert_eq!(qt_model_ploss(0.0, vb, 0.37).unwrap(), 0.0);
        assert!((qt_model_ploss(vb / 4.0, vb, 0.37).unwrap() - 0.04625).abs() < 1e-15);
        assert_eq!(qt_model_ploss(100.0 * vb, vb, 0.37).unwrap(), 1.0);
    }

    #[test]
    fn resonance_series() {
        assert_eq!(resonance_position(-2.0, 1.0, 2.0, 10.0).unwrap(), 0.0);
        assert!((resonance_position(5.0, 1.0, 0.0, 10.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(resonance_position(10.0, 1.0, 0.0, 10.0), Err(Error::OutOfDomain(_))));

        // n << n_inf: E(n) ~ E' sqrt((n0 + n) / n_inf)
        let (n0, n_inf) = (0.5, 1e6);
        for n in [1.0, 4.0, 16.0] {
            let e = resonance_position(n, 1.0, n0, n_inf).unwrap();
            assert!((e / ((n0 + n) / n_inf).sqrt() - 1.0).abs() < 1e-4);
        }
        let mut last = -1.0;
        for n in 0..9 {
            let e = resonance_position(n as f64, 1.0, 0.3, 9.5).unwrap();
            assert!(e > last);
            last = e;
        }
    }

    /// K_qu from the analytic S-matrix at two wavenumbers a decade apart.
    fn k_qu_ratio(l: u32, s: f64, y: f64, ka_low: f64) -> f64 {
        let sys = krb();
        let abar = mean_scattering_length(MU_KRB, C6_KRB).unwrap();
        let rate = |ka: f64| {
            let k = ka / abar;
            let a = analytic_scattering_length(l, &params(s, y), &sys, k).unwrap();
            let smat = s_from_scattering_length(&a, k).unwrap();
            rates_from_s(smat, k, MU_KRB, 1.0).unwrap().quenching
        };
        rate(10.0 * ka_low) / rate(ka_low)
    }

    #[test]
    fn threshold_laws_of_analytic_rates() {
        for (s, y) in [(0.0, 1.0), (0.5, 0.3), (-1.0, 0.8)] {
            // L = 0: K_qu flat over two decades of k
            let r = k_qu_ratio(0, s, y, 1e-5) * k_qu_ratio(0, s, y, 1e-4);
            assert!((r - 1.0).abs() < 1e-2, "s-wave ratio {r}");
            // L = 1: K_qu ∝ k²; 1 − |S|² cancels badly much below kā = 1e-3
            let r = k_qu_ratio(1, s, y, 1e-3) * k_qu_ratio(1, s, y, 1e-2);
            assert!((r / 1e4 - 1.0).abs() < 1e-2, "p-wave ratio {r}");
        }
    }

    proptest! {
        #[test]
        fn absorption_is_non_negative(s in -5.0f64..5.0, y in 0.0f64..=1.0, ka in 1e-4f64..0.2) {
            let sys = krb();
            let abar = mean_scattering_length(MU_KRB, C6_KRB).unwrap();
            for l in 0..=1 {
                let a = analytic_scattering_length(l, &params(s, y), &sys, ka / abar).unwrap();
                prop_assert!(a.beta >= -1e-12 * abar);
            }
        }

        #[test]
        fn universality_at_unit_absorption(s in -5.0f64..5.0) {
            let sys = krb();
            let abar = mean_scattering_length(MU_KRB, C6_KRB).unwrap();
            let k = 0.01 / abar;
            let reference0 = analytic_scattering_length(0, &params(0.0, 1.0), &sys, k).unwrap();
            let reference1 = analytic_scattering_length(1, &params(0.0, 1.0), &sys, k).unwrap();
            let a0 = analytic_scattering_length(0, &params(s, 1.0), &sys, k).unwrap();
            let a1 = analytic_scattering_length(1, &params(s, 1.0), &sys, k).unwrap();
            prop_assert!((a0.beta - reference0.beta).abs() <= 1e-12 * reference0.beta);
            prop_assert!((a1.beta - reference1.beta).abs() <= 1e-12 * reference1.beta);
        }

        #[test]
        fn s_matrix_round_trip(modulus in 0.0f64..=1.0, phase in -3.1f64..3.1, ka in 1e-4f64..1.0) {
            let s = Complex64::from_polar(modulus, phase);
            prop_assume!((1.0 + s).norm() > 1e-3);
            let k = ka / 100.0;
            let a = scattering_length_from_s(s, k).unwrap();
            prop_assert!(a.beta >= -1e-9);
            let back = s_from_scattering_length(&a, k).unwrap();
            prop_assert!((back - s).norm() < 1e-12);
        }
    }
}
