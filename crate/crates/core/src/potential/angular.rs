use crate::error::{Error, Result};

const FACTORIAL_TABLE_LEN: usize = 171;

fn factorial(n: i64) -> f64 {
    debug_assert!(n >= 0 && (n as usize) < FACTORIAL_TABLE_LEN);
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn sign(n: i64) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn triangle(j1: i64, j2: i64, j3: i64) -> bool {
    j3 >= (j1 - j2).abs() && j3 <= j1 + j2
}

/// Wigner 3j symbol for integer angular momenta, Racah's single-sum formula.
pub fn wigner_3j(j1: u32, j2: u32, j3: u32, m1: i32, m2: i32, m3: i32) -> f64 {
    let (j1, j2, j3) = (j1 as i64, j2 as i64, j3 as i64);
    let (m1, m2, m3) = (m1 as i64, m2 as i64, m3 as i64);

    if m1 + m2 + m3 != 0 || !triangle(j1, j2, j3) {
        return 0.0;
    }
    if m1.abs() > j1 || m2.abs() > j2 || m3.abs() > j3 {
        return 0.0;
    }
    // (j1 j2 j3; 0 0 0) vanishes for odd j1 + j2 + j3
    if m1 == 0 && m2 == 0 && m3 == 0 && (j1 + j2 + j3) % 2 == 1 {
        return 0.0;
    }

    let delta =
        factorial(j1 + j2 - j3) * factorial(j1 - j2 + j3) * factorial(-j1 + j2 + j3) / factorial(j1 + j2 + j3 + 1);
    let prefactor = (delta
        * factorial(j1 + m1)
        * factorial(j1 - m1)
        * factorial(j2 + m2)
        * factorial(j2 - m2)
        * factorial(j3 + m3)
        * factorial(j3 - m3))
    .sqrt();

    let k_min = 0.max(j2 - j3 - m1).max(j1 - j3 + m2);
    let k_max = (j1 + j2 - j3).min(j1 - m1).min(j2 + m2);

    let sum: f64 = (k_min..=k_max)
        .map(|k| {
            sign(k)
                / (factorial(k)
                    * factorial(j3 - j2 + k + m1)
                    * factorial(j3 - j1 + k - m2)
                    * factorial(j1 + j2 - j3 - k)
                    * factorial(j1 - k - m1)
                    * factorial(j2 - k + m2))
        })
        .sum();

    sign(j1 - j2 - m3) * prefactor * sum
}

/// ⟨L M| P₂(cos θ) |L' M⟩ between normalized spherical harmonics.
pub fn p2_matrix_element(l: u32, lp: u32, m: i32) -> Result<f64> {
    if m.unsigned_abs() > l.min(lp) {
        return Err(Error::invalid(format!("|M| = {} exceeds min(L, L') for L = {l}, L' = {lp}", m.abs())));
    }
    if (l as i64 - lp as i64).abs() > 2 || (l + lp) % 2 == 1 {
        return Ok(0.0);
    }

    let norm = ((2 * l + 1) as f64 * (2 * lp + 1) as f64).sqrt();
    let value = sign(m as i64) * norm * wigner_3j(l, 2, lp, 0, 0, 0) * wigner_3j(l, 2, lp, -m, 0, m);

    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_3j_values() {
        // (1 1 0; 0 0 0) = -1/sqrt(3)
        assert!((wigner_3j(1, 1, 0, 0, 0, 0) + 1.0 / 3f64.sqrt()).abs() < 1e-14);
        // (1 2 1; 0 0 0) = sqrt(2/15)
        assert!((wigner_3j(1, 2, 1, 0, 0, 0) - (2.0f64 / 15.0).sqrt()).abs() < 1e-14);
        // (2 2 2; 0 0 0) = -sqrt(2/35)
        assert!((wigner_3j(2, 2, 2, 0, 0, 0) + (2.0f64 / 35.0).sqrt()).abs() < 1e-14);
        assert_eq!(wigner_3j(1, 1, 1, 0, 0, 0), 0.0);
        assert_eq!(wigner_3j(1, 1, 3, 0, 0, 0), 0.0);
    }

    #[test]
    fn orthogonality_of_3j() {
        // sum_{m1,m2} (j1 j2 j3; m1 m2 m3)^2 = 1/(2 j3 + 1)
        for (j1, j2, j3) in [(2u32, 3u32, 4u32), (1, 2, 3), (4, 2, 2)] {
            for m3 in -(j3 as i32)..=(j3 as i32) {
                let mut total = 0.0;
                for m1 in -(j1 as i32)..=(j1 as i32) {
                    let m2 = -m1 - m3;
                    total += wigner_3j(j1, j2, j3, m1, m2, m3).powi(2);
                }
                assert!((total - 1.0 / (2 * j3 + 1) as f64).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn p2_examples() {
        assert_eq!(p2_matrix_element(0, 0, 0).unwrap(), 0.0);
        assert!((p2_matrix_element(1, 1, 0).unwrap() - 0.4).abs() < 1e-14);
        assert!((p2_matrix_element(1, 1, 1).unwrap() + 0.2).abs() < 1e-14);
        assert!((p2_matrix_element(1, 1, -1).unwrap() + 0.2).abs() < 1e-14);
        assert!((p2_matrix_element(0, 2, 0).unwrap() - 1.0 / 5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn p2_selection_rules_and_symmetry() {
        for l in 0..8u32 {
            for lp in 0..8u32 {
                for m in -(l.min(lp) as i32)..=(l.min(lp) as i32) {
                    let v = p2_matrix_element(l, lp, m).unwrap();
                    let dl = (l as i32 - lp as i32).abs();
                    if dl != 0 && dl != 2 {
                        assert_eq!(v, 0.0);
                    }
                    assert!((v - p2_matrix_element(lp, l, m).unwrap()).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn p2_rejects_large_projection() {
        assert!(matches!(p2_matrix_element(1, 3, 2), Err(Error::InvalidArgument(_))));
    }
}
