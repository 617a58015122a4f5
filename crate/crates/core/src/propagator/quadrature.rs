/// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration on P_n.
pub(crate) fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    rule
}

/// Composite Gauss–Legendre integral over [a, b].
pub(crate) fn integrate<E>(
    f: impl Fn(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    panels: usize,
    rule: &[(f64, f64)],
) -> Result<f64, E> {
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * width;
        for &(x, w) in rule {
            total += 0.5 * width * w * f(mid + 0.5 * width * x)?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials() {
        let rule = gauss_legendre(8);
        assert!((rule.iter().map(|r| r.1).sum::<f64>() - 2.0).abs() < 1e-14);
        // degree 15 is integrated exactly
        let v: f64 = integrate(|x| Ok::<_, ()>(x.powi(15) + x.powi(14)), 0.0, 1.0, 1, &rule).unwrap();
        assert!((v - (1.0 / 16.0 + 1.0 / 15.0)).abs() < 1e-14);
    }

    #[test]
    fn smooth_integrand() {
        let rule = gauss_legendre(16);
        let v: f64 = integrate(|x: f64| Ok::<_, ()>(x.exp()), 0.0, 3.0, 4, &rule).unwrap();
        assert!((v - (3f64.exp() - 1.0)).abs() < 1e-12);
    }
}
