/// Riccati–Bessel functions ĵ_L(x) = x j_L(x), n̂_L(x) = x y_L(x) and their
/// x-derivatives. ĵ_0 = sin x, n̂_0 = −cos x.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiccatiBessel {
    pub j: f64,
    pub dj: f64,
    pub n: f64,
    pub dn: f64,
}

pub fn riccati_bessel(l: u32, x: f64) -> RiccatiBessel {
    debug_assert!(x > 0.0);
    let (n, n_prev) = upward(l, x, -x.cos(), x.sin());
    let (j, j_prev) = if x > l as f64 { upward(l, x, x.sin(), x.cos()) } else { miller(l, x) };
    let lf = l as f64;
    RiccatiBessel { j, dj: j_prev - lf * j / x, n, dn: n_prev - lf * n / x }
}

/// f_{L+1} = (2L+1)/x f_L − f_{L−1}; returns (f_L, f_{L−1}).
fn upward(l: u32, x: f64, f0: f64, f_minus: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (f_minus, f0);
    for k in 0..l {
        let next = (2 * k + 1) as f64 / x * cur - prev;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Downward recursion for ĵ when x < L, normalized on the larger of
/// ĵ_0 = sin x and ĵ_{−1} = cos x.
fn miller(l: u32, x: f64) -> (f64, f64) {
    let start = l + 20 + x as u32;
    let (mut above, mut cur) = (0.0f64, 1e-300f64);
    let (mut at_l, mut at_l_minus) = (0.0, 0.0);
    // cur holds f_k for k from start down to −1
    let mut k = start as i64;
    loop {
        if k == l as i64 {
            at_l = cur;
        }
        if k == l as i64 - 1 {
            at_l_minus = cur;
        }
        if k == -1 {
            break;
        }
        let below = (2 * k + 1) as f64 / x * cur - above;
        above = cur;
        cur = below;
        if cur.abs() > 1e250 {
            above *= 1e-250;
            cur *= 1e-250;
            at_l *= 1e-250;
            at_l_minus *= 1e-250;
        }
        k -= 1;
    }
    // above = f_0, cur = f_{-1}
    let scale = if x.sin().abs() > x.cos().abs() { x.sin() / above } else { x.cos() / cur };
    (at_l * scale, at_l_minus * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form(l: u32, x: f64) -> (f64, f64) {
        let (s, c) = x.sin_cos();
        match l {
            0 => (s, -c),
            1 => (s / x - c, -c / x - s),
            2 => ((3.0 / (x * x) - 1.0) * s - 3.0 * c / x, -(3.0 / (x * x) - 1.0) * c - 3.0 * s / x),
            _ => unreachable!(),
        }
    }

    #[test]
    fn low_orders() {
        for l in 0..=2 {
            // closed forms cancel badly below x ~ 0.3
            for x in [0.3, 1.0, 2.5, 7.0, 40.0] {
                let f = riccati_bessel(l, x);
                let (j, n) = closed_form(l, x);
                let tol = 1e-11 * j.abs().max(n.abs()).max(1.0);
                assert!((f.j - j).abs() <= 1e-11 * j.abs(), "j_{l}({x}) {} vs {j}", f.j);
                assert!((f.n - n).abs() <= tol, "n_{l}({x})");
            }
        }
    }

    #[test]
    fn wronskian_and_derivatives() {
        for l in 0..=12 {
            for x in [0.05, 0.7, 3.0, 11.0, 90.0] {
                let f = riccati_bessel(l, x);
                let w = f.j * f.dn - f.n * f.dj;
                assert!((w - 1.0).abs() < 1e-9, "W(L={l}, x={x}) = {w}");
                let h = 1e-5 * x;
                let (p, m) = (riccati_bessel(l, x + h), riccati_bessel(l, x - h));
                let dj = (p.j - m.j) / (2.0 * h);
                let dn = (p.n - m.n) / (2.0 * h);
                assert!((dj - f.dj).abs() < 1e-6 * f.dj.abs().max(1.0));
                assert!((dn - f.dn).abs() < 1e-6 * f.dn.abs().max(1.0));
            }
        }
    }

    #[test]
    fn small_argument_power_law() {
        // ĵ_L(x) → x^{L+1}/(2L+1)!!
        let x = 1e-3;
        let mut dfact = 1.0;
        for l in 0..=8u32 {
            dfact *= (2 * l + 1) as f64;
            let j = riccati_bessel(l, x).j;
            let expected = x.powi(l as i32 + 1) / dfact;
            assert!((j / expected - 1.0).abs() < 1e-6, "L = {l}");
        }
    }
}
