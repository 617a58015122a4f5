use super::{jacobi_eigen, Channel, ChannelBasis, CollisionSystem, Eigen, LongRangeMatrix, SymmetricMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Barrier {
    pub r: f64,
    pub height: f64,
}

/// One eigenpotential of the long-range matrix sampled on a radial grid.
#[derive(Clone, Debug)]
pub struct AdiabaticCurve {
    pub asymptotic_channel: Channel,
    pub r_grid: Vec<f64>,
    pub potential: Vec<f64>,
    /// Eigenvector in the block basis at each sample.
    pub eigvec_trace: Vec<Vec<f64>>,
    pub barrier: Option<Barrier>,
}

/// `n` points spaced logarithmically between `r_min` and `r_max`, inclusive.
pub fn log_grid(r_min: f64, r_max: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && r_min > 0.0 && r_max > r_min);
    let ratio = (r_max / r_min).ln() / (n - 1) as f64;
    (0..n).map(|i| r_min * (ratio * i as f64).exp()).collect()
}

fn eigen_at(matrix: &LongRangeMatrix, r: f64) -> Result<Eigen> {
    let v: SymmetricMatrix = matrix.at(r)?;
    if v.is_diagonal() {
        let n = v.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| v.get(i, i).total_cmp(&v.get(j, j)));
        let values = order.iter().map(|&i| v.get(i, i)).collect();
        let vectors = order.iter().map(|&i| (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect()).collect();
        return Ok(Eigen { values, vectors });
    }
    jacobi_eigen(&v).ok_or(Error::Eigensolver { r })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Greedy one-to-one matching of rows to columns by descending score;
/// ties go to the lower row index, then the lower column index.
fn greedy_assignment(scores: &[Vec<f64>]) -> Vec<usize> {
    let n = scores.len();
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    pairs.sort_by(|&(i1, j1), &(i2, j2)| scores[i2][j2].total_cmp(&scores[i1][j1]).then(i1.cmp(&i2)).then(j1.cmp(&j2)));

    let mut row_done = vec![false; n];
    let mut col_done = vec![false; n];
    let mut assignment = vec![usize::MAX; n];
    for (i, j) in pairs {
        if !row_done[i] && !col_done[j] {
            assignment[i] = j;
            row_done[i] = true;
            col_done[j] = true;
        }
    }
    assignment
}

/// Diagonalizes the long-range matrix at every grid point and links the
/// eigenpairs into curves by maximal eigenvector overlap with the previous
/// sample. Curves are returned ordered by their asymptotic partial wave.
pub fn adiabatic_curves(system: &CollisionSystem, basis: &ChannelBasis, r_grid: &[f64]) -> Result<Vec<AdiabaticCurve>> {
    if r_grid.is_empty() {
        return Err(Error::invalid("empty radial grid"));
    }
    if r_grid[0] <= 0.0 || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("radial grid must be positive and strictly increasing"));
    }

    let matrix = LongRangeMatrix::new(system, basis)?;
    let n = basis.len();
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(r_grid.len()); n];
    let mut vectors: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(r_grid.len()); n];

    for (step, &r) in r_grid.iter().enumerate() {
        let eig = eigen_at(&matrix, r)?;

        let assignment: Vec<usize> = if step == 0 {
            (0..n).collect()
        } else {
            let overlaps: Vec<Vec<f64>> = (0..n)
                .map(|c| {
                    let prev = vectors[c].last().unwrap();
                    eig.vectors.iter().map(|v| dot(prev, v).abs()).collect()
                })
                .collect();
            greedy_assignment(&overlaps)
        };

        for c in 0..n {
            let k = assignment[c];
            let mut v = eig.vectors[k].clone();
            let flip = match vectors[c].last() {
                Some(prev) => dot(prev, &v) < 0.0,
                None => {
                    let largest = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
                    largest < 0.0
                }
            };
            if flip {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            values[c].push(eig.values[k]);
            vectors[c].push(v);
        }
    }

    // label each curve by its dominant component at the outermost sample
    let weights: Vec<Vec<f64>> = (0..n).map(|c| vectors[c].last().unwrap().iter().map(|x| x * x).collect()).collect();
    let labels = greedy_assignment(&weights);

    let mut curves: Vec<AdiabaticCurve> = (0..n)
        .map(|c| {
            let mut curve = AdiabaticCurve {
                asymptotic_channel: basis.channels()[labels[c]],
                r_grid: r_grid.to_vec(),
                potential: std::mem::take(&mut values[c]),
                eigvec_trace: std::mem::take(&mut vectors[c]),
                barrier: None,
            };
            curve.barrier = find_barrier(&curve).unwrap_or(None);
            curve
        })
        .collect();
    curves.sort_by_key(|c| c.asymptotic_channel.l);

    Ok(curves)
}

fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> Option<(f64, f64)> {
    let denom = (x[0] - x[1]) * (x[0] - x[2]) * (x[1] - x[2]);
    let a = (x[2] * (y[1] - y[0]) + x[1] * (y[0] - y[2]) + x[0] * (y[2] - y[1])) / denom;
    let b = (x[2] * x[2] * (y[0] - y[1]) + x[1] * x[1] * (y[2] - y[0]) + x[0] * x[0] * (y[1] - y[2])) / denom;
    let c =
        (x[1] * x[2] * (x[1] - x[2]) * y[0] + x[2] * x[0] * (x[2] - x[0]) * y[1] + x[0] * x[1] * (x[0] - x[1]) * y[2])
            / denom;
    if !(a < 0.0) {
        return None;
    }
    let xv = -b / (2.0 * a);
    Some((xv, c - b * b / (4.0 * a)))
}

/// Outermost positive local maximum of a sampled curve, refined by a
/// three-point parabola. `Ok(None)` means the curve has no barrier.
pub fn find_barrier(curve: &AdiabaticCurve) -> Result<Option<Barrier>> {
    let r = &curve.r_grid;
    let v = &curve.potential;
    let n = v.len();
    if n < 3 {
        return Err(Error::Resolution { r: r.first().copied().unwrap_or(0.0) });
    }

    // a curve still rising at the outer edge has its barrier beyond the grid
    if v[n - 1] > 0.0 && v[n - 1] >= v[n - 2] {
        return Err(Error::Resolution { r: r[n - 1] });
    }

    for i in (1..n - 1).rev() {
        if v[i] > 0.0 && v[i] >= v[i - 1] && v[i] >= v[i + 1] {
            if v[i - 1] < 0.5 * v[i] || v[i + 1] < 0.5 * v[i] {
                return Err(Error::Resolution { r: r[i] });
            }
            let (rb, vb) = parabola_vertex([r[i - 1], r[i], r[i + 1]], [v[i - 1], v[i], v[i + 1]])
                .filter(|(rb, _)| *rb >= r[i - 1] && *rb <= r[i + 1])
                .unwrap_or((r[i], v[i]));
            return Ok(Some(Barrier { r: rb, height: vb }));
        }
    }

    if v[0] > 0.0 && v[0] >= v[1] {
        return Err(Error::Resolution { r: r[0] });
    }
    Ok(None)
}

/// One adiabat of a block evaluated at arbitrary R.
///
/// Within a block the adiabats never cross, so the curve correlating with the
/// i-th lowest partial wave is the i-th lowest eigenvalue at every R.
#[derive(Clone, Debug)]
pub struct AdiabaticPotential {
    matrix: LongRangeMatrix,
    index: usize,
}

impl AdiabaticPotential {
    pub fn new(system: &CollisionSystem, basis: &ChannelBasis, channel: Channel) -> Result<Self> {
        let index = basis
            .channels()
            .iter()
            .position(|c| *c == channel)
            .ok_or_else(|| Error::invalid(format!("channel {channel} is not in the basis")))?;
        Ok(Self { matrix: LongRangeMatrix::new(system, basis)?, index })
    }

    /// The channel in the block allowed by the system's exchange symmetry.
    pub fn for_channel(system: &CollisionSystem, channel: Channel, l_max: u32) -> Result<Self> {
        let parity = system.symmetry().parity();
        if !parity.admits(channel.l) {
            return Err(Error::invalid(format!("channel {channel} is forbidden by {:?}", system.symmetry())));
        }
        let basis = ChannelBasis::new(channel.m, parity, l_max.max(channel.l))?;
        Self::new(system, &basis, channel)
    }

    /// Bare centrifugal + van der Waals curve of one partial wave (dipole ignored).
    pub fn uncoupled(system: &CollisionSystem, l: u32) -> Result<Self> {
        let basis = ChannelBasis::from_partial_waves(0, &[l])?;
        let bare = system.with_dipole(0.0)?;
        Self::new(&bare, &basis, basis.channels()[0])
    }

    pub fn system(&self) -> &CollisionSystem {
        self.matrix.system()
    }

    pub fn basis(&self) -> &ChannelBasis {
        self.matrix.basis()
    }

    pub fn asymptotic_channel(&self) -> Channel {
        self.matrix.basis().channels()[self.index]
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        if self.matrix.basis().len() == 1 {
            return Ok(self.matrix.at(r)?.get(0, 0));
        }
        Ok(self.matrix.eigenvalues(r)?[self.index])
    }

    /// Potential plus C₆/R⁶, accurate where the van der Waals term dominates.
    pub fn anisotropic(&self, r: f64) -> Result<f64> {
        Ok(self.matrix.anisotropic_eigenvalues(r)?[self.index])
    }

    /// Potential minus the asymptotic centrifugal term.
    pub fn tail(&self, r: f64) -> Result<f64> {
        let l = self.asymptotic_channel().l as f64;
        Ok(self.value(r)? - l * (l + 1.0) / (2.0 * self.system().mu() * r * r))
    }

    pub fn sample(&self, r_grid: &[f64]) -> Result<AdiabaticCurve> {
        let potential = r_grid.iter().map(|&r| self.value(r)).collect::<Result<Vec<_>>>()?;
        let mut curve = AdiabaticCurve {
            asymptotic_channel: self.asymptotic_channel(),
            r_grid: r_grid.to_vec(),
            potential,
            eigvec_trace: Vec::new(),
            barrier: None,
        };
        curve.barrier = find_barrier(&curve)?;
        Ok(curve)
    }

    /// Barrier search on a dense logarithmic grid spanning `r_min..r_max`.
    pub fn barrier(&self, r_min: f64, r_max: f64) -> Result<Option<Barrier>> {
        Ok(self.sample(&log_grid(r_min, r_max, 4000))?.barrier)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{Parity, Symmetry};

    const MU_KRB: f64 = 63.4968 * 1822.888486209;

    fn krb(d: f64, symmetry: Symmetry) -> CollisionSystem {
        CollisionSystem::new(MU_KRB, 16130.0, d, symmetry).unwrap()
    }

    #[test]
    fn zero_field_curves_are_the_bare_potentials() {
        let sys = krb(0.0, Symmetry::IdenticalFermions);
        let basis = ChannelBasis::new(1, Parity::Odd, 7).unwrap();
        let grid = log_grid(15.0, 5000.0, 300);
        let curves = adiabatic_curves(&sys, &basis, &grid).unwrap();
        assert_eq!(curves.len(), 4);
        for curve in &curves {
            for (r, v) in curve.r_grid.iter().zip(&curve.potential) {
                let exact = sys.diagonal_potential(curve.asymptotic_channel.l, *r);
                assert!((v - exact).abs() <= 1e-10 * exact.abs());
            }
        }
    }

    #[test]
    fn coupled_curves_keep_labels_and_continuity() {
        let sys = krb(0.25, Symmetry::IdenticalBosons);
        let basis = ChannelBasis::new(0, Parity::Even, 6).unwrap();
        let grid = log_grid(15.0, 2e5, 1500);
        let curves = adiabatic_curves(&sys, &basis, &grid).unwrap();
        let ls: Vec<u32> = curves.iter().map(|c| c.asymptotic_channel.l).collect();
        assert_eq!(ls, vec![0, 2, 4, 6]);

        for (idx, curve) in curves.iter().enumerate() {
            let last = curve.eigvec_trace.last().unwrap();
            assert!(last[idx] * last[idx] >= 0.99);
            for w in curve.eigvec_trace.windows(2) {
                assert!(dot(&w[0], &w[1]).abs() >= 0.9);
            }
        }
        // no crossings: the k-th curve stays the k-th eigenvalue
        for i in 0..grid.len() {
            for w in curves.windows(2) {
                assert!(w[0].potential[i] <= w[1].potential[i]);
            }
        }
    }

    #[test]
    fn continuous_potential_matches_sampled_curves() {
        let sys = krb(0.2, Symmetry::IdenticalFermions);
        let basis = ChannelBasis::new(0, Parity::Odd, 7).unwrap();
        let grid = log_grid(20.0, 1e5, 400);
        let curves = adiabatic_curves(&sys, &basis, &grid).unwrap();
        for curve in &curves {
            let pot = AdiabaticPotential::new(&sys, &basis, curve.asymptotic_channel).unwrap();
            for (r, v) in grid.iter().zip(&curve.potential) {
                assert_eq!(pot.value(*r).unwrap(), *v);
            }
        }
    }

    #[test]
    fn second_order_dipole_shift_of_s_wave() {
        let d = 0.01;
        let sys = krb(d, Symmetry::IdenticalBosons);
        let basis = ChannelBasis::new(0, Parity::Even, 6).unwrap();
        let pot = AdiabaticPotential::new(&sys, &basis, Channel { l: 0, m: 0 }).unwrap();
        let c3 = sys.c3(0, 2, 0).unwrap();
        for r in [2000.0f64, 5000.0, 20000.0] {
            let expected = -sys.c6() / r.powi(6) - MU_KRB / 3.0 * c3 * c3 / r.powi(4);
            let v = pot.value(r).unwrap();
            assert!((v - expected).abs() < 0.02 * expected.abs(), "R={r}: {v} vs {expected}");
        }
    }

    #[test]
    fn p_wave_projection_ordering() {
        let sys = krb(0.2, Symmetry::IdenticalFermions);
        let m0 = AdiabaticPotential::for_channel(&sys, Channel { l: 1, m: 0 }, 7).unwrap();
        let m1 = AdiabaticPotential::for_channel(&sys, Channel { l: 1, m: 1 }, 7).unwrap();
        for r in log_grid(20.0, 1e5, 50) {
            assert!(m0.value(r).unwrap() < m1.value(r).unwrap());
        }
    }

    #[test]
    fn p_wave_barrier_is_analytic() {
        let sys = krb(0.0, Symmetry::IdenticalFermions);
        let pot = AdiabaticPotential::uncoupled(&sys, 1).unwrap();
        let barrier = pot.barrier(20.0, 5000.0).unwrap().unwrap();
        let vb = (4.0 / (27.0 * MU_KRB.powi(3) * sys.c6())).sqrt();
        let rb = (3.0 * MU_KRB * sys.c6()).powf(0.25);
        assert!((barrier.height - vb).abs() < 1e-3 * vb);
        assert!((barrier.r - rb).abs() < 1e-3 * rb);
    }

    #[test]
    fn barrier_refinement_beats_coarse_grid() {
        let sys = krb(0.0, Symmetry::IdenticalFermions);
        let pot = AdiabaticPotential::uncoupled(&sys, 1).unwrap();
        let barrier = pot.sample(&log_grid(20.0, 5000.0, 120)).unwrap().barrier.unwrap();
        let vb = (4.0 / (27.0 * MU_KRB.powi(3) * sys.c6())).sqrt();
        assert!((barrier.height - vb).abs() < 1e-3 * vb);
    }

    #[test]
    fn s_wave_has_no_barrier() {
        let sys = krb(0.0, Symmetry::IdenticalBosons);
        let pot = AdiabaticPotential::uncoupled(&sys, 0).unwrap();
        assert_eq!(pot.barrier(20.0, 5000.0).unwrap(), None);
    }

    #[test]
    fn unresolved_barrier_is_an_error() {
        let sys = krb(0.0, Symmetry::IdenticalFermions);
        let pot = AdiabaticPotential::uncoupled(&sys, 1).unwrap();
        // grid ends on the rising side of the barrier at ~274 bohr
        assert!(matches!(pot.sample(&log_grid(20.0, 250.0, 50)), Err(Error::Resolution { .. })));
        // three samples straddling the barrier too coarsely
        assert!(matches!(pot.sample(&[30.0, 274.0, 40000.0]), Err(Error::Resolution { .. })));
    }

    #[test]
    fn p_wave_barrier_monotonic_in_dipole() {
        // M = 0: attractive diagonal term, and the coupling only pushes it further down.
        // |M| = 1: repulsive diagonal term; monotonic for the uncoupled p wave only,
        // since coupling to L = 3 pulls the full adiabat's barrier back down beyond
        // d ~ 0.05 a.u. for KRb.
        let mut last_m0 = f64::INFINITY;
        let mut last_m1 = 0.0;
        for i in 0..=12 {
            let d = 0.025 * i as f64;
            let sys = krb(d, Symmetry::IdenticalFermions);
            let m0 = AdiabaticPotential::for_channel(&sys, Channel { l: 1, m: 0 }, 7).unwrap();
            let m1_basis = ChannelBasis::from_partial_waves(1, &[1]).unwrap();
            let m1 = AdiabaticPotential::new(&sys, &m1_basis, Channel { l: 1, m: 1 }).unwrap();
            let b0 = m0.barrier(20.0, 1e6).unwrap().unwrap().height;
            let b1 = m1.barrier(20.0, 1e6).unwrap().unwrap().height;
            assert!(b0 <= last_m0 * (1.0 + 1e-9), "M=0 at d={d}");
            assert!(b1 >= last_m1 * (1.0 - 1e-9), "|M|=1 at d={d}");
            last_m0 = b0;
            last_m1 = b1;
        }
    }
}
