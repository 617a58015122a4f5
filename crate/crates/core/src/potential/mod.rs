//! Long-range interaction of two polarized polar molecules in the partial-wave
//! basis: centrifugal + isotropic van der Waals + dipole–dipole.

mod adiabatic;
mod angular;
mod eigen;

use std::fmt;

pub use adiabatic::{adiabatic_curves, find_barrier, log_grid, AdiabaticCurve, AdiabaticPotential, Barrier};
pub use angular::{p2_matrix_element, wigner_3j};
pub use eigen::{jacobi_eigen, Eigen, SymmetricMatrix};

use crate::error::{Error, Result};

/// Partial wave |L, M⟩ of the relative motion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Channel {
    pub l: u32,
    pub m: i32,
}

impl Channel {
    pub fn new(l: u32, m: i32) -> Result<Self> {
        if m.unsigned_abs() > l {
            return Err(Error::invalid(format!("|M| = {} exceeds L = {l}", m.abs())));
        }
        Ok(Self { l, m })
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.l, self.m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
    All,
}

impl Parity {
    pub fn admits(self, l: u32) -> bool {
        match self {
            Parity::Even => l.is_multiple_of(2),
            Parity::Odd => l % 2 == 1,
            Parity::All => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Symmetry {
    IdenticalFermions,
    IdenticalBosons,
    Distinguishable,
}

impl Symmetry {
    pub fn parity(self) -> Parity {
        match self {
            Symmetry::IdenticalFermions => Parity::Odd,
            Symmetry::IdenticalBosons => Parity::Even,
            Symmetry::Distinguishable => Parity::All,
        }
    }

    /// Rate prefactor g: 1 for indistinguishable, 2 for distinguishable
    /// particles in the incident channel.
    pub fn statistical_factor(self) -> f64 {
        match self {
            Symmetry::IdenticalFermions | Symmetry::IdenticalBosons => 1.0,
            Symmetry::Distinguishable => 2.0,
        }
    }
}

/// All partial waves of one conserved projection M and one parity class.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelBasis {
    m: i32,
    parity: Parity,
    l_max: u32,
    channels: Vec<Channel>,
}

impl ChannelBasis {
    pub fn new(m: i32, parity: Parity, l_max: u32) -> Result<Self> {
        let channels: Vec<Channel> =
            (m.unsigned_abs()..=l_max).filter(|&l| parity.admits(l)).map(|l| Channel { l, m }).collect();
        if channels.is_empty() {
            return Err(Error::invalid(format!("empty basis for M = {m}, {parity:?} parity, L_max = {l_max}")));
        }
        Ok(Self { m, parity, l_max, channels })
    }

    /// Basis from an explicit list of L values sharing one M.
    pub fn from_partial_waves(m: i32, ls: &[u32]) -> Result<Self> {
        let mut ls = ls.to_vec();
        ls.sort_unstable();
        ls.dedup();
        let channels = ls.iter().map(|&l| Channel::new(l, m)).collect::<Result<Vec<_>>>()?;
        let l_max = *ls.last().ok_or_else(|| Error::invalid("empty partial-wave list"))?;
        let parity = if ls.iter().all(|l| l % 2 == 0) {
            Parity::Even
        } else if ls.iter().all(|l| l % 2 == 1) {
            Parity::Odd
        } else {
            Parity::All
        };
        Ok(Self { m, parity, l_max, channels })
    }

    pub fn m(&self) -> i32 {
        self.m
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }
}

/// Every (M, parity) block allowed for `symmetry` up to `l_max`, M ≥ 0 only;
/// the −M blocks are degenerate copies.
pub fn symmetry_blocks(symmetry: Symmetry, l_max: u32) -> Vec<ChannelBasis> {
    (0..=l_max as i32).filter_map(|m| ChannelBasis::new(m, symmetry.parity(), l_max).ok()).collect()
}

/// Two polar molecules with their long-range parameters, all in atomic units.
#[derive(Clone, Debug, PartialEq)]
pub struct CollisionSystem {
    mu: f64,
    c6: f64,
    dipole: f64,
    symmetry: Symmetry,
    g_override: Option<f64>,
}

impl CollisionSystem {
    pub fn new(mu: f64, c6: f64, dipole: f64, symmetry: Symmetry) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("reduced mass must be positive, got {mu}")));
        }
        if !(c6 > 0.0 && c6.is_finite()) {
            return Err(Error::invalid(format!("C6 must be positive, got {c6}")));
        }
        if !(dipole >= 0.0 && dipole.is_finite()) {
            return Err(Error::invalid(format!("dipole must be non-negative, got {dipole}")));
        }
        Ok(Self { mu, c6, dipole, symmetry, g_override: None })
    }

    pub fn with_dipole(&self, dipole: f64) -> Result<Self> {
        let mut out = Self::new(self.mu, self.c6, dipole, self.symmetry)?;
        out.g_override = self.g_override;
        Ok(out)
    }

    /// Replaces the rate prefactor g of [`Symmetry::statistical_factor`].
    pub fn with_statistical_factor(mut self, g: f64) -> Result<Self> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::invalid(format!("statistical factor must be positive, got {g}")));
        }
        self.g_override = Some(g);
        Ok(self)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn c6(&self) -> f64 {
        self.c6
    }

    pub fn dipole(&self) -> f64 {
        self.dipole
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn statistical_factor(&self) -> f64 {
        self.g_override.unwrap_or_else(|| self.symmetry.statistical_factor())
    }

    /// C₃(L, L'; M) = −2 d² ⟨L M|P₂|L' M⟩ for dipoles polarized along the field.
    pub fn c3(&self, l: u32, lp: u32, m: i32) -> Result<f64> {
        Ok(-2.0 * self.dipole * self.dipole * p2_matrix_element(l, lp, m)?)
    }

    /// Centrifugal plus van der Waals energy of a single partial wave.
    pub fn diagonal_potential(&self, l: u32, r: f64) -> f64 {
        let r2 = r * r;
        (l * (l + 1)) as f64 / (2.0 * self.mu * r2) - self.c6 / (r2 * r2 * r2)
    }
}

/// The R-independent pieces of the interaction matrix for one block.
#[derive(Clone, Debug)]
pub struct LongRangeMatrix {
    system: CollisionSystem,
    basis: ChannelBasis,
    c3: SymmetricMatrix,
}

impl LongRangeMatrix {
    pub fn new(system: &CollisionSystem, basis: &ChannelBasis) -> Result<Self> {
        let n = basis.len();
        let mut c3 = SymmetricMatrix::zeros(n);
        for (i, a) in basis.channels().iter().enumerate() {
            for (j, b) in basis.channels().iter().enumerate().skip(i) {
                c3.set(i, j, system.c3(a.l, b.l, basis.m())?);
            }
        }
        Ok(Self { system: system.clone(), basis: basis.clone(), c3 })
    }

    pub fn system(&self) -> &CollisionSystem {
        &self.system
    }

    pub fn basis(&self) -> &ChannelBasis {
        &self.basis
    }

    pub fn at(&self, r: f64) -> Result<SymmetricMatrix> {
        self.matrix_at(r, true)
    }

    /// Sorted eigenvalues of the interaction without the isotropic −C₆/R⁶,
    /// which only shifts every eigenvalue and would swamp the rest at small R.
    pub fn anisotropic_eigenvalues(&self, r: f64) -> Result<Vec<f64>> {
        self.sorted_eigenvalues(self.matrix_at(r, false)?, r)
    }

    fn matrix_at(&self, r: f64, with_vdw: bool) -> Result<SymmetricMatrix> {
        if !(r > 0.0) {
            return Err(Error::invalid(format!("R must be positive, got {r}")));
        }
        let n = self.basis.len();
        let r3 = r * r * r;
        let mut v = SymmetricMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut value = self.c3.get(i, j) / r3;
                if i == j {
                    let l = self.basis.channels()[i].l;
                    value += if with_vdw {
                        self.system.diagonal_potential(l, r)
                    } else {
                        (l * (l + 1)) as f64 / (2.0 * self.system.mu * r * r)
                    };
                }
                v.set(i, j, value);
            }
        }
        Ok(v)
    }

    /// Sorted eigenvalues at `r`, skipping the eigensolver when nothing couples.
    pub fn eigenvalues(&self, r: f64) -> Result<Vec<f64>> {
        self.sorted_eigenvalues(self.at(r)?, r)
    }

    fn sorted_eigenvalues(&self, v: SymmetricMatrix, r: f64) -> Result<Vec<f64>> {
        if v.is_diagonal() {
            let mut d = v.diagonal();
            d.sort_by(f64::total_cmp);
            return Ok(d);
        }
        jacobi_eigen(&v).map(|e| e.values).ok_or(Error::Eigensolver { r })
    }
}

pub fn potential_matrix(system: &CollisionSystem, basis: &ChannelBasis, r: f64) -> Result<SymmetricMatrix> {
    LongRangeMatrix::new(system, basis)?.at(r)
}
