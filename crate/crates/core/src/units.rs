//! Hartree atomic units and conversions to the lab units used at the I/O
//! boundary (CODATA 2018 constants).
//!
//! Everything past the boundary works in atomic units (ħ = mₑ = e = a₀ = 1).
//! Temperatures are energies through E = k_B·T.

use std::fmt;

use crate::error::{Error, Result};

/// E_h / k_B in kelvin.
pub const HARTREE_IN_KELVIN: f64 = 3.157_750_248_040_7e5;
/// Unified atomic mass unit in electron masses.
pub const AMU_IN_ELECTRON_MASS: f64 = 1_822.888_486_209;
/// Bohr radius in nanometres.
pub const BOHR_IN_NM: f64 = 0.052_917_721_090_3;
/// Debye (1e-21/c C·m) in units of e·a₀ (8.478_353_625_5e-30 C·m).
pub const DEBYE_IN_AU: f64 = 1e-21 / 299_792_458.0 / 8.478_353_625_5e-30;
/// Bohr radius in centimetres.
const BOHR_IN_CM: f64 = 5.291_772_109_03e-9;
/// Atomic unit of time in seconds.
const AU_TIME_IN_S: f64 = 2.418_884_326_585_7e-17;
/// Atomic unit of a two-body rate coefficient (a₀³ / t_au) in cm³/s.
pub const RATE_AU_IN_CM3_PER_S: f64 = BOHR_IN_CM * BOHR_IN_CM * BOHR_IN_CM / AU_TIME_IN_S;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dimension {
    Energy,
    Length,
    Mass,
    Dipole,
    Rate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Unit {
    Hartree,
    Kelvin,
    Microkelvin,
    Bohr,
    Nanometer,
    ElectronMass,
    Amu,
    AtomicDipole,
    Debye,
    AtomicRate,
    Cm3PerS,
}

impl Unit {
    pub fn dimension(self) -> Dimension {
        match self {
            Unit::Hartree | Unit::Kelvin | Unit::Microkelvin => Dimension::Energy,
            Unit::Bohr | Unit::Nanometer => Dimension::Length,
            Unit::ElectronMass | Unit::Amu => Dimension::Mass,
            Unit::AtomicDipole | Unit::Debye => Dimension::Dipole,
            Unit::AtomicRate | Unit::Cm3PerS => Dimension::Rate,
        }
    }

    /// Size of one of this unit in atomic units.
    pub const fn in_atomic_units(self) -> f64 {
        match self {
            Unit::Hartree | Unit::Bohr | Unit::ElectronMass | Unit::AtomicDipole | Unit::AtomicRate => 1.0,
            Unit::Kelvin => 1.0 / HARTREE_IN_KELVIN,
            Unit::Microkelvin => 1e-6 / HARTREE_IN_KELVIN,
            Unit::Nanometer => 1.0 / BOHR_IN_NM,
            Unit::Amu => AMU_IN_ELECTRON_MASS,
            Unit::Debye => DEBYE_IN_AU,
            Unit::Cm3PerS => 1.0 / RATE_AU_IN_CM3_PER_S,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Hartree => "Eh",
            Unit::Kelvin => "K",
            Unit::Microkelvin => "uK",
            Unit::Bohr => "bohr",
            Unit::Nanometer => "nm",
            Unit::ElectronMass => "me",
            Unit::Amu => "amu",
            Unit::AtomicDipole => "ea0",
            Unit::Debye => "D",
            Unit::AtomicRate => "a0^3/t_au",
            Unit::Cm3PerS => "cm^3/s",
        }
    }

    /// The atomic unit of the same dimension.
    pub fn atomic(self) -> Unit {
        match self.dimension() {
            Dimension::Energy => Unit::Hartree,
            Dimension::Length => Unit::Bohr,
            Dimension::Mass => Unit::ElectronMass,
            Dimension::Dipole => Unit::AtomicDipole,
            Dimension::Rate => Unit::AtomicRate,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: Unit,
}

impl Quantity {
    pub fn new(value: f64, unit: Unit) -> Self {
        Self { value, unit }
    }

    pub fn dimension(&self) -> Dimension {
        self.unit.dimension()
    }

    pub fn convert(&self, target: Unit) -> Result<Quantity> {
        if target.dimension() != self.dimension() {
            return Err(Error::invalid(format!(
                "cannot convert {:?} quantity in {} to {}",
                self.dimension(),
                self.unit.symbol(),
                target.symbol()
            )));
        }
        if target == self.unit {
            return Ok(*self);
        }
        let value = self.value * (self.unit.in_atomic_units() / target.in_atomic_units());

        Ok(Quantity::new(value, target))
    }

    pub fn to_au(&self) -> f64 {
        self.value * self.unit.in_atomic_units()
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.value, self.unit.symbol())
    }
}

pub fn microkelvin_to_hartree(e: f64) -> f64 {
    e * Unit::Microkelvin.in_atomic_units()
}

pub fn hartree_to_microkelvin(e: f64) -> f64 {
    e / Unit::Microkelvin.in_atomic_units()
}

pub fn debye_to_au(d: f64) -> f64 {
    d * DEBYE_IN_AU
}

pub fn au_to_debye(d: f64) -> f64 {
    d / DEBYE_IN_AU
}

pub fn amu_to_au(m: f64) -> f64 {
    m * AMU_IN_ELECTRON_MASS
}

pub fn rate_au_to_cm3_per_s(k: f64) -> f64 {
    k * RATE_AU_IN_CM3_PER_S
}

pub fn rate_cm3_per_s_to_au(k: f64) -> f64 {
    k / RATE_AU_IN_CM3_PER_S
}
