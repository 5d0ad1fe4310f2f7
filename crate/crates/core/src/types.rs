//! Labels shared by both transmitters: bit values, bases and intensity sets.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bit {
    Zero,
    One,
}

impl Bit {
    pub const ALL: [Bit; 2] = [Bit::Zero, Bit::One];

    pub fn index(self) -> usize {
        match self {
            Bit::Zero => 0,
            Bit::One => 1,
        }
    }

    pub fn flip(self) -> Bit {
        match self {
            Bit::Zero => Bit::One,
            Bit::One => Bit::Zero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::Z, Basis::X];

    pub fn index(self) -> usize {
        match self {
            Basis::Z => 0,
            Basis::X => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Intensity {
    I0,
    I1,
    I2,
}

impl Intensity {
    pub const ALL: [Intensity; 3] = [Intensity::I0, Intensity::I1, Intensity::I2];

    pub fn index(self) -> usize {
        match self {
            Intensity::I0 => 0,
            Intensity::I1 => 1,
            Intensity::I2 => 2,
        }
    }
}

impl fmt::Display for Intensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Either a single bit value or the union of both bit regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BitSel {
    Bit(Bit),
    Both,
}

/// A post-selection region (passive source) or preparation setting family
/// (OIL source), labelled by bit, basis and intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegionSpec {
    pub bit: BitSel,
    pub basis: Basis,
    pub intensity: Intensity,
}

impl RegionSpec {
    pub fn new(bit: Bit, basis: Basis, intensity: Intensity) -> Self {
        RegionSpec { bit: BitSel::Bit(bit), basis, intensity }
    }

    pub fn union(basis: Basis, intensity: Intensity) -> Self {
        RegionSpec { bit: BitSel::Both, basis, intensity }
    }

    /// All twelve single-bit regions in a fixed order: basis, intensity, bit.
    pub fn all_single() -> Vec<RegionSpec> {
        let mut out = Vec::with_capacity(12);
        for basis in Basis::ALL {
            for intensity in Intensity::ALL {
                for bit in Bit::ALL {
                    out.push(RegionSpec::new(bit, basis, intensity));
                }
            }
        }
        out
    }
}

impl fmt::Display for RegionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bit = match self.bit {
            BitSel::Bit(Bit::Zero) => "0",
            BitSel::Bit(Bit::One) => "1",
            BitSel::Both => "*",
        };
        write!(f, "{}{:?}{:?}", bit, self.basis, self.intensity)
    }
}
