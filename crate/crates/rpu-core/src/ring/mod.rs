//! Golden ring kernels: transforms, tower-wise arithmetic and RNS basis
//! operations. These are the oracle for the simulator and code generator.

mod ntt;
mod rns;

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::modmath::{MathError, Modulus};

pub use ntt::{cyclic_ntt_in_place, naive_ntt, ntt_forward, ntt_inverse, powers};
pub use rns::{
    fast_basis_extension, gcd, ring_add, ring_mult, rns_compose, rns_decompose, switch_modulus,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RingError {
    SizeMismatch { expected: usize, got: usize },
    ModulusMismatch,
    NotPowerOfTwo(usize),
    CoeffOutOfRange { index: usize, value: u128 },
    StructureMismatch,
    DomainMismatch,
    NotCoprime(u128, u128),
    NeedParams,
    Empty,
    Math(MathError),
}

impl From<MathError> for RingError {
    fn from(e: MathError) -> Self {
        RingError::Math(e)
    }
}

impl fmt::Display for RingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RingError::SizeMismatch { expected, got } => write!(f, "length {got}, expected {expected}"),
            RingError::ModulusMismatch => write!(f, "modulus mismatch"),
            RingError::NotPowerOfTwo(n) => write!(f, "length {n} is not a power of two"),
            RingError::CoeffOutOfRange { index, value } => {
                write!(f, "coefficient {index} = {value} is not reduced")
            }
            RingError::StructureMismatch => write!(f, "tower structure differs"),
            RingError::DomainMismatch => write!(f, "domain flags differ"),
            RingError::NotCoprime(a, b) => write!(f, "moduli {a} and {b} are not coprime"),
            RingError::NeedParams => write!(f, "transform parameters needed for coefficient-domain product"),
            RingError::Empty => write!(f, "no towers"),
            RingError::Math(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for RingError {}

/// One residue polynomial.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tower {
    pub coeffs: Vec<u128>,
    pub modulus: Modulus,
}

impl Tower {
    pub fn new(coeffs: Vec<u128>, modulus: Modulus) -> Result<Self, RingError> {
        let n = coeffs.len();
        if n == 0 || !n.is_power_of_two() {
            return Err(RingError::NotPowerOfTwo(n));
        }
        if let Some((index, &value)) = coeffs.iter().enumerate().find(|(_, &c)| c >= modulus.q()) {
            return Err(RingError::CoeffOutOfRange { index, value });
        }
        Ok(Tower { coeffs, modulus })
    }

    pub fn zero(n: usize, modulus: Modulus) -> Self {
        Tower { coeffs: alloc::vec![0; n], modulus }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn q(&self) -> u128 {
        self.modulus.q()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    #[default]
    Coefficient,
    Evaluation,
}

/// A polynomial in residue form: one tower per modulus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RnsPoly {
    pub towers: Vec<Tower>,
    pub domain: Domain,
}

impl RnsPoly {
    pub fn new(towers: Vec<Tower>, domain: Domain) -> Result<Self, RingError> {
        let first = towers.first().ok_or(RingError::Empty)?;
        let n = first.len();
        for t in &towers {
            if t.len() != n {
                return Err(RingError::SizeMismatch { expected: n, got: t.len() });
            }
        }
        for (i, a) in towers.iter().enumerate() {
            for b in &towers[i + 1..] {
                if gcd(a.q(), b.q()) != 1 {
                    return Err(RingError::NotCoprime(a.q(), b.q()));
                }
            }
        }
        Ok(RnsPoly { towers, domain })
    }

    pub fn n(&self) -> usize {
        self.towers[0].len()
    }

    pub fn moduli(&self) -> Vec<Modulus> {
        self.towers.iter().map(|t| t.modulus).collect()
    }
}
