//! Modular arithmetic on words up to 126 bits.
//!
//! Reductions go through Barrett with an exact `mu`; the truncated variant
//! mirrors a reduced-area multiplier and is tested bit-for-bit against the
//! classic path.

mod barrett;
mod prime;
pub mod wide;

use core::fmt;

pub use barrett::{
    barrett_precompute, ct_butterfly, gs_butterfly, mod_add, mod_inv, mod_mul, mod_pow, mod_sub,
    BarrettVariant, Element, Modulus, MAX_MODULUS_BITS,
};
pub use prime::{find_ntt_prime, has_order_pow2, is_prime, primitive_root_of_unity, NttParams, MR_WITNESSES};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MathError {
    EvenModulus(u128),
    ModulusTooSmall(u128),
    ModulusTooLarge(u128),
    NotInvertible(u128),
    BadBits(u32),
    NotPowerOfTwo(u64),
    NoPrime { bits: u32, n: u64 },
    OrderDoesNotDivide { order: u128, q: u128 },
    NoRoot { order: u128, q: u128 },
    BadRoot { n: usize },
}

impl fmt::Display for MathError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MathError::EvenModulus(q) => write!(f, "modulus {q} is even"),
            MathError::ModulusTooSmall(q) => write!(f, "modulus {q} is below 3"),
            MathError::ModulusTooLarge(q) => write!(f, "modulus {q} needs more than {MAX_MODULUS_BITS} bits"),
            MathError::NotInvertible(a) => write!(f, "{a} has no inverse"),
            MathError::BadBits(b) => write!(f, "bit width {b} outside 2..={MAX_MODULUS_BITS}"),
            MathError::NotPowerOfTwo(n) => write!(f, "{n} is not a power of two"),
            MathError::NoPrime { bits, n } => write!(f, "no prime of about {bits} bits is 1 mod {}", 2 * n),
            MathError::OrderDoesNotDivide { order, q } => write!(f, "order {order} does not divide {q}-1"),
            MathError::NoRoot { order, q } => write!(f, "no element of order {order} mod {q}"),
            MathError::BadRoot { n } => write!(f, "root does not have exact order {n}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MathError {}
