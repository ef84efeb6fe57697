use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::barrett::{Element, Modulus, MAX_MODULUS_BITS};
use super::MathError;

/// Witnesses used by [`is_prime`]: the first 64 primes.
pub const MR_WITNESSES: [u128; 64] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293,
    307, 311,
];

/// Miller-Rabin with the fixed witness set above. Deterministic; for odd
/// composites the error probability is below 4^-64.
pub fn is_prime(n: u128) -> bool {
    if n < 2 {
        return false;
    }
    for &p in MR_WITNESSES.iter() {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    if n >> MAX_MODULUS_BITS != 0 {
        // outside the Barrett range; fall back to trial-free answer
        return false;
    }
    let m = match Modulus::new(n) {
        Ok(m) => m,
        Err(_) => return false,
    };
    let d0 = n - 1;
    let s = d0.trailing_zeros();
    let d = d0 >> s;
    'witness: for &a in MR_WITNESSES.iter() {
        let mut x = m.pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = m.mul(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime `q >= 2^(bits-1)` with `q = 1 (mod 2n)`.
///
/// The search runs up to `2^(bits+1)`: for some (bits, n) pairs, such as
/// (13, 2048), no admissible prime exists below `2^bits`.
pub fn find_ntt_prime(bits: u32, n: u64) -> Result<Modulus, MathError> {
    if !(2..=MAX_MODULUS_BITS).contains(&bits) {
        return Err(MathError::BadBits(bits));
    }
    if n == 0 || !n.is_power_of_two() {
        return Err(MathError::NotPowerOfTwo(n));
    }
    let step = 2 * n as u128;
    let lo = 1u128 << (bits - 1);
    let hi = if bits + 1 > MAX_MODULUS_BITS { 1u128 << MAX_MODULUS_BITS } else { 1u128 << (bits + 1) };
    // first candidate >= lo that is 1 mod step
    let mut q = (lo + step - 2) / step * step + 1;
    if q < lo {
        q += step;
    }
    while q < hi {
        if is_prime(q) {
            return Modulus::new(q);
        }
        q += step;
    }
    Err(MathError::NoPrime { bits, n })
}

/// Distinct prime factors by trial division; used on group orders that are
/// small or smooth.
fn prime_factors(mut x: u128) -> Vec<u128> {
    let mut out = Vec::new();
    let mut p = 2u128;
    while p * p <= x {
        if x.is_multiple_of(p) {
            out.push(p);
            while x.is_multiple_of(p) {
                x /= p;
            }
        }
        p += if p == 2 { 1 } else { 2 };
        if p > 1 << 20 {
            break;
        }
    }
    if x > 1 {
        out.push(x);
    }
    out
}

/// An element of exact multiplicative order `order`.
pub fn primitive_root_of_unity(m: &Modulus, order: u128) -> Result<Element, MathError> {
    let q = m.q();
    if order == 0 || !(q - 1).is_multiple_of(order) {
        return Err(MathError::OrderDoesNotDivide { order, q });
    }
    if order == 1 {
        return Ok(Element(1));
    }
    let cofactor = (q - 1) / order;
    let primes = prime_factors(order);
    for a in 2..q.min(1 << 20) {
        let c = m.pow(a, cofactor);
        if c == 1 {
            continue;
        }
        if primes.iter().all(|&p| m.pow(c, order / p) != 1) {
            return Ok(Element(c));
        }
    }
    Err(MathError::NoRoot { order, q })
}

/// Does `w` have exact order `order` (a power of two) modulo `m`?
pub fn has_order_pow2(w: u128, order: u64, m: &Modulus) -> bool {
    order.is_power_of_two() && m.pow(w, order as u128) == 1 && (order == 1 || m.pow(w, order as u128 / 2) != 1)
}

/// Everything needed to run a size-n transform modulo one prime.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NttParams {
    pub n: usize,
    pub modulus: Modulus,
    pub omega: u128,
    pub omega_inv: u128,
    pub psi: Option<u128>,
    pub psi_inv: Option<u128>,
    pub n_inv: u128,
}

impl NttParams {
    /// Cyclic parameters with a caller-chosen root.
    pub fn with_omega(n: usize, modulus: Modulus, omega: u128) -> Result<Self, MathError> {
        Self::validate_n(n, &modulus, 1)?;
        if !has_order_pow2(omega, n as u64, &modulus) {
            return Err(MathError::BadRoot { n });
        }
        let omega_inv = modulus.inv(omega)?;
        let n_inv = modulus.inv(n as u128 % modulus.q())?;
        Ok(NttParams { n, modulus, omega, omega_inv, psi: None, psi_inv: None, n_inv })
    }

    /// Negacyclic parameters from a primitive 2n-th root psi; omega = psi^2.
    pub fn with_psi(n: usize, modulus: Modulus, psi: u128) -> Result<Self, MathError> {
        Self::validate_n(n, &modulus, 2)?;
        if !has_order_pow2(psi, 2 * n as u64, &modulus) {
            return Err(MathError::BadRoot { n });
        }
        let omega = modulus.mul(psi, psi);
        let mut p = Self::with_omega(n, modulus, omega)?;
        p.psi = Some(psi);
        p.psi_inv = Some(modulus.inv(psi)?);
        Ok(p)
    }

    /// Cyclic parameters with the canonical root found by search.
    pub fn cyclic(n: usize, modulus: Modulus) -> Result<Self, MathError> {
        Self::validate_n(n, &modulus, 1)?;
        let w = primitive_root_of_unity(&modulus, n as u128)?;
        Self::with_omega(n, modulus, w.0)
    }

    /// Negacyclic parameters with the canonical 2n-th root found by search.
    pub fn negacyclic(n: usize, modulus: Modulus) -> Result<Self, MathError> {
        Self::validate_n(n, &modulus, 2)?;
        let psi = primitive_root_of_unity(&modulus, 2 * n as u128)?;
        Self::with_psi(n, modulus, psi.0)
    }

    fn validate_n(n: usize, m: &Modulus, mult: u128) -> Result<(), MathError> {
        if n == 0 || !n.is_power_of_two() {
            return Err(MathError::NotPowerOfTwo(n as u64));
        }
        if !(m.q() - 1).is_multiple_of(mult * n as u128) {
            return Err(MathError::OrderDoesNotDivide { order: mult * n as u128, q: m.q() });
        }
        Ok(())
    }

    pub fn log_n(&self) -> u32 {
        self.n.trailing_zeros()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_primes() {
        let ps: Vec<u128> = (0..60).filter(|&x| is_prime(x)).collect();
        assert_eq!(ps, [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]);
        assert!(is_prime(12289));
        assert!(!is_prime(12289 * 17));
        // Carmichael number
        assert!(!is_prime(561));
    }

    #[test]
    fn ntt_primes() {
        assert_eq!(find_ntt_prime(5, 4).unwrap().q(), 17);
        assert_eq!(find_ntt_prime(13, 2048).unwrap().q(), 12289);
        assert!(find_ntt_prime(1, 4).is_err());
        assert!(find_ntt_prime(10, 3).is_err());
    }

    #[test]
    fn roots() {
        let m = Modulus::new(17).unwrap();
        let w = primitive_root_of_unity(&m, 4).unwrap().0;
        assert_eq!(m.pow(w, 2), 16);
        assert_eq!(m.pow(w, 4), 1);
        let g = primitive_root_of_unity(&m, 16).unwrap().0;
        assert_ne!(m.pow(g, 8), 1);
        assert!(primitive_root_of_unity(&m, 5).is_err());
    }

    #[test]
    fn params_validation() {
        let m = Modulus::new(17).unwrap();
        let p = NttParams::with_omega(4, m, 4).unwrap();
        assert_eq!(p.n_inv, 13);
        assert!(NttParams::with_omega(4, m, 16).is_err());
        let p = NttParams::negacyclic(8, m).unwrap();
        assert_eq!(m.mul(p.psi.unwrap(), p.psi.unwrap()), p.omega);
        assert!(NttParams::negacyclic(16, m).is_err());
    }
}
