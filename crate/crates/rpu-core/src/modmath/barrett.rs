use core::fmt;

use serde::{Deserialize, Serialize};

use super::wide::{div_wide, mul_wide, U256};
use super::MathError;

/// Largest supported modulus bit length.
pub const MAX_MODULUS_BITS: u32 = 126;

/// Guard bits kept below the quotient cut in the truncated multiply.
const TRUNC_GUARD: u32 = 8;

/// Which Barrett datapath to use for reductions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum BarrettVariant {
    /// Full quotient product, full-width remainder.
    #[default]
    Classic,
    /// Truncated quotient product and a remainder on the low k+2 bits.
    Truncated,
}

/// A modulus together with its Barrett constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Modulus {
    q: u128,
    k: u32,
    // q >= 2^(k-1) bounds mu by 2^(k+1), so it fits a u128 for k <= 126
    mu: u128,
}

/// A residue in canonical form `[0, q)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Element(pub u128);

impl Element {
    pub const ZERO: Element = Element(0);

    pub fn value(self) -> u128 {
        self.0
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<Element> for u128 {
    fn from(e: Element) -> u128 {
        e.0
    }
}

/// Build a [`Modulus`] with an exact `mu = floor(2^(2k) / q)`.
pub fn barrett_precompute(q: u128) -> Result<Modulus, MathError> {
    if q < 3 {
        return Err(MathError::ModulusTooSmall(q));
    }
    if q.is_multiple_of(2) {
        return Err(MathError::EvenModulus(q));
    }
    let k = 128 - q.leading_zeros();
    if k > MAX_MODULUS_BITS {
        return Err(MathError::ModulusTooLarge(q));
    }
    let (mu, _) = div_wide(&U256::pow2(2 * k), q);
    debug_assert_eq!(mu.hi, 0);
    Ok(Modulus { q, k, mu: mu.lo })
}

impl Modulus {
    pub fn new(q: u128) -> Result<Self, MathError> {
        barrett_precompute(q)
    }

    pub fn q(&self) -> u128 {
        self.q
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn mu(&self) -> u128 {
        self.mu
    }

    pub fn element(&self, v: u128) -> Element {
        Element(v % self.q)
    }

    /// Reduce `x < q^2` (any `x < 2^(2k)` works) with classic Barrett.
    /// Returns the remainder and the number of final corrections.
    pub fn reduce_classic_counted(&self, x: U256) -> (u128, u32) {
        let k = self.k;
        let q1 = x.shr(k - 1);
        debug_assert_eq!(q1.hi, 0);
        let q2 = mul_wide(q1.lo, self.mu);
        let q3 = q2.shr(k + 1);
        debug_assert_eq!(q3.hi, 0);
        let prod = mul_wide(q3.lo, self.q);
        let (r, borrow) = x.overflowing_sub(&prod);
        debug_assert!(!borrow);
        debug_assert_eq!(r.hi, 0);
        let mut r = r.lo;
        let mut fixes = 0;
        while r >= self.q {
            r -= self.q;
            fixes += 1;
        }
        (r, fixes)
    }

    /// The area-optimised path: the quotient multiply drops 32-bit partial
    /// products whose contribution sits entirely below the cut, and the
    /// remainder is formed on the low k+2 bits only.
    pub fn reduce_truncated_counted(&self, x: U256) -> (u128, u32) {
        let k = self.k;
        let q1 = x.shr(k - 1).lo;
        let q3 = truncated_high_mul(q1, self.mu, k + 1);
        let width = k + 2;
        let mask = if width >= 128 { u128::MAX } else { (1u128 << width) - 1 };
        let mut r = x.lo.wrapping_sub(q3.wrapping_mul(self.q)) & mask;
        let mut fixes = 0;
        while r >= self.q {
            r -= self.q;
            fixes += 1;
        }
        (r, fixes)
    }

    pub fn reduce_wide(&self, x: U256, variant: BarrettVariant) -> u128 {
        match variant {
            BarrettVariant::Classic => self.reduce_classic_counted(x).0,
            BarrettVariant::Truncated => self.reduce_truncated_counted(x).0,
        }
    }

    /// `a*b mod q` on raw canonical values.
    #[inline]
    pub fn mul(&self, a: u128, b: u128) -> u128 {
        self.reduce_classic_counted(mul_wide(a, b)).0
    }

    #[inline]
    pub fn mul_with(&self, a: u128, b: u128, variant: BarrettVariant) -> u128 {
        self.reduce_wide(mul_wide(a, b), variant)
    }

    #[inline]
    pub fn add(&self, a: u128, b: u128) -> u128 {
        // a, b < q < 2^126 so the sum cannot overflow
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u128, b: u128) -> u128 {
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    pub fn pow(&self, a: u128, mut e: u128) -> u128 {
        let mut base = a % self.q;
        let mut acc = 1 % self.q;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Inverse via Fermat; meaningful for prime q.
    pub fn inv(&self, a: u128) -> Result<u128, MathError> {
        if a.is_multiple_of(self.q) {
            return Err(MathError::NotInvertible(a));
        }
        Ok(self.pow(a, self.q - 2))
    }
}

/// floor(a*b / 2^cut) computed from 32-bit limb partial products, skipping
/// every product whose top bit lies below `cut - TRUNC_GUARD`. The result is
/// never larger than the exact quotient and at most one smaller.
fn truncated_high_mul(a: u128, b: u128, cut: u32) -> u128 {
    let limbs = |x: u128| [x as u32, (x >> 32) as u32, (x >> 64) as u32, (x >> 96) as u32];
    let (al, bl) = (limbs(a), limbs(b));
    let floor = cut.saturating_sub(TRUNC_GUARD);
    let mut acc = U256::ZERO;
    for (i, &ai) in al.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in bl.iter().enumerate() {
            let col = 32 * (i + j) as u32;
            // a_i*b_j < 2^(col+64)
            if col + 64 <= floor {
                continue;
            }
            let p = (ai as u64 as u128) * (bj as u64 as u128);
            acc = acc.wrapping_add(&U256::from_u128(p).shl(col));
        }
    }
    acc.shr(cut).lo
}

/// Modular multiply on elements, classic Barrett.
pub fn mod_mul(a: Element, b: Element, m: &Modulus) -> Element {
    Element(m.mul(a.0, b.0))
}

pub fn mod_add(a: Element, b: Element, m: &Modulus) -> Element {
    Element(m.add(a.0, b.0))
}

pub fn mod_sub(a: Element, b: Element, m: &Modulus) -> Element {
    Element(m.sub(a.0, b.0))
}

pub fn mod_pow(a: Element, e: u128, m: &Modulus) -> Element {
    Element(m.pow(a.0, e))
}

pub fn mod_inv(a: Element, m: &Modulus) -> Result<Element, MathError> {
    m.inv(a.0).map(Element)
}

/// Cooley-Tukey butterfly: `(a + w*b, a - w*b)`.
pub fn ct_butterfly(a: Element, b: Element, w: Element, m: &Modulus) -> (Element, Element) {
    let t = m.mul(w.0, b.0);
    (Element(m.add(a.0, t)), Element(m.sub(a.0, t)))
}

/// Gentleman-Sande butterfly: `(a + b, (a - b)*w)`.
pub fn gs_butterfly(a: Element, b: Element, w: Element, m: &Modulus) -> (Element, Element) {
    (Element(m.add(a.0, b.0)), Element(m.mul(m.sub(a.0, b.0), w.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precompute_small() {
        let m = barrett_precompute(17).unwrap();
        assert_eq!((m.k(), m.mu()), (5, 60));
        let m = barrett_precompute(3).unwrap();
        assert_eq!((m.k(), m.mu()), (2, 5));
    }

    #[test]
    fn precompute_rejects() {
        assert!(barrett_precompute(16).is_err());
        assert!(barrett_precompute(1).is_err());
        assert!(barrett_precompute(1u128 << 126 | 1).is_err());
        assert!(barrett_precompute((1u128 << 126) - 1).is_ok());
    }

    #[test]
    fn ops_small() {
        let m = Modulus::new(17).unwrap();
        assert_eq!(mod_mul(Element(3), Element(4), &m), Element(12));
        assert_eq!(mod_add(Element(16), Element(5), &m), Element(4));
        assert_eq!(mod_sub(Element(3), Element(5), &m), Element(15));
        assert_eq!(mod_pow(Element(2), 4, &m), Element(16));
        assert_eq!(mod_inv(Element(2), &m).unwrap(), Element(9));
        assert!(mod_inv(Element(0), &m).is_err());
        assert_eq!(ct_butterfly(Element(3), Element(5), Element(2), &m), (Element(13), Element(10)));
    }

    #[test]
    fn truncated_matches_classic_small_exhaustive() {
        for q in (3u128..200).step_by(2) {
            let m = Modulus::new(q).unwrap();
            for a in 0..q {
                for b in 0..q {
                    let x = mul_wide(a, b);
                    let (c, fc) = m.reduce_classic_counted(x);
                    let (t, ft) = m.reduce_truncated_counted(x);
                    assert_eq!(c, a * b % q);
                    assert_eq!(t, c);
                    assert!(fc <= 2 && ft <= 3);
                }
            }
        }
    }
}
