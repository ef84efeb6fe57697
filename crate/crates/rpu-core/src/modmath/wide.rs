//! Minimal 256-bit unsigned arithmetic, just what Barrett needs.

use core::cmp::Ordering;

/// 256-bit unsigned integer as (high, low) 128-bit halves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct U256 {
    pub hi: u128,
    pub lo: u128,
}

impl U256 {
    pub const ZERO: U256 = U256 { hi: 0, lo: 0 };

    pub const fn from_u128(x: u128) -> Self {
        U256 { hi: 0, lo: x }
    }

    /// 2^e for e < 256.
    pub const fn pow2(e: u32) -> Self {
        if e < 128 {
            U256 { hi: 0, lo: 1u128 << e }
        } else {
            U256 { hi: 1u128 << (e - 128), lo: 0 }
        }
    }

    pub fn bits(&self) -> u32 {
        if self.hi != 0 {
            256 - self.hi.leading_zeros()
        } else {
            128 - self.lo.leading_zeros()
        }
    }

    pub fn bit(&self, i: u32) -> bool {
        if i < 128 {
            (self.lo >> i) & 1 == 1
        } else {
            (self.hi >> (i - 128)) & 1 == 1
        }
    }

    pub fn shr(&self, s: u32) -> Self {
        match s {
            0 => *self,
            1..=127 => U256 {
                hi: self.hi >> s,
                lo: (self.lo >> s) | (self.hi << (128 - s)),
            },
            128..=255 => U256 { hi: 0, lo: self.hi >> (s - 128) },
            _ => U256::ZERO,
        }
    }

    pub fn shl(&self, s: u32) -> Self {
        match s {
            0 => *self,
            1..=127 => U256 {
                hi: (self.hi << s) | (self.lo >> (128 - s)),
                lo: self.lo << s,
            },
            128..=255 => U256 { hi: self.lo << (s - 128), lo: 0 },
            _ => U256::ZERO,
        }
    }

    pub fn overflowing_sub(&self, o: &U256) -> (U256, bool) {
        let (lo, b1) = self.lo.overflowing_sub(o.lo);
        let (hi, b2) = self.hi.overflowing_sub(o.hi);
        let (hi, b3) = hi.overflowing_sub(b1 as u128);
        (U256 { hi, lo }, b2 | b3)
    }

    pub fn wrapping_add(&self, o: &U256) -> U256 {
        let (lo, c) = self.lo.overflowing_add(o.lo);
        U256 {
            hi: self.hi.wrapping_add(o.hi).wrapping_add(c as u128),
            lo,
        }
    }

    /// Low 128 bits of the value; caller guarantees it fits when needed.
    pub fn low(&self) -> u128 {
        self.lo
    }
}

impl PartialOrd for U256 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for U256 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.hi.cmp(&other.hi).then(self.lo.cmp(&other.lo))
    }
}

/// Full 128x128 -> 256-bit product.
pub fn mul_wide(a: u128, b: u128) -> U256 {
    let (a1, a0) = (a >> 64, a & u64::MAX as u128);
    let (b1, b0) = (b >> 64, b & u64::MAX as u128);
    let p00 = a0 * b0;
    let p01 = a0 * b1;
    let p10 = a1 * b0;
    let p11 = a1 * b1;
    let mid = (p00 >> 64) + (p01 & u64::MAX as u128) + (p10 & u64::MAX as u128);
    let lo = (p00 & u64::MAX as u128) | (mid << 64);
    let hi = p11 + (p01 >> 64) + (p10 >> 64) + (mid >> 64);
    U256 { hi, lo }
}

/// floor(n / d) for a 256-bit numerator and nonzero 128-bit divisor whose
/// quotient fits in 256 bits. Plain shift-subtract long division.
pub fn div_wide(n: &U256, d: u128) -> (U256, u128) {
    assert!(d != 0, "division by zero");
    let mut q = U256::ZERO;
    // remainder kept below d < 2^128, but r<<1 may need 129 bits
    let mut r: u128 = 0;
    for i in (0..n.bits()).rev() {
        let top = r >> 127;
        r = (r << 1) | n.bit(i) as u128;
        if top == 1 || r >= d {
            r = r.wrapping_sub(d);
            q = q.wrapping_add(&U256::pow2(i));
        }
    }
    (q, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mul_wide_small() {
        let p = mul_wide(u128::MAX, u128::MAX);
        // (2^128-1)^2 = 2^256 - 2^129 + 1
        assert_eq!(p.lo, 1);
        assert_eq!(p.hi, u128::MAX - 1);
    }

    #[test]
    fn div_wide_matches_u128() {
        let (q, r) = div_wide(&U256::from_u128(1000), 17);
        assert_eq!((q.lo, r), (58, 14));
        let (q, r) = div_wide(&U256::pow2(10), 17);
        assert_eq!((q.lo, r), (60, 4));
    }

    #[test]
    fn shifts_roundtrip() {
        let x = U256 { hi: 0x1234, lo: 0xdead_beef << 90 };
        for s in [0, 1, 63, 64, 100, 115] {
            assert_eq!(x.shl(s).shr(s), x, "shift {s}");
        }
        assert_eq!(x.shr(256), U256::ZERO);
    }
}
