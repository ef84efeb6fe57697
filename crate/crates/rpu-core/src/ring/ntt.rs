use alloc::vec::Vec;

use crate::modmath::{Modulus, NttParams};

use super::{RingError, Tower};

fn check(t: &Tower, p: &NttParams) -> Result<(), RingError> {
    if t.coeffs.len() != p.n {
        return Err(RingError::SizeMismatch { expected: p.n, got: t.coeffs.len() });
    }
    if t.modulus != p.modulus {
        return Err(RingError::ModulusMismatch);
    }
    Ok(())
}

/// Powers `w^0 .. w^(len-1)`.
pub fn powers(w: u128, len: usize, m: &Modulus) -> Vec<u128> {
    let mut out = Vec::with_capacity(len);
    let mut x = 1 % m.q();
    for _ in 0..len {
        out.push(x);
        x = m.mul(x, w);
    }
    out
}

fn bit_reverse_permute(a: &mut [u128]) {
    let n = a.len();
    let bits = n.trailing_zeros();
    if bits == 0 {
        return;
    }
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            a.swap(i, j);
        }
    }
}

/// In-place cyclic transform `X_k = sum_j a_j w^(jk)`, natural order in and out.
pub fn cyclic_ntt_in_place(a: &mut [u128], w: u128, m: &Modulus) {
    let n = a.len();
    bit_reverse_permute(a);
    let tw = powers(w, n / 2, m);
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = n / len;
        for start in (0..n).step_by(len) {
            for j in 0..half {
                let t = m.mul(a[start + j + half], tw[j * step]);
                let u = a[start + j];
                a[start + j] = m.add(u, t);
                a[start + j + half] = m.sub(u, t);
            }
        }
        len <<= 1;
    }
}

/// Forward transform into the evaluation domain. With `psi` configured the
/// input is first twisted by `psi^j`, giving the negacyclic transform.
pub fn ntt_forward(t: &Tower, p: &NttParams) -> Result<Tower, RingError> {
    check(t, p)?;
    let m = &p.modulus;
    let mut a = t.coeffs.clone();
    if let Some(psi) = p.psi {
        for (x, s) in a.iter_mut().zip(powers(psi, p.n, m)) {
            *x = m.mul(*x, s);
        }
    }
    cyclic_ntt_in_place(&mut a, p.omega, m);
    Ok(Tower { coeffs: a, modulus: *m })
}

/// Exact inverse of [`ntt_forward`], including the `1/n` scaling.
pub fn ntt_inverse(t: &Tower, p: &NttParams) -> Result<Tower, RingError> {
    check(t, p)?;
    let m = &p.modulus;
    let mut a = t.coeffs.clone();
    cyclic_ntt_in_place(&mut a, p.omega_inv, m);
    match p.psi_inv {
        Some(pi) => {
            for (x, s) in a.iter_mut().zip(powers(pi, p.n, m)) {
                *x = m.mul(m.mul(*x, p.n_inv), s);
            }
        }
        None => {
            for x in a.iter_mut() {
                *x = m.mul(*x, p.n_inv);
            }
        }
    }
    Ok(Tower { coeffs: a, modulus: *m })
}

/// O(n^2) evaluation of the same map as [`ntt_forward`].
pub fn naive_ntt(t: &Tower, p: &NttParams) -> Result<Tower, RingError> {
    check(t, p)?;
    let m = &p.modulus;
    let n = p.n;
    let src: Vec<u128> = match p.psi {
        Some(psi) => t.coeffs.iter().zip(powers(psi, n, m)).map(|(&x, s)| m.mul(x, s)).collect(),
        None => t.coeffs.clone(),
    };
    let wp = powers(p.omega, n, m);
    let out = (0..n)
        .map(|k| {
            src.iter().enumerate().fold(0, |acc, (j, &x)| m.add(acc, m.mul(x, wp[(j * k) % n])))
        })
        .collect();
    Ok(Tower { coeffs: out, modulus: *m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn four_point() {
        let m = Modulus::new(17).unwrap();
        let p = NttParams::with_omega(4, m, 4).unwrap();
        let t = Tower::new(vec![1, 2, 3, 4], m).unwrap();
        assert_eq!(ntt_forward(&t, &p).unwrap().coeffs, vec![10, 7, 15, 6]);
        assert_eq!(naive_ntt(&t, &p).unwrap().coeffs, vec![10, 7, 15, 6]);
        let d = Tower::new(vec![1, 0, 0, 0], m).unwrap();
        assert_eq!(ntt_forward(&d, &p).unwrap().coeffs, vec![1, 1, 1, 1]);
        let back = ntt_inverse(&ntt_forward(&t, &p).unwrap(), &p).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn mismatch_errors() {
        let m = Modulus::new(17).unwrap();
        let p = NttParams::with_omega(4, m, 4).unwrap();
        let t = Tower::new(vec![1, 2], m).unwrap();
        assert!(ntt_forward(&t, &p).is_err());
        let t = Tower::new(vec![1, 2, 3, 4], Modulus::new(13).unwrap()).unwrap();
        assert!(ntt_forward(&t, &p).is_err());
    }
}
