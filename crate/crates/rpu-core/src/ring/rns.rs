use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::modmath::{Modulus, NttParams};

use super::{ntt_forward, ntt_inverse, Domain, RingError, RnsPoly, Tower};

pub fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn same_shape(a: &RnsPoly, b: &RnsPoly) -> Result<(), RingError> {
    if a.towers.len() != b.towers.len() {
        return Err(RingError::StructureMismatch);
    }
    for (x, y) in a.towers.iter().zip(&b.towers) {
        if x.modulus != y.modulus || x.len() != y.len() {
            return Err(RingError::StructureMismatch);
        }
    }
    if a.domain != b.domain {
        return Err(RingError::DomainMismatch);
    }
    Ok(())
}

fn zip_towers(a: &RnsPoly, b: &RnsPoly, f: impl Fn(&Modulus, u128, u128) -> u128) -> RnsPoly {
    let towers = a
        .towers
        .iter()
        .zip(&b.towers)
        .map(|(x, y)| Tower {
            coeffs: x.coeffs.iter().zip(&y.coeffs).map(|(&u, &v)| f(&x.modulus, u, v)).collect(),
            modulus: x.modulus,
        })
        .collect();
    RnsPoly { towers, domain: a.domain }
}

pub fn ring_add(a: &RnsPoly, b: &RnsPoly) -> Result<RnsPoly, RingError> {
    same_shape(a, b)?;
    Ok(zip_towers(a, b, |m, u, v| m.add(u, v)))
}

/// Pointwise product in the evaluation domain. For coefficient-domain inputs
/// the product goes through forward transform, pointwise multiply and
/// inverse transform, one `NttParams` per tower; it is negacyclic when the
/// params carry `psi` and cyclic otherwise.
pub fn ring_mult(a: &RnsPoly, b: &RnsPoly, params: &[NttParams]) -> Result<RnsPoly, RingError> {
    same_shape(a, b)?;
    match a.domain {
        Domain::Evaluation => Ok(zip_towers(a, b, |m, u, v| m.mul(u, v))),
        Domain::Coefficient => {
            if params.len() != a.towers.len() {
                return Err(RingError::NeedParams);
            }
            let mut towers = Vec::with_capacity(params.len());
            for ((x, y), p) in a.towers.iter().zip(&b.towers).zip(params) {
                let fx = ntt_forward(x, p)?;
                let fy = ntt_forward(y, p)?;
                let m = &p.modulus;
                let prod = Tower {
                    coeffs: fx.coeffs.iter().zip(&fy.coeffs).map(|(&u, &v)| m.mul(u, v)).collect(),
                    modulus: *m,
                };
                towers.push(ntt_inverse(&prod, p)?);
            }
            Ok(RnsPoly { towers, domain: Domain::Coefficient })
        }
    }
}

/// Map each coefficient through its centered lift in `(-q/2, q/2]` and
/// reduce into `q_new`.
pub fn switch_modulus(t: &Tower, q_new: Modulus) -> Tower {
    let q = t.q();
    let half = q / 2;
    let p = q_new.q();
    let coeffs = t
        .coeffs
        .iter()
        .map(|&x| {
            if x <= half {
                x % p
            } else {
                let neg = (q - x) % p;
                if neg == 0 {
                    0
                } else {
                    p - neg
                }
            }
        })
        .collect();
    Tower { coeffs, modulus: q_new }
}

fn prod_except(moduli: &[Modulus], skip: usize, target: &Modulus) -> u128 {
    moduli
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != skip)
        .fold(1 % target.q(), |acc, (_, m)| target.mul(acc, m.q() % target.q()))
}

/// Approximate extension to a new basis: the result for each target prime is
/// `x + e*Q mod p` for some `0 <= e < L`, where `L` is the source tower count.
pub fn fast_basis_extension(p: &RnsPoly, target: &[Modulus]) -> Result<RnsPoly, RingError> {
    if p.domain != Domain::Coefficient {
        return Err(RingError::DomainMismatch);
    }
    let src = p.moduli();
    for s in &src {
        for t in target {
            if gcd(s.q(), t.q()) != 1 {
                return Err(RingError::NotCoprime(s.q(), t.q()));
            }
        }
    }
    // (Q/q_i)^-1 mod q_i and (Q/q_i) mod p_j
    let mut hat_inv = Vec::with_capacity(src.len());
    for (i, m) in src.iter().enumerate() {
        hat_inv.push(m.inv(prod_except(&src, i, m))?);
    }
    let hat_mod: Vec<Vec<u128>> =
        target.iter().map(|t| (0..src.len()).map(|i| prod_except(&src, i, t)).collect()).collect();
    let n = p.n();
    let mut towers: Vec<Tower> = target.iter().map(|&t| Tower::zero(n, t)).collect();
    let mut y = alloc::vec![0u128; src.len()];
    for c in 0..n {
        for (i, (tw, m)) in p.towers.iter().zip(&src).enumerate() {
            y[i] = m.mul(tw.coeffs[c], hat_inv[i]);
        }
        for (j, t) in target.iter().enumerate() {
            towers[j].coeffs[c] = y
                .iter()
                .zip(&hat_mod[j])
                .fold(0, |acc, (&yi, &h)| t.add(acc, t.mul(yi % t.q(), h)));
        }
    }
    RnsPoly::new(towers, Domain::Coefficient)
}

/// Exact CRT reconstruction of every coefficient into `[0, Q)`.
pub fn rns_compose(p: &RnsPoly) -> Result<Vec<BigUint>, RingError> {
    if p.domain != Domain::Coefficient {
        return Err(RingError::DomainMismatch);
    }
    let moduli = p.moduli();
    let big_q = moduli.iter().fold(BigUint::one(), |acc, m| acc * BigUint::from(m.q()));
    let mut basis = Vec::with_capacity(moduli.len());
    for (i, m) in moduli.iter().enumerate() {
        let hat = &big_q / BigUint::from(m.q());
        let inv = m.inv(prod_except(&moduli, i, m))?;
        basis.push((hat * BigUint::from(inv)) % &big_q);
    }
    Ok((0..p.n())
        .map(|c| {
            let mut acc = BigUint::zero();
            for (t, b) in p.towers.iter().zip(&basis) {
                acc += b * BigUint::from(t.coeffs[c]);
            }
            acc % &big_q
        })
        .collect())
}

/// Residues of each integer modulo each modulus.
pub fn rns_decompose(xs: &[BigUint], moduli: &[Modulus]) -> Result<RnsPoly, RingError> {
    let towers = moduli
        .iter()
        .map(|m| {
            let q = BigUint::from(m.q());
            let coeffs = xs
                .iter()
                .map(|x| {
                    let r = x % &q;
                    r.iter_u64_digits().rev().fold(0u128, |acc, d| (acc << 64) | d as u128)
                })
                .collect();
            Tower::new(coeffs, *m)
        })
        .collect::<Result<Vec<_>, _>>()?;
    RnsPoly::new(towers, Domain::Coefficient)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn m(q: u128) -> Modulus {
        Modulus::new(q).unwrap()
    }

    fn poly(q: u128, c: Vec<u128>) -> RnsPoly {
        RnsPoly::new(vec![Tower::new(c, m(q)).unwrap()], Domain::Coefficient).unwrap()
    }

    #[test]
    fn add_small() {
        let s = ring_add(&poly(17, vec![1, 2, 3, 4]), &poly(17, vec![16, 15, 14, 13])).unwrap();
        assert_eq!(s.towers[0].coeffs, vec![0, 0, 0, 0]);
    }

    #[test]
    fn negacyclic_small() {
        let p = [NttParams::negacyclic(4, m(17)).unwrap()];
        let x = poly(17, vec![0, 1, 0, 0]);
        assert_eq!(ring_mult(&x, &x, &p).unwrap().towers[0].coeffs, vec![0, 0, 1, 0]);
        let x3 = poly(17, vec![0, 0, 0, 1]);
        assert_eq!(ring_mult(&x3, &x3, &p).unwrap().towers[0].coeffs, vec![0, 0, 16, 0]);
        let one = poly(17, vec![1, 0, 0, 0]);
        let a = poly(17, vec![5, 6, 7, 8]);
        assert_eq!(ring_mult(&a, &one, &p).unwrap(), a);
        assert_eq!(ring_mult(&a, &a, &[]), Err(RingError::NeedParams));
    }

    #[test]
    fn switch_small() {
        let t = Tower::new(vec![0, 16, 8, 9], m(17)).unwrap();
        assert_eq!(switch_modulus(&t, m(5)).coeffs, vec![0, 4, 3, 2]);
    }

    #[test]
    fn compose_small() {
        let p = RnsPoly::new(
            vec![Tower::new(vec![15, 0], m(17)).unwrap(), Tower::new(vec![9, 0], m(13)).unwrap()],
            Domain::Coefficient,
        )
        .unwrap();
        let xs = rns_compose(&p).unwrap();
        assert_eq!(xs, vec![BigUint::from(100u32), BigUint::zero()]);
        assert_eq!(rns_decompose(&xs, &p.moduli()).unwrap(), p);
    }

    #[test]
    fn non_coprime_rejected() {
        let t = |q| Tower::new(vec![0, 0], m(q)).unwrap();
        assert_eq!(
            RnsPoly::new(vec![t(15), t(21)], Domain::Coefficient),
            Err(RingError::NotCoprime(15, 21))
        );
    }
}
