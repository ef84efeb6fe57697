//! Operator-form factorizations of the radix-2 transform.
//!
//! Both variants are products of `k` stages built from a butterfly block
//! `F_2 (x) I_{n/2}`, a twiddle diagonal `D_i` and one stride permutation,
//! plus the digit reversal `R`:
//!
//! - Pease: `F_n = R · S_{k-1} ··· S_0` with `S_i = L · D_i · B`.
//! - Korn–Lambiotte: the transpose, `F_n = T_0 ··· T_{k-1} · R` with
//!   `T_i = B · D_i · L^T`, i.e. digit reversal first and every stage
//!   reading with the inverse permutation.
//!
//! `L` is the perfect shuffle, `StridePerm { m: 2 }`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::CodegenError;
use crate::modmath::{Modulus, NttParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Pease,
    KornLambiotte,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Pease, Variant::KornLambiotte];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Pease => "pease",
            Variant::KornLambiotte => "korn-lambiotte",
        }
    }
}

/// Stride permutation of `n` points: `y[j*m + i] = x[i*(n/m) + j]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StridePerm {
    pub n: usize,
    pub m: usize,
}

impl StridePerm {
    pub fn target(&self, src: usize) -> usize {
        let cols = self.n / self.m;
        let (i, j) = (src / cols, src % cols);
        j * self.m + i
    }

    pub fn apply(&self, x: &[u128]) -> Vec<u128> {
        let mut y = vec![0; self.n];
        for (s, &v) in x.iter().enumerate() {
            y[self.target(s)] = v;
        }
        y
    }

    pub fn inverse(&self) -> StridePerm {
        StridePerm { n: self.n, m: self.n / self.m }
    }
}

/// One factor `L · D · B` (Pease) or `B · D · L^T` (Korn–Lambiotte).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    /// Diagonal of `D` as exponents of the plan's root.
    pub exponents: Vec<u64>,
    pub perm: StridePerm,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NttPlan {
    pub n: usize,
    pub radix: usize,
    pub variant: Variant,
    pub modulus: Modulus,
    pub omega: u128,
    /// Full parameters, for kernel generation.
    pub params: NttParams,
    /// In application order.
    pub stages: Vec<Stage>,
}

pub fn bit_reverse(i: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        i.reverse_bits() >> (usize::BITS - bits)
    }
}

/// Pease diagonal for stage `t`: entries in the lower half of the butterfly
/// output get `2^t * (j >> t)`.
fn pease_exponents(n: usize, t: u32) -> Vec<u64> {
    let h = n / 2;
    (0..n).map(|p| if p < h { 0 } else { ((p - h) as u64 >> t) << t }).collect()
}

pub fn plan(n: usize, variant: Variant, p: &NttParams) -> Result<NttPlan, CodegenError> {
    if !n.is_power_of_two() || !(4..=65536).contains(&n) {
        return Err(CodegenError::UnsupportedSize(n));
    }
    if p.n != n {
        return Err(CodegenError::ParamsMismatch);
    }
    let k = n.trailing_zeros();
    let shuffle = StridePerm { n, m: 2 };
    let stages = match variant {
        Variant::Pease => (0..k).map(|t| Stage { exponents: pease_exponents(n, t), perm: shuffle }).collect(),
        Variant::KornLambiotte => (0..k)
            .rev()
            .map(|t| Stage { exponents: pease_exponents(n, t), perm: shuffle.inverse() })
            .collect(),
    };
    Ok(NttPlan { n, radix: 2, variant, modulus: p.modulus, omega: p.omega, params: p.clone(), stages })
}

/// Dense `n x n` matrix, row-major, entries reduced mod q.
pub type Matrix = Vec<Vec<u128>>;

impl NttPlan {
    pub fn log_n(&self) -> u32 {
        self.n.trailing_zeros()
    }

    /// Pease stages all use the same permutation.
    pub fn constant_geometry(&self) -> bool {
        self.stages.windows(2).all(|w| w[0].perm == w[1].perm)
    }

    fn butterfly(&self, x: &mut [u128]) {
        let m = &self.modulus;
        let h = self.n / 2;
        for j in 0..h {
            let (a, b) = (x[j], x[j + h]);
            x[j] = m.add(a, b);
            x[j + h] = m.sub(a, b);
        }
    }

    fn diagonal(&self, s: &Stage, x: &mut [u128]) {
        let m = &self.modulus;
        for (v, &e) in x.iter_mut().zip(&s.exponents) {
            if e != 0 {
                *v = m.mul(*v, m.pow(self.omega, e as u128));
            }
        }
    }

    fn reverse(&self, x: &[u128]) -> Vec<u128> {
        let k = self.log_n();
        (0..self.n).map(|i| x[bit_reverse(i, k)]).collect()
    }

    /// Evaluate the factorization on a vector, stage by stage.
    pub fn apply(&self, x: &[u128]) -> Vec<u128> {
        let mut v: Vec<u128> = x.iter().map(|&e| e % self.modulus.q()).collect();
        match self.variant {
            Variant::Pease => {
                for s in &self.stages {
                    self.butterfly(&mut v);
                    self.diagonal(s, &mut v);
                    v = s.perm.apply(&v);
                }
                self.reverse(&v)
            }
            Variant::KornLambiotte => {
                v = self.reverse(&v);
                for s in &self.stages {
                    v = s.perm.apply(&v);
                    self.diagonal(s, &mut v);
                    self.butterfly(&mut v);
                }
                v
            }
        }
    }

    /// Every factor as a dense matrix, in application order (the product
    /// taken right to left is the transform).
    pub fn factors(&self) -> Vec<Matrix> {
        let n = self.n;
        let m = &self.modulus;
        let q = m.q();
        let eye = |f: &dyn Fn(usize) -> usize| -> Matrix {
            let mut a = vec![vec![0u128; n]; n];
            for c in 0..n {
                a[f(c)][c] = 1;
            }
            a
        };
        let bfly = {
            let mut a = vec![vec![0u128; n]; n];
            let h = n / 2;
            for j in 0..h {
                a[j][j] = 1;
                a[j][j + h] = 1;
                a[j + h][j] = 1;
                a[j + h][j + h] = q - 1;
            }
            a
        };
        let diag = |s: &Stage| -> Matrix {
            let mut a = vec![vec![0u128; n]; n];
            for (i, &e) in s.exponents.iter().enumerate() {
                a[i][i] = m.pow(self.omega, e as u128);
            }
            a
        };
        let k = self.log_n();
        let rev = eye(&|c| bit_reverse(c, k));
        let mut out = Vec::new();
        match self.variant {
            Variant::Pease => {
                for s in &self.stages {
                    out.push(bfly.clone());
                    out.push(diag(s));
                    out.push(eye(&|c| s.perm.target(c)));
                }
                out.push(rev);
            }
            Variant::KornLambiotte => {
                out.push(rev);
                for s in &self.stages {
                    out.push(eye(&|c| s.perm.target(c)));
                    out.push(diag(s));
                    out.push(bfly.clone());
                }
            }
        }
        out
    }

    /// The transform as a matrix, probed column by column through [`apply`].
    ///
    /// [`apply`]: NttPlan::apply
    pub fn matrix(&self) -> Matrix {
        let n = self.n;
        let mut a = vec![vec![0u128; n]; n];
        for c in 0..n {
            let mut e = vec![0u128; n];
            e[c] = 1;
            for (r, v) in self.apply(&e).into_iter().enumerate() {
                a[r][c] = v;
            }
        }
        a
    }
}

/// `[w^(rc)]` for rows and columns `0..n`.
pub fn dft_matrix(n: usize, w: u128, m: &Modulus) -> Matrix {
    (0..n).map(|r| (0..n).map(|c| m.pow(w, (r * c) as u128)).collect()).collect()
}
