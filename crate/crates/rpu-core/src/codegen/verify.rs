//! Generate, simulate and compare against the reference transforms.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{bit_reverse, generate_with, plan, Direction, GenOptions, RegAllocStrategy, Variant};
use crate::modmath::{find_ntt_prime, NttParams};
use crate::ring::{ntt_forward, ntt_inverse, Tower};
use crate::sim::{trace_hazards, MachineConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub size: usize,
    pub variant: Variant,
    pub strategy: RegAllocStrategy,
    pub direction: Direction,
    pub cycles: u64,
    pub stalls: u64,
    /// Trace entries that violate a register hazard.
    pub hazards: usize,
    pub pass: bool,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub error: String,
}

/// Negacyclic parameters over a 60-bit prime.
pub fn default_params(n: usize) -> Option<NttParams> {
    let q = find_ntt_prime(60, n as u64).ok()?;
    NttParams::negacyclic(n, q).ok()
}

/// One kernel on a random input.
pub fn verify_one(
    n: usize,
    variant: Variant,
    strategy: RegAllocStrategy,
    direction: Direction,
    cfg: &MachineConfig,
    seed: u64,
) -> VerifyRow {
    let mut row = VerifyRow { size: n, variant, strategy, direction, cycles: 0, stalls: 0, hazards: 0, pass: false, error: String::new() };
    let Some(p) = default_params(n) else {
        row.error = "no parameters".into();
        return row;
    };
    let res = (|| -> Result<(u64, u64, usize, bool), String> {
        let pl = plan(n, variant, &p).map_err(|e| e.to_string())?;
        let opts = GenOptions { direction, ..GenOptions::new(strategy) };
        let k = generate_with(&pl, cfg, &opts).map_err(|e| e.to_string())?;
        let mut rng = SmallRng::seed_from_u64(seed);
        let q = p.modulus.q();
        let x: Vec<u128> = (0..n).map(|_| rng.gen_range(0..q)).collect();
        let t = Tower { coeffs: x.clone(), modulus: p.modulus };
        let bits = n.trailing_zeros();
        let (input, want) = match direction {
            Direction::Forward => {
                let y = ntt_forward(&t, &p).map_err(|e| alloc::format!("{e:?}"))?;
                (x, (0..n).map(|i| y.coeffs[bit_reverse(i, bits)]).collect::<Vec<_>>())
            }
            Direction::Inverse => {
                let y = ntt_inverse(&t, &p).map_err(|e| alloc::format!("{e:?}"))?;
                ((0..n).map(|i| x[bit_reverse(i, bits)]).collect(), y.coeffs)
            }
        };
        let (out, r) = k.run(&input, cfg).map_err(|e| e.to_string())?;
        let hazards = r.trace.as_deref().map_or(0, |t| trace_hazards(&k.program, t).len());
        Ok((r.cycles, r.hazard_stalls + r.queue_full_stalls, hazards, out == want))
    })();
    match res {
        Ok((c, s, h, ok)) => {
            row.cycles = c;
            row.stalls = s;
            row.hazards = h;
            row.pass = ok && h == 0;
        }
        Err(e) => row.error = e,
    }
    row
}

/// Forward and inverse kernels of size `n`.
pub fn verify(n: usize, variant: Variant, strategy: RegAllocStrategy, cfg: &MachineConfig) -> Vec<VerifyRow> {
    [Direction::Forward, Direction::Inverse]
        .into_iter()
        .map(|d| verify_one(n, variant, strategy, d, cfg, n as u64))
        .collect()
}
