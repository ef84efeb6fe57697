//! Simulated single-tile kernel latencies.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::codegen::{default_params, generate, plan, ring_kernel, RegAllocStrategy, RingOp, Variant};
use crate::isa::VLEN;
use crate::sim::{MachineConfig, VrfMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelRow {
    pub kernel: String,
    pub size: usize,
    pub cycles: u64,
    pub us: f64,
    /// Busy cycles of the compute queue if it never waits.
    pub compute_bound_cycles: u64,
    pub published_cycles: Option<u64>,
    pub published_us: Option<f64>,
    /// Simulated over published latency.
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub error: String,
}

/// Published 64k-point latencies on the tile `cfg` models.
fn published_ref(kernel: &str, size: usize, cfg: &MachineConfig) -> Option<(u64, f64)> {
    if size != 1 << 16 {
        return None;
    }
    match kernel {
        "ringAdd" | "ringMult" => Some((3460, 1.73)),
        "NTT" => Some(match cfg.vrf_mode {
            VrfMode::Model1 => (18300, 9.15),
            VrfMode::Model2 => (24600, 12.3),
        }),
        _ => None,
    }
}

/// ringAdd, ringMult and the forward Pease NTT at each size, on random data.
pub fn measure_kernels(sizes: &[usize], cfg: &MachineConfig) -> Vec<KernelRow> {
    let mut out = Vec::new();
    let occ = cfg.vector_occupancy() as u64;
    for &n in sizes {
        let mut rng = SmallRng::seed_from_u64(n as u64);
        let vectors = (n / VLEN).max(1) as u64;
        let mut push = |kernel: &str, res: Result<u64, String>, bound: u64| {
            let (cycles, error) = match res {
                Ok(c) => (c, String::new()),
                Err(e) => (0, e),
            };
            let us = cycles as f64 / (cfg.clock_ghz * 1e3);
            let p = published_ref(kernel, n, cfg);
            out.push(KernelRow {
                kernel: kernel.into(),
                size: n,
                cycles,
                us,
                compute_bound_cycles: bound,
                published_cycles: p.map(|p| p.0),
                published_us: p.map(|p| p.1),
                ratio: p.filter(|_| error.is_empty()).map(|p| us / p.1),
                error,
            });
        };
        let Some(params) = default_params(n) else {
            for k in ["ringAdd", "ringMult", "NTT"] {
                push(k, Err("no parameters".into()), 0);
            }
            continue;
        };
        let q = params.modulus.q();
        let a: Vec<u128> = (0..n).map(|_| rng.gen_range(0..q)).collect();
        let b: Vec<u128> = (0..n).map(|_| rng.gen_range(0..q)).collect();
        for op in [RingOp::Add, RingOp::Mult] {
            let r = ring_kernel(n, op, cfg)
                .map_err(|e| e.to_string())
                .and_then(|k| k.run(&a, &b, q, cfg).map_err(|e| e.to_string()))
                .map(|(_, r)| r.cycles);
            push(op.name(), r, vectors * occ);
        }
        let r = plan(n, Variant::Pease, &params)
            .and_then(|p| generate(&p, cfg, RegAllocStrategy::Greedy))
            .map_err(|e| e.to_string())
            .and_then(|k| k.run(&a, cfg).map_err(|e| e.to_string()))
            .map(|(_, r)| r.cycles);
        let stages = n.trailing_zeros() as u64;
        push("NTT", r, (vectors / 2).max(1) * stages * occ);
    }
    out
}
