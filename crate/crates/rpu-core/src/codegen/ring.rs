//! Elementwise ring kernels: one tower of `a` and `b` in, `a ∘ b` out.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::CodegenError;
use crate::isa::{AReg, Instr, MReg, Program, SReg, VReg, VLEN};
use crate::sim::{self, MachineConfig, RunResult, SimError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RingOp {
    Add,
    /// Pointwise product; operands are in the evaluation domain.
    Mult,
}

impl RingOp {
    pub fn name(self) -> &'static str {
        match self {
            RingOp::Add => "ringAdd",
            RingOp::Mult => "ringMult",
        }
    }
}

/// `a` at word 0, `b` at `n`, the result at `2n`. SDM word 0 holds q.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingKernel {
    pub n: usize,
    pub op: RingOp,
    pub program: Program,
}

/// Registers cycled through, three per vector.
const GROUPS: u8 = 21;
const LEAD: usize = 2;
const LAG: usize = 2;

pub fn ring_kernel(n: usize, op: RingOp, cfg: &MachineConfig) -> Result<RingKernel, CodegenError> {
    if n < VLEN || !n.is_power_of_two() || n > 1 << 16 {
        return Err(CodegenError::UnsupportedSize(n));
    }
    if 3 * n > cfg.vdm_words() {
        return Err(CodegenError::OutOfMemory { words: 3 * n, available: cfg.vdm_words() });
    }
    let m = MReg(1);
    let mut ins = vec![Instr::Enter];
    let top = (3 * n - 1) >> 16;
    for a in 1..=top {
        ins.push(Instr::ASet { ad: AReg(a as u8), src: None, imm: a as u16, hi: true });
    }
    ins.push(Instr::SLoad { sd: SReg(0), base: AReg(0), off: 0 });
    ins.push(Instr::MSet { m, s: SReg(0) });
    let at = |w: usize| (AReg((w >> 16) as u8), (w & 0xffff) as u16);
    let count = n / VLEN;
    let regs = |k: usize| {
        let g = (k % GROUPS as usize) as u8 * 3;
        (VReg(g), VReg(g + 1), VReg(g + 2))
    };
    // loads run LEAD vectors ahead of their op and stores trail it by LAG,
    // so decode never blocks the load/store queue on a result
    for k in 0..count + LEAD + LAG {
        if k < count {
            let (x, y, _) = regs(k);
            let (ba, oa) = at(k * VLEN);
            let (bb, ob) = at(n + k * VLEN);
            ins.push(Instr::VLoad { vd: x, base: ba, off: oa });
            ins.push(Instr::VLoad { vd: y, base: bb, off: ob });
        }
        if let Some(j) = k.checked_sub(LEAD).filter(|&j| j < count) {
            let (x, y, z) = regs(j);
            ins.push(match op {
                RingOp::Add => Instr::VAddMod { vd: z, va: x, vb: y, m },
                RingOp::Mult => Instr::VMulMod { vd: z, va: x, vb: y, m },
            });
        }
        if let Some(j) = k.checked_sub(LEAD + LAG).filter(|&j| j < count) {
            let (bz, oz) = at(2 * n + j * VLEN);
            ins.push(Instr::VStore { base: bz, off: oz, vs: regs(j).2 });
        }
    }
    ins.push(Instr::Leave);
    let program = Program::new(&alloc::format!("_{}{n}", op.name()), ins);
    Ok(RingKernel { n, op, program })
}

impl RingKernel {
    pub fn run(&self, a: &[u128], b: &[u128], q: u128, cfg: &MachineConfig) -> Result<(Vec<u128>, RunResult), SimError> {
        let mut img = alloc::vec![0u128; 3 * self.n];
        img[..self.n].copy_from_slice(a);
        img[self.n..2 * self.n].copy_from_slice(b);
        let (r, st) = sim::run(&self.program, cfg, &img, &[q])?;
        Ok((st.vdm[2 * self.n..3 * self.n].to_vec(), r))
    }

    /// Compute-bound cycles: one vector op per 512 words at full occupancy.
    pub fn compute_bound(&self, cfg: &MachineConfig) -> u64 {
        (self.n / VLEN) as u64 * cfg.vector_occupancy() as u64
    }
}
