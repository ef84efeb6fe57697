//! Random valid programs, for equivalence and timing experiments.

use alloc::vec::Vec;

use rand::Rng;

use super::{AReg, BcastSrc, CmpMode, Instr, MReg, Program, SReg, ShufMode, VReg, VLEN};

/// VDM words random programs touch.
pub const RANDOM_VDM_WORDS: usize = 8192;

/// A program of `len` body instructions over `regs` vector registers that
/// never faults when SDM word 0 holds a modulus and words 1..4 hold data.
pub fn random_program<R: Rng>(rng: &mut R, len: usize, regs: u8) -> Program {
    let regs = regs.clamp(2, 64);
    let m = MReg(1);
    let mut v = Vec::with_capacity(len + 5);
    v.push(Instr::Enter);
    v.push(Instr::SLoad { sd: SReg(0), base: AReg(0), off: 0 });
    v.push(Instr::MSet { m, s: SReg(0) });
    v.push(Instr::SLoad { sd: SReg(1), base: AReg(0), off: 1 });
    let span = |rng: &mut R, stride: u16| -> u16 {
        let last = RANDOM_VDM_WORDS - 1 - (VLEN - 1) * stride as usize;
        rng.gen_range(0..=last) as u16
    };
    for _ in 0..len {
        let mut r = || VReg(rng.gen_range(0..regs));
        let (a, b, c) = (r(), r(), r());
        let ins = match rng.gen_range(0..13) {
            0 => Instr::VLoad { vd: a, base: AReg(0), off: span(rng, 1) },
            1 => {
                let stride = rng.gen_range(1..=8);
                Instr::VLoadS { vd: a, base: AReg(0), off: span(rng, stride), stride }
            }
            2 => Instr::VStore { base: AReg(0), off: span(rng, 1), vs: a },
            3 => {
                let stride = rng.gen_range(1..=8);
                Instr::VStoreS { base: AReg(0), off: span(rng, stride), vs: a, stride }
            }
            4 => {
                let src = if rng.gen() {
                    BcastSrc::Scalar(SReg(1))
                } else {
                    BcastSrc::Mem { base: AReg(0), off: rng.gen_range(1..4) }
                };
                Instr::VBroadcast { vd: a, src }
            }
            5 => Instr::VAddMod { vd: a, va: b, vb: c, m },
            6 => Instr::VSubMod { vd: a, va: b, vb: c, m },
            7 => Instr::VMulMod { vd: a, va: b, vb: c, m },
            8 => Instr::VSMulMod { vd: a, va: b, s: SReg(1), m },
            9 | 10 => {
                let y = if a == b { VReg((b.0 + 1) % regs) } else { b };
                if rng.gen() {
                    Instr::VBfly { vx: a, vy: y, vw: c, m }
                } else {
                    Instr::VIBfly { vx: a, vy: y, vw: c, m }
                }
            }
            11 => Instr::VCmp { vd: a, va: b, vb: c, mode: if rng.gen() { CmpMode::Ge } else { CmpMode::Lt } },
            _ => Instr::VShuf { vd: a, va: b, vb: c, mode: ShufMode::ALL[rng.gen_range(0..4)] },
        };
        v.push(ins);
    }
    v.push(Instr::Leave);
    Program::new("random", v)
}
