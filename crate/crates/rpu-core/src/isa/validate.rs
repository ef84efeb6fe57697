use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{AReg, Instr, MemAccess, Program, RegId, VReg, NUM_AREGS, VLEN};
use crate::sim::MachineConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Severity {
    Error,
    /// The hardware can run it, but with stalls.
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Instruction index, when the problem has one.
    pub index: Option<usize>,
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
}

/// Which single-port VRF memory holds `v`.
pub fn bank_of(v: VReg, cfg: &MachineConfig) -> u8 {
    v.0 / cfg.regs_per_memory()
}

/// Static checks. Address registers start at zero and are tracked through
/// ASET, so every address in a program is known before it runs.
/// `a0` is hard-wired to zero and may not be written.
pub fn validate(p: &Program, cfg: &MachineConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |index: Option<usize>, severity, code, message: String| {
        out.push(Diagnostic { index, severity, code, message })
    };
    if p.instrs.first() != Some(&Instr::Enter) {
        push(Some(0), Severity::Error, "missing-enter", "program must begin with enter".into());
    }
    match p.instrs.iter().position(|i| *i == Instr::Leave) {
        None => push(None, Severity::Error, "missing-leave", "program must end with leave".into()),
        Some(k) if k + 1 != p.instrs.len() => {
            push(Some(k + 1), Severity::Error, "after-leave", "instructions after leave".into())
        }
        _ => {}
    }
    let vdm = cfg.vdm_words() as u64;
    let sdm = cfg.sdm_words() as u64;
    let mut areg = [0u64; NUM_AREGS as usize];
    for (k, ins) in p.instrs.iter().enumerate() {
        if k > 0 && *ins == Instr::Enter {
            push(Some(k), Severity::Error, "nested-enter", "enter may only start the program".into());
        }
        let addr = |a: AReg| areg[a.index()];
        match ins.mem_access() {
            MemAccess::VdmRead { base, off, stride } | MemAccess::VdmWrite { base, off, stride } => {
                let first = addr(base) + off as u64;
                let last = first + (VLEN as u64 - 1) * stride as u64;
                if last >= vdm {
                    push(
                        Some(k),
                        Severity::Error,
                        "vdm-bounds",
                        format!("`{ins}` touches VDM words {first}..={last}, memory has {vdm}"),
                    );
                }
            }
            MemAccess::SdmRead { base, off } => {
                let a = addr(base) + off as u64;
                if a >= sdm {
                    push(Some(k), Severity::Error, "sdm-bounds", format!("`{ins}` reads SDM word {a}, memory has {sdm}"));
                }
            }
            MemAccess::None => {}
        }
        if let Instr::ASet { ad, src, imm, hi } = *ins {
            if ad.0 == 0 {
                push(Some(k), Severity::Error, "read-only", "a0 is hard-wired to zero".into());
            } else {
                let shift = if hi { 16 } else { 0 };
                areg[ad.index()] = src.map_or(0, |s| areg[s.index()]) + ((imm as u64) << shift);
            }
        }
        if cfg.regs_per_memory() > 1 {
            let mut regs: Vec<u8> = ins
                .reads()
                .into_iter()
                .chain(ins.writes())
                .filter_map(|r| if let RegId::V(i) = r { Some(i) } else { None })
                .collect();
            regs.sort_unstable();
            regs.dedup();
            for (x, &a) in regs.iter().enumerate() {
                for &b in &regs[x + 1..] {
                    if bank_of(VReg(a), cfg) == bank_of(VReg(b), cfg) {
                        push(
                            Some(k),
                            Severity::Warning,
                            "port-conflict",
                            format!("`{ins}`: v{a} and v{b} share VRF memory {}", bank_of(VReg(a), cfg)),
                        );
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::assemble;

    #[test]
    fn bounds_and_structure() {
        let cfg = MachineConfig::default();
        let p = assemble("enter\naset a1, a0, 4, hi\nvload v0, a1, 0\nleave").unwrap();
        let d = validate(&p, &cfg);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, "vdm-bounds");
        let p = assemble("vload v0, a0, 0\nleave\nleave").unwrap();
        let codes: Vec<_> = validate(&p, &cfg).iter().map(|d| d.code).collect();
        assert_eq!(codes, ["missing-enter", "after-leave"]);
        let p = assemble("enter\naset a0, 1\nsload s0, a0, 2048\nleave").unwrap();
        let codes: Vec<_> = validate(&p, &cfg).iter().map(|d| d.code).collect();
        assert_eq!(codes, ["read-only", "sdm-bounds"]);
    }

    #[test]
    fn port_conflicts_only_in_model2() {
        let p = assemble("enter\nvbfly v0, v1, v8, m0\nleave").unwrap();
        assert!(validate(&p, &MachineConfig::default()).is_empty());
        let d = validate(&p, &MachineConfig::model2());
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].code, d[0].severity), ("port-conflict", Severity::Warning));
    }
}
