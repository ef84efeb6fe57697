//! Fixed 64-bit instruction words.
//!
//! Layout, least significant byte first: opcode, four 8-bit operand fields
//! f0..f3, a 16-bit immediate, and an 8-bit mode / modulus selector. Fields an
//! opcode does not use are zero, and decoding rejects anything else.

use alloc::vec::Vec;
use core::fmt;

use super::{AReg, BcastSrc, CmpMode, Instr, MReg, Opcode, Program, SReg, ShufMode, VReg};

/// Leading bytes of a binary program file.
pub const MAGIC: &[u8; 4] = b"RPU1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecodeError {
    UnknownOpcode(u8),
    BadField { word: u64, what: &'static str },
    Truncated,
    BadMagic,
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::UnknownOpcode(c) => write!(f, "unknown opcode {c}"),
            DecodeError::BadField { word, what } => write!(f, "word {word:#018x}: bad {what}"),
            DecodeError::Truncated => write!(f, "truncated program"),
            DecodeError::BadMagic => write!(f, "missing RPU1 magic"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for DecodeError {}

#[derive(Default)]
struct Fields {
    f: [u8; 4],
    imm: u16,
    mode: u8,
}

fn pack(op: Opcode, x: Fields) -> u64 {
    op.code() as u64
        | (x.f[0] as u64) << 8
        | (x.f[1] as u64) << 16
        | (x.f[2] as u64) << 24
        | (x.f[3] as u64) << 32
        | (x.imm as u64) << 40
        | (x.mode as u64) << 56
}

fn fields(f0: u8, f1: u8, f2: u8, f3: u8, imm: u16, mode: u8) -> Fields {
    Fields { f: [f0, f1, f2, f3], imm, mode }
}

pub fn encode(i: &Instr) -> u64 {
    let op = i.opcode();
    let x = match *i {
        Instr::Enter => fields(0, 0, 0, 0, 0, 0),
        Instr::Leave => fields(0, 0, 0, 0, 0, 1),
        Instr::VLoad { vd, base, off } => fields(vd.0, base.0, 0, 0, off, 0),
        Instr::VLoadS { vd, base, off, stride } => fields(vd.0, base.0, stride as u8, (stride >> 8) as u8, off, 0),
        Instr::VStore { base, off, vs } => fields(vs.0, base.0, 0, 0, off, 0),
        Instr::VStoreS { base, off, vs, stride } => fields(vs.0, base.0, stride as u8, (stride >> 8) as u8, off, 0),
        Instr::VBroadcast { vd, src: BcastSrc::Scalar(s) } => fields(vd.0, s.0, 0, 0, 0, 0),
        Instr::VBroadcast { vd, src: BcastSrc::Mem { base, off } } => fields(vd.0, base.0, 0, 0, off, 1),
        Instr::VAddMod { vd, va, vb, m } | Instr::VSubMod { vd, va, vb, m } | Instr::VMulMod { vd, va, vb, m } => {
            fields(vd.0, va.0, vb.0, 0, 0, m.0)
        }
        Instr::VSMulMod { vd, va, s, m } => fields(vd.0, va.0, s.0, 0, 0, m.0),
        Instr::VBfly { vx, vy, vw, m } | Instr::VIBfly { vx, vy, vw, m } => fields(vx.0, vy.0, vw.0, 0, 0, m.0),
        Instr::VCmp { vd, va, vb, mode } => fields(vd.0, va.0, vb.0, 0, 0, mode as u8),
        Instr::VShuf { vd, va, vb, mode } => fields(vd.0, va.0, vb.0, 0, 0, mode as u8),
        Instr::SLoad { sd, base, off } => fields(sd.0, base.0, 0, 0, off, 0),
        Instr::MSet { m, s } => fields(m.0, s.0, 0, 0, 0, 0),
        Instr::ASet { ad, src, imm, hi } => {
            fields(ad.0, src.map_or(0, |a| a.0), 0, 0, imm, src.is_some() as u8 | (hi as u8) << 1)
        }
    };
    pack(op, x)
}

pub fn decode(w: u64) -> Result<Instr, DecodeError> {
    let op = Opcode::from_code(w as u8).ok_or(DecodeError::UnknownOpcode(w as u8))?;
    let f = |k: u32| (w >> (8 + 8 * k)) as u8;
    let imm = (w >> 40) as u16;
    let mode = (w >> 56) as u8;
    let bad = |what| DecodeError::BadField { word: w, what };
    let v = |k| VReg::new(f(k)).ok_or(bad("vector register"));
    let s = |k| SReg::new(f(k)).ok_or(bad("scalar register"));
    let a = |k| AReg::new(f(k)).ok_or(bad("address register"));
    let m = || MReg::new(mode).ok_or(bad("modulus register"));
    let stride = (f(2) as u16) | (f(3) as u16) << 8;
    let instr = match op {
        Opcode::Ctrl => match mode {
            0 => Instr::Enter,
            1 => Instr::Leave,
            _ => return Err(bad("control mode")),
        },
        Opcode::VLoad => Instr::VLoad { vd: v(0)?, base: a(1)?, off: imm },
        Opcode::VLoadS => Instr::VLoadS { vd: v(0)?, base: a(1)?, off: imm, stride },
        Opcode::VStore => Instr::VStore { base: a(1)?, off: imm, vs: v(0)? },
        Opcode::VStoreS => Instr::VStoreS { base: a(1)?, off: imm, vs: v(0)?, stride },
        Opcode::VBroadcast => match mode {
            0 => Instr::VBroadcast { vd: v(0)?, src: BcastSrc::Scalar(s(1)?) },
            1 => Instr::VBroadcast { vd: v(0)?, src: BcastSrc::Mem { base: a(1)?, off: imm } },
            _ => return Err(bad("broadcast mode")),
        },
        Opcode::VAddMod => Instr::VAddMod { vd: v(0)?, va: v(1)?, vb: v(2)?, m: m()? },
        Opcode::VSubMod => Instr::VSubMod { vd: v(0)?, va: v(1)?, vb: v(2)?, m: m()? },
        Opcode::VMulMod => Instr::VMulMod { vd: v(0)?, va: v(1)?, vb: v(2)?, m: m()? },
        Opcode::VSMulMod => Instr::VSMulMod { vd: v(0)?, va: v(1)?, s: s(2)?, m: m()? },
        Opcode::VBfly => Instr::VBfly { vx: v(0)?, vy: v(1)?, vw: v(2)?, m: m()? },
        Opcode::VIBfly => Instr::VIBfly { vx: v(0)?, vy: v(1)?, vw: v(2)?, m: m()? },
        Opcode::VCmp => {
            let mode = match mode {
                0 => CmpMode::Ge,
                1 => CmpMode::Lt,
                _ => return Err(bad("comparison mode")),
            };
            Instr::VCmp { vd: v(0)?, va: v(1)?, vb: v(2)?, mode }
        }
        Opcode::VShuf => {
            let mode = *ShufMode::ALL.get(mode as usize).ok_or(bad("shuffle mode"))?;
            Instr::VShuf { vd: v(0)?, va: v(1)?, vb: v(2)?, mode }
        }
        Opcode::SLoad => Instr::SLoad { sd: s(0)?, base: a(1)?, off: imm },
        Opcode::MSet => Instr::MSet { m: MReg::new(f(0)).ok_or(bad("modulus register"))?, s: s(1)? },
        Opcode::ASet => {
            if mode > 3 {
                return Err(bad("aset mode"));
            }
            let src = if mode & 1 == 1 { Some(a(1)?) } else { None };
            Instr::ASet { ad: a(0)?, src, imm, hi: mode & 2 != 0 }
        }
    };
    // unused fields must be zero so that decode∘encode is exact
    if encode(&instr) != w {
        return Err(bad("reserved bits"));
    }
    Ok(instr)
}

/// `RPU1`, a little-endian u32 instruction count, then the words.
pub fn encode_program(p: &Program) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * p.instrs.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(p.instrs.len() as u32).to_le_bytes());
    for i in &p.instrs {
        out.extend_from_slice(&encode(i).to_le_bytes());
    }
    out
}

pub fn decode_program(bytes: &[u8]) -> Result<Program, DecodeError> {
    if bytes.len() < 8 {
        return Err(DecodeError::Truncated);
    }
    if &bytes[..4] != MAGIC {
        return Err(DecodeError::BadMagic);
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    if body.len() != count * 8 {
        return Err(DecodeError::Truncated);
    }
    let instrs = body
        .chunks_exact(8)
        .map(|c| decode(u64::from_le_bytes(c.try_into().unwrap())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Program { instrs, ..Default::default() })
}
