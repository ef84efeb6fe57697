//! The 17-opcode RPU instruction set: instruction types, a text assembler,
//! a disassembler, the fixed 64-bit binary encoding and static validation.

mod asm;
mod encode;
mod random;
mod validate;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub use asm::{assemble, disassemble, AsmError, AsmErrorKind};
pub use encode::{decode, decode_program, encode, encode_program, DecodeError, MAGIC};
pub use random::{random_program, RANDOM_VDM_WORDS};
pub use validate::{bank_of, validate, Diagnostic, Severity};

/// Elements per vector register.
pub const VLEN: usize = 512;
pub const NUM_VREGS: u8 = 64;
pub const NUM_SREGS: u8 = 32;
pub const NUM_MREGS: u8 = 8;
pub const NUM_AREGS: u8 = 16;

macro_rules! reg {
    ($name:ident, $count:expr, $prefix:literal) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub struct $name(pub u8);

        impl $name {
            pub const COUNT: u8 = $count;

            pub fn new(i: u8) -> Option<Self> {
                (i < $count).then_some($name(i))
            }

            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

reg!(VReg, NUM_VREGS, "v");
reg!(SReg, NUM_SREGS, "s");
reg!(MReg, NUM_MREGS, "m");
reg!(AReg, NUM_AREGS, "a");

/// The closed opcode set, in encoding order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Opcode {
    Ctrl,
    VLoad,
    VLoadS,
    VStore,
    VStoreS,
    VBroadcast,
    VAddMod,
    VSubMod,
    VMulMod,
    VSMulMod,
    VBfly,
    VIBfly,
    VCmp,
    VShuf,
    SLoad,
    MSet,
    ASet,
}

impl Opcode {
    pub const ALL: [Opcode; 17] = [
        Opcode::Ctrl,
        Opcode::VLoad,
        Opcode::VLoadS,
        Opcode::VStore,
        Opcode::VStoreS,
        Opcode::VBroadcast,
        Opcode::VAddMod,
        Opcode::VSubMod,
        Opcode::VMulMod,
        Opcode::VSMulMod,
        Opcode::VBfly,
        Opcode::VIBfly,
        Opcode::VCmp,
        Opcode::VShuf,
        Opcode::SLoad,
        Opcode::MSet,
        Opcode::ASet,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Opcode::Ctrl => "enter/leave",
            Opcode::VLoad => "vload",
            Opcode::VLoadS => "vloads",
            Opcode::VStore => "vstore",
            Opcode::VStoreS => "vstores",
            Opcode::VBroadcast => "vbroadcast",
            Opcode::VAddMod => "vaddmod",
            Opcode::VSubMod => "vsubmod",
            Opcode::VMulMod => "vmulmod",
            Opcode::VSMulMod => "vsmulmod",
            Opcode::VBfly => "vbfly",
            Opcode::VIBfly => "vibfly",
            Opcode::VCmp => "vcmp",
            Opcode::VShuf => "vshuf",
            Opcode::SLoad => "sload",
            Opcode::MSet => "mset",
            Opcode::ASet => "aset",
        }
    }

    /// Whether the opcode appears in the published kernel listing; the rest
    /// of the set is a reconstruction.
    pub fn listing_attested(self) -> bool {
        matches!(
            self,
            Opcode::Ctrl
                | Opcode::VLoad
                | Opcode::VStoreS
                | Opcode::VBroadcast
                | Opcode::VMulMod
                | Opcode::VAddMod
                | Opcode::VSubMod
                | Opcode::VShuf
        )
    }

    pub fn queue(self) -> QueueClass {
        match self {
            Opcode::Ctrl => QueueClass::Control,
            Opcode::VLoad
            | Opcode::VLoadS
            | Opcode::VStore
            | Opcode::VStoreS
            | Opcode::SLoad
            | Opcode::MSet
            | Opcode::ASet => QueueClass::LoadStore,
            Opcode::VAddMod
            | Opcode::VSubMod
            | Opcode::VMulMod
            | Opcode::VSMulMod
            | Opcode::VBfly
            | Opcode::VIBfly
            | Opcode::VCmp => QueueClass::Compute,
            Opcode::VShuf | Opcode::VBroadcast => QueueClass::Shuffle,
        }
    }
}

/// Where an instruction executes after decode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QueueClass {
    /// ENTER/LEAVE are retired by the frontend itself.
    Control,
    LoadStore,
    Compute,
    Shuffle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpMode {
    Ge,
    Lt,
}

/// Shuffle crossbar modes. With `a`, `b` the sources and `h = VLEN/2`:
/// unpacklo `d[2i]=a[i], d[2i+1]=b[i]`; unpackhi the same on `a[h+i], b[h+i]`;
/// packeven `d[i]=a[2i], d[h+i]=b[2i]`; packodd the same on odd elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShufMode {
    UnpackLo,
    UnpackHi,
    PackEven,
    PackOdd,
}

impl ShufMode {
    pub const ALL: [ShufMode; 4] = [ShufMode::UnpackLo, ShufMode::UnpackHi, ShufMode::PackEven, ShufMode::PackOdd];

    pub fn name(self) -> &'static str {
        match self {
            ShufMode::UnpackLo => "unpacklo",
            ShufMode::UnpackHi => "unpackhi",
            ShufMode::PackEven => "packeven",
            ShufMode::PackOdd => "packodd",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BcastSrc {
    /// Scalar register file (the form the code generator uses).
    Scalar(SReg),
    /// Scalar data memory word `A[base] + off`; the listing's address form.
    Mem { base: AReg, off: u16 },
}

/// One decoded instruction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Instr {
    Enter,
    Leave,
    /// `vd[i] = VDM[A[base] + off + i]`
    VLoad { vd: VReg, base: AReg, off: u16 },
    /// `vd[i] = VDM[A[base] + off + i*stride]`
    VLoadS { vd: VReg, base: AReg, off: u16, stride: u16 },
    VStore { base: AReg, off: u16, vs: VReg },
    /// `VDM[A[base] + off + i*stride] = vs[i]`
    VStoreS { base: AReg, off: u16, vs: VReg, stride: u16 },
    VBroadcast { vd: VReg, src: BcastSrc },
    VAddMod { vd: VReg, va: VReg, vb: VReg, m: MReg },
    VSubMod { vd: VReg, va: VReg, vb: VReg, m: MReg },
    VMulMod { vd: VReg, va: VReg, vb: VReg, m: MReg },
    VSMulMod { vd: VReg, va: VReg, s: SReg, m: MReg },
    /// In place: `(x, y) <- (x + w*y, x - w*y)`.
    VBfly { vx: VReg, vy: VReg, vw: VReg, m: MReg },
    /// In place: `(x, y) <- (x + y, (x - y)*w)`.
    VIBfly { vx: VReg, vy: VReg, vw: VReg, m: MReg },
    /// `vd[i] = 1` when the comparison holds, else 0.
    VCmp { vd: VReg, va: VReg, vb: VReg, mode: CmpMode },
    VShuf { vd: VReg, va: VReg, vb: VReg, mode: ShufMode },
    /// `S[sd] = SDM[A[base] + off]`
    SLoad { sd: SReg, base: AReg, off: u16 },
    /// Load modulus register `m` from `S[s]`; the Barrett constant is
    /// derived when the register is written.
    MSet { m: MReg, s: SReg },
    /// `A[ad] = (src ? A[src] : 0) + (imm << (hi ? 16 : 0))`
    ASet { ad: AReg, src: Option<AReg>, imm: u16, hi: bool },
}

/// Register identifiers across all four files, for hazard tracking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RegId {
    V(u8),
    S(u8),
    M(u8),
    A(u8),
}

impl RegId {
    /// Dense index: V 0..64, S 64..96, M 96..104, A 104..120.
    pub fn dense(self) -> usize {
        match self {
            RegId::V(i) => i as usize,
            RegId::S(i) => 64 + i as usize,
            RegId::M(i) => 96 + i as usize,
            RegId::A(i) => 104 + i as usize,
        }
    }

    pub const DENSE_COUNT: usize = 120;
}

/// Memory footprint of one instruction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MemAccess {
    None,
    VdmRead { base: AReg, off: u16, stride: u16 },
    VdmWrite { base: AReg, off: u16, stride: u16 },
    SdmRead { base: AReg, off: u16 },
}

impl Instr {
    pub fn opcode(&self) -> Opcode {
        match self {
            Instr::Enter | Instr::Leave => Opcode::Ctrl,
            Instr::VLoad { .. } => Opcode::VLoad,
            Instr::VLoadS { .. } => Opcode::VLoadS,
            Instr::VStore { .. } => Opcode::VStore,
            Instr::VStoreS { .. } => Opcode::VStoreS,
            Instr::VBroadcast { .. } => Opcode::VBroadcast,
            Instr::VAddMod { .. } => Opcode::VAddMod,
            Instr::VSubMod { .. } => Opcode::VSubMod,
            Instr::VMulMod { .. } => Opcode::VMulMod,
            Instr::VSMulMod { .. } => Opcode::VSMulMod,
            Instr::VBfly { .. } => Opcode::VBfly,
            Instr::VIBfly { .. } => Opcode::VIBfly,
            Instr::VCmp { .. } => Opcode::VCmp,
            Instr::VShuf { .. } => Opcode::VShuf,
            Instr::SLoad { .. } => Opcode::SLoad,
            Instr::MSet { .. } => Opcode::MSet,
            Instr::ASet { .. } => Opcode::ASet,
        }
    }

    /// Registers read, in operand order.
    pub fn reads(&self) -> Vec<RegId> {
        use RegId::*;
        match *self {
            Instr::Enter | Instr::Leave => Vec::new(),
            Instr::VLoad { base, .. } | Instr::VLoadS { base, .. } => alloc::vec![A(base.0)],
            Instr::VStore { base, vs, .. } | Instr::VStoreS { base, vs, .. } => alloc::vec![A(base.0), V(vs.0)],
            Instr::VBroadcast { src: BcastSrc::Scalar(s), .. } => alloc::vec![S(s.0)],
            Instr::VBroadcast { src: BcastSrc::Mem { base, .. }, .. } => alloc::vec![A(base.0)],
            Instr::VAddMod { va, vb, m, .. } | Instr::VSubMod { va, vb, m, .. } | Instr::VMulMod { va, vb, m, .. } => {
                alloc::vec![V(va.0), V(vb.0), M(m.0)]
            }
            Instr::VSMulMod { va, s, m, .. } => alloc::vec![V(va.0), S(s.0), M(m.0)],
            Instr::VBfly { vx, vy, vw, m } | Instr::VIBfly { vx, vy, vw, m } => {
                alloc::vec![V(vx.0), V(vy.0), V(vw.0), M(m.0)]
            }
            Instr::VCmp { va, vb, .. } | Instr::VShuf { va, vb, .. } => alloc::vec![V(va.0), V(vb.0)],
            Instr::SLoad { base, .. } => alloc::vec![A(base.0)],
            Instr::MSet { s, .. } => alloc::vec![S(s.0)],
            Instr::ASet { src, .. } => src.map(|a| A(a.0)).into_iter().collect(),
        }
    }

    /// Registers written.
    pub fn writes(&self) -> Vec<RegId> {
        use RegId::*;
        match *self {
            Instr::Enter | Instr::Leave | Instr::VStore { .. } | Instr::VStoreS { .. } => Vec::new(),
            Instr::VLoad { vd, .. }
            | Instr::VLoadS { vd, .. }
            | Instr::VBroadcast { vd, .. }
            | Instr::VAddMod { vd, .. }
            | Instr::VSubMod { vd, .. }
            | Instr::VMulMod { vd, .. }
            | Instr::VSMulMod { vd, .. }
            | Instr::VCmp { vd, .. }
            | Instr::VShuf { vd, .. } => alloc::vec![V(vd.0)],
            Instr::VBfly { vx, vy, .. } | Instr::VIBfly { vx, vy, .. } => alloc::vec![V(vx.0), V(vy.0)],
            Instr::SLoad { sd, .. } => alloc::vec![S(sd.0)],
            Instr::MSet { m, .. } => alloc::vec![M(m.0)],
            Instr::ASet { ad, .. } => alloc::vec![A(ad.0)],
        }
    }

    pub fn mem_access(&self) -> MemAccess {
        match *self {
            Instr::VLoad { base, off, .. } => MemAccess::VdmRead { base, off, stride: 1 },
            Instr::VLoadS { base, off, stride, .. } => MemAccess::VdmRead { base, off, stride },
            Instr::VStore { base, off, .. } => MemAccess::VdmWrite { base, off, stride: 1 },
            Instr::VStoreS { base, off, stride, .. } => MemAccess::VdmWrite { base, off, stride },
            Instr::SLoad { base, off, .. } | Instr::VBroadcast { src: BcastSrc::Mem { base, off }, .. } => {
                MemAccess::SdmRead { base, off }
            }
            _ => MemAccess::None,
        }
    }

    pub fn is_vector(&self) -> bool {
        !matches!(self, Instr::Enter | Instr::Leave | Instr::SLoad { .. } | Instr::MSet { .. } | Instr::ASet { .. })
    }
}

/// Program metadata carried alongside the instruction stream.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramMeta {
    pub entry: String,
    pub vdm_image: Option<String>,
    pub sdm_image: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub meta: ProgramMeta,
    pub instrs: Vec<Instr>,
}

impl Program {
    pub fn new(entry: &str, instrs: Vec<Instr>) -> Self {
        Program { meta: ProgramMeta { entry: entry.into(), ..Default::default() }, instrs }
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    /// Count of instructions per opcode, in encoding order.
    pub fn histogram(&self) -> [usize; 17] {
        let mut h = [0; 17];
        for i in &self.instrs {
            h[i.opcode().code() as usize] += 1;
        }
        h
    }
}
