//! Text assembly.
//!
//! ```text
//! program   = { line } ;
//! line      = [ stmt { ";" stmt } ] [ comment ] newline ;
//! comment   = ( "//" | "#" ) { any } ;
//! stmt      = directive | mnemonic [ operand { "," operand } ]
//!           | callname "(" [ operand { "," operand } ] ")" ;
//! directive = ( ".entry" | ".vdm" | ".sdm" ) word ;
//! operand   = register | integer | word ;
//! register  = [ "REG_" ] ( "v" | "s" | "m" | "a" ) digits ;
//! integer   = digits | "0x" hexdigits ;
//! ```
//!
//! Call names are the listing spelling: a leading underscore and a
//! `_512x128i` suffix are stripped, so `_vload_512x128i(REG_V60, REG_A1, 0)`
//! is `vload v60, a1, 0`. Mnemonics are case-insensitive.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write;

use super::{AReg, BcastSrc, CmpMode, Instr, MReg, Program, SReg, ShufMode, VReg};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AsmErrorKind {
    Syntax(String),
    UnknownMnemonic(String),
    OperandKind { expected: &'static str, found: String },
    RegisterRange(String),
    ImmediateRange(String),
    OperandCount { mnemonic: String, expected: &'static str, found: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AsmError {
    pub line: usize,
    pub col: usize,
    pub kind: AsmErrorKind,
}

impl fmt::Display for AsmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: ", self.line, self.col)?;
        match &self.kind {
            AsmErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
            AsmErrorKind::UnknownMnemonic(m) => write!(f, "unknown mnemonic `{m}`"),
            AsmErrorKind::OperandKind { expected, found } => write!(f, "expected {expected}, found `{found}`"),
            AsmErrorKind::RegisterRange(r) => write!(f, "register index out of range: `{r}`"),
            AsmErrorKind::ImmediateRange(v) => write!(f, "immediate out of range: `{v}`"),
            AsmErrorKind::OperandCount { mnemonic, expected, found } => {
                write!(f, "`{mnemonic}` takes {expected} operands, found {found}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for AsmError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Operand {
    V(u8),
    S(u8),
    M(u8),
    A(u8),
    Int(u64),
    Word,
}

struct Tok<'a> {
    text: &'a str,
    col: usize,
}

struct Ctx {
    line: usize,
}

impl Ctx {
    fn err(&self, col: usize, kind: AsmErrorKind) -> AsmError {
        AsmError { line: self.line, col, kind }
    }
}

fn parse_int(s: &str) -> Option<u64> {
    let s = s.replace('_', "");
    if let Some(h) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        u64::from_str_radix(h, 16).ok()
    } else {
        s.parse().ok()
    }
}

fn parse_operand(ctx: &Ctx, t: &Tok) -> Result<Operand, AsmError> {
    let lower = t.text.to_ascii_lowercase();
    let body = lower.strip_prefix("reg_").unwrap_or(&lower);
    let mut chars = body.chars();
    if let Some(c @ ('v' | 's' | 'm' | 'a')) = chars.next() {
        let digits = chars.as_str();
        if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
            let idx: u32 = digits.parse().unwrap_or(u32::MAX);
            let limit = match c {
                'v' => VReg::COUNT,
                's' => SReg::COUNT,
                'm' => MReg::COUNT,
                _ => AReg::COUNT,
            } as u32;
            if idx >= limit {
                return Err(ctx.err(t.col, AsmErrorKind::RegisterRange(t.text.to_string())));
            }
            let i = idx as u8;
            return Ok(match c {
                'v' => Operand::V(i),
                's' => Operand::S(i),
                'm' => Operand::M(i),
                _ => Operand::A(i),
            });
        }
    }
    match parse_int(&lower) {
        Some(v) => Ok(Operand::Int(v)),
        None => Err(ctx.err(t.col, AsmErrorKind::Syntax(format!("bad operand `{}`", t.text)))),
    }
}

/// Split `s` (starting at column `col0`) on commas into trimmed tokens.
fn split_operands<'a>(s: &'a str, col0: usize) -> Vec<Tok<'a>> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in s.char_indices().chain(core::iter::once((s.len(), ','))) {
        if c == ',' {
            let raw = &s[start..i];
            let lead = raw.len() - raw.trim_start().len();
            out.push(Tok { text: raw.trim(), col: col0 + start + lead });
            start = i + 1;
        }
    }
    if out.len() == 1 && out[0].text.is_empty() {
        out.clear();
    }
    out
}

struct Args<'a> {
    ctx: &'a Ctx,
    mnemonic: String,
    toks: Vec<Tok<'a>>,
    ops: Vec<Operand>,
}

impl<'a> Args<'a> {
    fn count(&self, allowed: &[usize], expected: &'static str) -> Result<(), AsmError> {
        if allowed.contains(&self.ops.len()) {
            Ok(())
        } else {
            let col = self.toks.first().map_or(1, |t| t.col);
            Err(self.ctx.err(
                col,
                AsmErrorKind::OperandCount { mnemonic: self.mnemonic.clone(), expected, found: self.ops.len() },
            ))
        }
    }

    fn kind_err(&self, k: usize, expected: &'static str) -> AsmError {
        self.ctx.err(self.toks[k].col, AsmErrorKind::OperandKind { expected, found: self.toks[k].text.to_string() })
    }

    fn v(&self, k: usize) -> Result<VReg, AsmError> {
        match self.ops[k] {
            Operand::V(i) => Ok(VReg(i)),
            _ => Err(self.kind_err(k, "vector register")),
        }
    }

    fn s(&self, k: usize) -> Result<SReg, AsmError> {
        match self.ops[k] {
            Operand::S(i) => Ok(SReg(i)),
            _ => Err(self.kind_err(k, "scalar register")),
        }
    }

    fn m(&self, k: usize) -> Result<MReg, AsmError> {
        match self.ops[k] {
            Operand::M(i) => Ok(MReg(i)),
            _ => Err(self.kind_err(k, "modulus register")),
        }
    }

    fn a(&self, k: usize) -> Result<AReg, AsmError> {
        match self.ops[k] {
            Operand::A(i) => Ok(AReg(i)),
            _ => Err(self.kind_err(k, "address register")),
        }
    }

    fn imm16(&self, k: usize) -> Result<u16, AsmError> {
        match self.ops[k] {
            Operand::Int(v) if v <= u16::MAX as u64 => Ok(v as u16),
            Operand::Int(_) => {
                Err(self.ctx.err(self.toks[k].col, AsmErrorKind::ImmediateRange(self.toks[k].text.to_string())))
            }
            _ => Err(self.kind_err(k, "immediate")),
        }
    }

    fn stride(&self, k: usize) -> Result<u16, AsmError> {
        let s = self.imm16(k)?;
        if s == 0 {
            return Err(self.ctx.err(self.toks[k].col, AsmErrorKind::ImmediateRange("stride 0".into())));
        }
        Ok(s)
    }

    fn word(&self, k: usize) -> &str {
        self.toks[k].text
    }
}

fn shuf_mode(name: &str) -> Option<ShufMode> {
    ShufMode::ALL.iter().copied().find(|m| m.name() == name)
}

fn build(a: &Args) -> Result<Instr, AsmError> {
    let m = a.mnemonic.as_str();
    let ternary = |a: &Args| -> Result<(VReg, VReg, VReg, MReg), AsmError> {
        a.count(&[4], "4")?;
        Ok((a.v(0)?, a.v(1)?, a.v(2)?, a.m(3)?))
    };
    Ok(match m {
        "enter" | "leave" => {
            a.count(&[0, 1], "0")?;
            if a.ops.len() == 1 && !a.word(0).eq_ignore_ascii_case("op_default") {
                return Err(a.kind_err(0, "OP_DEFAULT"));
            }
            if m == "enter" {
                Instr::Enter
            } else {
                Instr::Leave
            }
        }
        "vload" => {
            a.count(&[3], "3")?;
            Instr::VLoad { vd: a.v(0)?, base: a.a(1)?, off: a.imm16(2)? }
        }
        "vloads" => {
            a.count(&[4], "4")?;
            Instr::VLoadS { vd: a.v(0)?, base: a.a(1)?, off: a.imm16(2)?, stride: a.stride(3)? }
        }
        "vstore" => {
            a.count(&[3], "3")?;
            Instr::VStore { base: a.a(0)?, off: a.imm16(1)?, vs: a.v(2)? }
        }
        "vstores" => {
            a.count(&[4], "4")?;
            Instr::VStoreS { base: a.a(0)?, off: a.imm16(1)?, vs: a.v(2)?, stride: a.stride(3)? }
        }
        "vbroadcast" => {
            a.count(&[2, 4], "2 or 4")?;
            if a.ops.len() == 2 {
                Instr::VBroadcast { vd: a.v(0)?, src: BcastSrc::Scalar(a.s(1)?) }
            } else {
                if a.ops[3] != Operand::Int(1) {
                    return Err(a.kind_err(3, "word count 1"));
                }
                Instr::VBroadcast { vd: a.v(0)?, src: BcastSrc::Mem { base: a.a(1)?, off: a.imm16(2)? } }
            }
        }
        "vaddmod" => {
            let (vd, va, vb, m) = ternary(a)?;
            Instr::VAddMod { vd, va, vb, m }
        }
        "vsubmod" => {
            let (vd, va, vb, m) = ternary(a)?;
            Instr::VSubMod { vd, va, vb, m }
        }
        "vmulmod" | "vimulmod" => {
            let (vd, va, vb, m) = ternary(a)?;
            Instr::VMulMod { vd, va, vb, m }
        }
        "vsmulmod" => {
            a.count(&[4], "4")?;
            Instr::VSMulMod { vd: a.v(0)?, va: a.v(1)?, s: a.s(2)?, m: a.m(3)? }
        }
        "vbfly" => {
            let (vx, vy, vw, m) = ternary(a)?;
            Instr::VBfly { vx, vy, vw, m }
        }
        "vibfly" => {
            let (vx, vy, vw, m) = ternary(a)?;
            Instr::VIBfly { vx, vy, vw, m }
        }
        "vcmp" => {
            a.count(&[4], "4")?;
            let mode = match a.word(3).to_ascii_lowercase().as_str() {
                "ge" => CmpMode::Ge,
                "lt" => CmpMode::Lt,
                _ => return Err(a.kind_err(3, "ge or lt")),
            };
            Instr::VCmp { vd: a.v(0)?, va: a.v(1)?, vb: a.v(2)?, mode }
        }
        "vshuf" => {
            a.count(&[4], "4")?;
            let mode = shuf_mode(&a.word(3).to_ascii_lowercase()).ok_or_else(|| a.kind_err(3, "shuffle mode"))?;
            Instr::VShuf { vd: a.v(0)?, va: a.v(1)?, vb: a.v(2)?, mode }
        }
        "vunpacklo" | "vunpackhi" | "vpackeven" | "vpackodd" => {
            a.count(&[3], "3")?;
            let mode = shuf_mode(&m[1..]).unwrap();
            Instr::VShuf { vd: a.v(0)?, va: a.v(1)?, vb: a.v(2)?, mode }
        }
        "sload" => {
            a.count(&[3], "3")?;
            Instr::SLoad { sd: a.s(0)?, base: a.a(1)?, off: a.imm16(2)? }
        }
        "mset" => {
            a.count(&[2], "2")?;
            Instr::MSet { m: a.m(0)?, s: a.s(1)? }
        }
        "aset" => {
            a.count(&[2, 3, 4], "2 to 4")?;
            let ad = a.a(0)?;
            match a.ops.len() {
                2 => Instr::ASet { ad, src: None, imm: a.imm16(1)?, hi: false },
                3 => Instr::ASet { ad, src: Some(a.a(1)?), imm: a.imm16(2)?, hi: false },
                _ => {
                    if !a.word(3).eq_ignore_ascii_case("hi") {
                        return Err(a.kind_err(3, "`hi`"));
                    }
                    Instr::ASet { ad, src: Some(a.a(1)?), imm: a.imm16(2)?, hi: true }
                }
            }
        }
        _ => unreachable!(),
    })
}

const MNEMONICS: [&str; 23] = [
    "enter", "leave", "vload", "vloads", "vstore", "vstores", "vbroadcast", "vaddmod", "vsubmod", "vmulmod",
    "vimulmod", "vsmulmod", "vbfly", "vibfly", "vcmp", "vshuf", "vunpacklo", "vunpackhi", "vpackeven", "vpackodd",
    "sload", "mset", "aset",
];

fn parse_stmt(ctx: &Ctx, stmt: &str, col0: usize, prog: &mut Program) -> Result<(), AsmError> {
    let lead = stmt.len() - stmt.trim_start().len();
    let s = stmt.trim();
    if s.is_empty() {
        return Ok(());
    }
    let col = col0 + lead;
    if let Some(rest) = s.strip_prefix('.') {
        let (name, arg) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
        let arg = arg.trim().to_string();
        match name {
            "entry" => prog.meta.entry = arg,
            "vdm" => prog.meta.vdm_image = Some(arg),
            "sdm" => prog.meta.sdm_image = Some(arg),
            _ => return Err(ctx.err(col, AsmErrorKind::Syntax(format!("unknown directive `.{name}`")))),
        }
        return Ok(());
    }
    let name_end = s.find(|c: char| c.is_whitespace() || c == '(').unwrap_or(s.len());
    let raw_name = &s[..name_end];
    let rest = &s[name_end..];
    let (operands, ops_col) = if let Some(open) = rest.trim_start().strip_prefix('(') {
        let open_col = col + name_end + (rest.len() - rest.trim_start().len()) + 1;
        let close = open
            .rfind(')')
            .ok_or_else(|| ctx.err(open_col, AsmErrorKind::Syntax("missing `)`".into())))?;
        if !open[close + 1..].trim().is_empty() {
            return Err(ctx.err(open_col + close + 1, AsmErrorKind::Syntax("text after `)`".into())));
        }
        (&open[..close], open_col)
    } else {
        (rest, col + name_end)
    };
    let mut mnemonic = raw_name.to_ascii_lowercase();
    if let Some(stripped) = mnemonic.strip_prefix('_') {
        mnemonic = stripped.to_string();
    }
    if let Some(stripped) = mnemonic.strip_suffix("_512x128i") {
        mnemonic = stripped.to_string();
    }
    if !MNEMONICS.contains(&mnemonic.as_str()) {
        return Err(ctx.err(col, AsmErrorKind::UnknownMnemonic(raw_name.to_string())));
    }
    let toks = split_operands(operands, ops_col);
    let mut ops = Vec::with_capacity(toks.len());
    for t in &toks {
        if t.text.is_empty() {
            return Err(ctx.err(t.col, AsmErrorKind::Syntax("empty operand".into())));
        }
        // OP_DEFAULT and mode words are resolved by the opcode builder
        let op = match parse_operand(ctx, t) {
            Ok(o) => o,
            Err(e) if matches!(e.kind, AsmErrorKind::Syntax(_)) => Operand::Word,
            Err(e) => return Err(e),
        };
        ops.push(op);
    }
    let args = Args { ctx, mnemonic, toks, ops };
    let instr = build(&args)?;
    prog.instrs.push(instr);
    Ok(())
}

/// Parse assembly text into a program.
pub fn assemble(text: &str) -> Result<Program, AsmError> {
    let mut prog = Program::default();
    for (ln, raw) in text.lines().enumerate() {
        let ctx = Ctx { line: ln + 1 };
        let code = match (raw.find("//"), raw.find('#')) {
            (Some(a), Some(b)) => &raw[..a.min(b)],
            (Some(a), None) | (None, Some(a)) => &raw[..a],
            (None, None) => raw,
        };
        let mut col = 1;
        for stmt in code.split(';') {
            parse_stmt(&ctx, stmt, col, &mut prog)?;
            col += stmt.len() + 1;
        }
    }
    Ok(prog)
}

fn fmt_instr(out: &mut String, i: &Instr) -> fmt::Result {
    match *i {
        Instr::Enter => write!(out, "enter"),
        Instr::Leave => write!(out, "leave"),
        Instr::VLoad { vd, base, off } => write!(out, "vload {vd}, {base}, {off}"),
        Instr::VLoadS { vd, base, off, stride } => write!(out, "vloads {vd}, {base}, {off}, {stride}"),
        Instr::VStore { base, off, vs } => write!(out, "vstore {base}, {off}, {vs}"),
        Instr::VStoreS { base, off, vs, stride } => write!(out, "vstores {base}, {off}, {vs}, {stride}"),
        Instr::VBroadcast { vd, src: BcastSrc::Scalar(s) } => write!(out, "vbroadcast {vd}, {s}"),
        Instr::VBroadcast { vd, src: BcastSrc::Mem { base, off } } => write!(out, "vbroadcast {vd}, {base}, {off}, 1"),
        Instr::VAddMod { vd, va, vb, m } => write!(out, "vaddmod {vd}, {va}, {vb}, {m}"),
        Instr::VSubMod { vd, va, vb, m } => write!(out, "vsubmod {vd}, {va}, {vb}, {m}"),
        Instr::VMulMod { vd, va, vb, m } => write!(out, "vmulmod {vd}, {va}, {vb}, {m}"),
        Instr::VSMulMod { vd, va, s, m } => write!(out, "vsmulmod {vd}, {va}, {s}, {m}"),
        Instr::VBfly { vx, vy, vw, m } => write!(out, "vbfly {vx}, {vy}, {vw}, {m}"),
        Instr::VIBfly { vx, vy, vw, m } => write!(out, "vibfly {vx}, {vy}, {vw}, {m}"),
        Instr::VCmp { vd, va, vb, mode } => {
            write!(out, "vcmp {vd}, {va}, {vb}, {}", if mode == CmpMode::Ge { "ge" } else { "lt" })
        }
        Instr::VShuf { vd, va, vb, mode } => write!(out, "vshuf {vd}, {va}, {vb}, {}", mode.name()),
        Instr::SLoad { sd, base, off } => write!(out, "sload {sd}, {base}, {off}"),
        Instr::MSet { m, s } => write!(out, "mset {m}, {s}"),
        Instr::ASet { ad, src: None, imm, .. } => write!(out, "aset {ad}, {imm}"),
        Instr::ASet { ad, src: Some(s), imm, hi: false } => write!(out, "aset {ad}, {s}, {imm}"),
        Instr::ASet { ad, src: Some(s), imm, hi: true } => write!(out, "aset {ad}, {s}, {imm}, hi"),
    }
}

/// Canonical text, one instruction per line.
pub fn disassemble(p: &Program) -> String {
    let mut out = String::new();
    if !p.meta.entry.is_empty() {
        let _ = writeln!(out, ".entry {}", p.meta.entry);
    }
    if let Some(v) = &p.meta.vdm_image {
        let _ = writeln!(out, ".vdm {v}");
    }
    if let Some(s) = &p.meta.sdm_image {
        let _ = writeln!(out, ".sdm {s}");
    }
    for i in &p.instrs {
        let _ = fmt_instr(&mut out, i);
        out.push('\n');
    }
    out
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        fmt_instr(&mut s, self)?;
        f.write_str(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_forms() {
        let p = assemble("vload v60, a1, 0").unwrap();
        assert_eq!(p.instrs, [Instr::VLoad { vd: VReg(60), base: AReg(1), off: 0 }]);
        let p = assemble("_vaddmod_512x128i(REG_V58, REG_V60, REG_V59, REG_M1);").unwrap();
        assert_eq!(p.instrs, [Instr::VAddMod { vd: VReg(58), va: VReg(60), vb: VReg(59), m: MReg(1) }]);
        let p = assemble("_vstores_512x128i(REG_A2, 16, REG_V21, 2); leave(OP_DEFAULT);").unwrap();
        assert_eq!(p.instrs[0], Instr::VStoreS { base: AReg(2), off: 16, vs: VReg(21), stride: 2 });
        assert_eq!(p.instrs[1], Instr::Leave);
    }

    #[test]
    fn errors_carry_position() {
        let e = assemble("enter\n  vload v64, a0, 0").unwrap_err();
        assert_eq!((e.line, e.col), (2, 9));
        assert!(matches!(e.kind, AsmErrorKind::RegisterRange(_)));
        let e = assemble("frob v1").unwrap_err();
        assert!(matches!(e.kind, AsmErrorKind::UnknownMnemonic(_)));
        let e = assemble("vaddmod v1, v2, 7, m0").unwrap_err();
        assert_eq!(e.col, 17);
        assert!(matches!(e.kind, AsmErrorKind::OperandKind { .. }));
        assert!(assemble("vloads v1, a0, 0, 0").is_err());
        assert!(assemble("vload v1, a0, 70000").is_err());
    }

    #[test]
    fn empty_kernel_two_lines() {
        let p = assemble("enter\nleave\n").unwrap();
        assert_eq!(disassemble(&p).lines().count(), 2);
    }
}
