//! On-disk formats: memory images, polynomials, programs and traces.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rpu_core::isa::{assemble, decode_program, encode_program, AsmError, DecodeError, Program, QueueClass, MAGIC};
use rpu_core::modmath::Modulus;
use rpu_core::ring::{Domain, RingError, RnsPoly, Tower};
use rpu_core::sim::{StallReason, TraceEntry};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub enum FormatError {
    Io(PathBuf, io::Error),
    Json(String),
    Asm(AsmError),
    Decode(DecodeError),
    Ring(RingError),
    /// Image length not a multiple of 16 bytes.
    Ragged(usize),
    Value(String),
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormatError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            FormatError::Json(e) => write!(f, "invalid JSON: {e}"),
            FormatError::Asm(e) => write!(f, "{e}"),
            FormatError::Decode(e) => write!(f, "{e}"),
            FormatError::Ring(e) => write!(f, "{e}"),
            FormatError::Ragged(n) => write!(f, "image of {n} bytes is not a whole number of 16-byte words"),
            FormatError::Value(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for FormatError {}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        FormatError::Json(e.to_string())
    }
}

pub fn read(path: &Path) -> Result<Vec<u8>, FormatError> {
    fs::read(path).map_err(|e| FormatError::Io(path.into(), e))
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    fs::write(path, bytes).map_err(|e| FormatError::Io(path.into(), e))
}

pub fn words_to_bytes(words: &[u128]) -> Vec<u8> {
    words.iter().flat_map(|w| w.to_le_bytes()).collect()
}

pub fn bytes_to_words(bytes: &[u8]) -> Result<Vec<u128>, FormatError> {
    if !bytes.len().is_multiple_of(16) {
        return Err(FormatError::Ragged(bytes.len()));
    }
    Ok(bytes.chunks_exact(16).map(|c| u128::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn read_image(path: &Path) -> Result<Vec<u128>, FormatError> {
    bytes_to_words(&read(path)?)
}

pub fn write_image(path: &Path, words: &[u128]) -> Result<(), FormatError> {
    write(path, &words_to_bytes(words))
}

/// JSON polynomial: decimal strings so 128-bit values survive any reader.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyFile {
    pub n: usize,
    pub moduli: Vec<String>,
    pub domain: Domain,
    pub towers: Vec<Vec<String>>,
}

fn parse_u128(s: &str) -> Result<u128, FormatError> {
    s.trim().parse().map_err(|_| FormatError::Value(format!("not a 128-bit unsigned integer: {s:?}")))
}

impl PolyFile {
    pub fn from_poly(p: &RnsPoly) -> Self {
        PolyFile {
            n: p.n(),
            moduli: p.towers.iter().map(|t| t.q().to_string()).collect(),
            domain: p.domain,
            towers: p.towers.iter().map(|t| t.coeffs.iter().map(u128::to_string).collect()).collect(),
        }
    }

    pub fn to_poly(&self) -> Result<RnsPoly, FormatError> {
        if self.moduli.len() != self.towers.len() {
            return Err(FormatError::Value(format!("{} moduli for {} towers", self.moduli.len(), self.towers.len())));
        }
        let mut towers = Vec::with_capacity(self.towers.len());
        for (q, t) in self.moduli.iter().zip(&self.towers) {
            let m = Modulus::new(parse_u128(q)?).map_err(|e| FormatError::Value(format!("modulus {q}: {e}")))?;
            if t.len() != self.n {
                return Err(FormatError::Value(format!("tower of {} coefficients, n = {}", t.len(), self.n)));
            }
            let coeffs = t.iter().map(|c| parse_u128(c)).collect::<Result<_, _>>()?;
            towers.push(Tower::new(coeffs, m).map_err(FormatError::Ring)?);
        }
        RnsPoly::new(towers, self.domain).map_err(FormatError::Ring)
    }
}

/// Memory image of a polynomial, tower after tower.
pub fn poly_image(p: &RnsPoly) -> Vec<u128> {
    p.towers.iter().flat_map(|t| t.coeffs.iter().copied()).collect()
}

/// Binary (by magic), JSON (leading `{`) or assembly text.
pub fn parse_program(bytes: &[u8]) -> Result<Program, FormatError> {
    if bytes.starts_with(MAGIC) {
        return decode_program(bytes).map_err(FormatError::Decode);
    }
    let text = std::str::from_utf8(bytes).map_err(|_| FormatError::Value("program is neither binary nor text".into()))?;
    if text.trim_start().starts_with('{') {
        return Ok(serde_json::from_str(text)?);
    }
    assemble(text).map_err(FormatError::Asm)
}

pub fn load_program(path: &Path) -> Result<Program, FormatError> {
    parse_program(&read(path)?)
}

pub fn program_binary(p: &Program) -> Vec<u8> {
    encode_program(p)
}

pub fn program_json(p: &Program) -> String {
    serde_json::to_string_pretty(p).expect("programs serialize") + "\n"
}

/// One JSON line of an execution trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceLine {
    pub cycle: u64,
    pub index: usize,
    pub dispatch: u64,
    pub complete: u64,
    pub queue: String,
    pub opcode: String,
    pub operands: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stall_reason: Option<StallReason>,
}

fn queue_name(q: QueueClass) -> &'static str {
    match q {
        QueueClass::Control => "control",
        QueueClass::LoadStore => "load-store",
        QueueClass::Compute => "compute",
        QueueClass::Shuffle => "shuffle",
    }
}

/// Trace lines ordered by start cycle, then program order.
pub fn trace_lines(p: &Program, trace: &[TraceEntry]) -> Vec<TraceLine> {
    let mut lines: Vec<TraceLine> = trace
        .iter()
        .map(|t| {
            let ins = p.instrs[t.index];
            let text = ins.to_string();
            let (op, rest) = text.split_once(' ').unwrap_or((&text, ""));
            TraceLine {
                cycle: t.start,
                index: t.index,
                dispatch: t.dispatch,
                complete: t.complete,
                queue: queue_name(ins.opcode().queue()).into(),
                opcode: op.into(),
                operands: rest.trim().into(),
                stall_reason: t.stall,
            }
        })
        .collect();
    lines.sort_by_key(|l| (l.cycle, l.index));
    lines
}

pub fn write_trace(w: &mut dyn Write, p: &Program, trace: &[TraceEntry]) -> io::Result<()> {
    for l in trace_lines(p, trace) {
        serde_json::to_writer(&mut *w, &l)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
