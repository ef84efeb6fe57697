//! Functional and timing simulation of one tile.
//!
//! Architectural effects are applied when an instruction is decoded, in
//! program order; the busy board guarantees no in-flight instruction could
//! observe the difference. Timing comes from [`engine::Engine`].

mod config;
pub mod engine;
mod exec;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub use config::{Latencies, MachineConfig, VrfMode, MAX_VDM_BYTES, WORD_BYTES};
pub use engine::{Counters, StallReason, TraceEntry};

use crate::isa::{validate, Diagnostic, Instr, Program, RegId, Severity, NUM_AREGS, NUM_MREGS, NUM_SREGS, VLEN};
use crate::modmath::{BarrettVariant, Modulus};
use engine::Engine;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fault {
    VdmAddress(u64),
    SdmAddress(u64),
    UnsetModulus(u8),
    BadModulus(u128),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SimError {
    Invalid(Vec<Diagnostic>),
    Fault { index: usize, fault: Fault },
    Bounds { region: Region, offset: usize, len: usize },
    Config(&'static str),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Invalid(d) => {
                write!(f, "program failed validation")?;
                for x in d.iter().filter(|x| x.severity == Severity::Error) {
                    write!(f, "; {}", x.message)?;
                }
                Ok(())
            }
            SimError::Fault { index, fault } => write!(f, "instruction {index}: {fault:?}"),
            SimError::Bounds { region, offset, len } => {
                write!(f, "{region:?} access of {len} words at {offset} out of bounds")
            }
            SimError::Config(m) => write!(f, "bad machine config: {m}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SimError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Vdm,
    Sdm,
}

/// Summary of a finished run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub cycles: u64,
    pub wall_time_us: f64,
    /// Busy cycles of the load/store, compute and shuffle queues.
    pub queue_busy: [u64; 3],
    pub utilization: [f64; 3],
    pub hazard_stalls: u64,
    pub queue_full_stalls: u64,
    pub bank_conflict_cycles: u64,
    pub instructions: usize,
    pub digest: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEntry>>,
}

/// Complete machine state, including the timing pipeline.
#[derive(Clone, Debug)]
pub struct RpuState {
    pub program: Program,
    pub vregs: Vec<u128>,
    pub sregs: [u128; NUM_SREGS as usize],
    pub mregs: [Option<Modulus>; NUM_MREGS as usize],
    pub aregs: [u64; NUM_AREGS as usize],
    pub vdm: Vec<u128>,
    pub sdm: Vec<u128>,
    pub variant: BarrettVariant,
    pub pc: usize,
    pub finished: bool,
    pub last_stall: Option<StallReason>,
    pub engine: Engine,
}

impl RpuState {
    pub fn new(program: Program, cfg: MachineConfig) -> Result<Self, SimError> {
        cfg.check().map_err(SimError::Config)?;
        Ok(RpuState {
            program,
            vregs: vec![0; 64 * VLEN],
            sregs: [0; NUM_SREGS as usize],
            mregs: [None; NUM_MREGS as usize],
            aregs: [0; NUM_AREGS as usize],
            vdm: vec![0; cfg.vdm_words()],
            sdm: vec![0; cfg.sdm_words()],
            variant: BarrettVariant::Classic,
            pc: 0,
            finished: false,
            last_stall: None,
            engine: Engine::new(cfg),
        })
    }

    pub fn cfg(&self) -> &MachineConfig {
        &self.engine.cfg
    }

    pub fn cycle(&self) -> u64 {
        self.engine.cycle
    }

    pub fn busy_board(&self) -> u64 {
        self.engine.busy_board()
    }

    /// Host-side preset of a modulus register.
    pub fn set_modulus(&mut self, m: u8, q: Modulus) {
        self.mregs[m as usize] = Some(q);
    }

    /// Place 16-byte little-endian words at a word offset.
    pub fn load_memory(&mut self, region: Region, offset: usize, words: &[u128]) -> Result<(), SimError> {
        let mem = match region {
            Region::Vdm => &mut self.vdm,
            Region::Sdm => &mut self.sdm,
        };
        let end = offset.checked_add(words.len()).filter(|&e| e <= mem.len());
        let Some(end) = end else {
            return Err(SimError::Bounds { region, offset, len: words.len() });
        };
        mem[offset..end].copy_from_slice(words);
        Ok(())
    }

    pub fn load_bytes(&mut self, region: Region, offset: usize, bytes: &[u8]) -> Result<(), SimError> {
        if !bytes.len().is_multiple_of(16) {
            return Err(SimError::Bounds { region, offset, len: bytes.len() });
        }
        let words: Vec<u128> = bytes.chunks_exact(16).map(|c| u128::from_le_bytes(c.try_into().unwrap())).collect();
        self.load_memory(region, offset, &words)
    }

    pub fn dump_memory(&self, region: Region, offset: usize, len: usize) -> Result<Vec<u128>, SimError> {
        let mem = match region {
            Region::Vdm => &self.vdm,
            Region::Sdm => &self.sdm,
        };
        mem.get(offset..offset.saturating_add(len))
            .map(|s| s.to_vec())
            .ok_or(SimError::Bounds { region, offset, len })
    }

    pub fn dump_bytes(&self, region: Region, offset: usize, len: usize) -> Result<Vec<u8>, SimError> {
        Ok(self.dump_memory(region, offset, len)?.iter().flat_map(|w| w.to_le_bytes()).collect())
    }

    pub fn done(&self) -> bool {
        self.finished && self.engine.idle()
    }

    /// Advance exactly one cycle.
    pub fn step(&mut self) -> Result<(), SimError> {
        self.engine.begin_cycle();
        self.last_stall = None;
        if !self.finished {
            if let Some(&ins) = self.program.instrs.get(self.pc) {
                match self.engine.check(&ins) {
                    Ok(()) => {
                        self.execute(&ins).map_err(|fault| SimError::Fault { index: self.pc, fault })?;
                        self.engine.dispatch(&ins, self.pc);
                        self.pc += 1;
                        if ins == Instr::Leave {
                            self.finished = true;
                        }
                    }
                    Err(why) => {
                        self.engine.note_stall(why, 1);
                        self.last_stall = Some(why);
                    }
                }
            } else {
                self.finished = true;
            }
        }
        self.engine.cycle += 1;
        Ok(())
    }

    /// Step until the program has left and the pipeline drained, skipping
    /// stretches of cycles in which nothing can change.
    pub fn run_to_end(&mut self) -> Result<(), SimError> {
        while !self.done() {
            self.step()?;
            if let Some(why) = self.last_stall {
                // frontend blocked: nothing changes before the next event
                if let Some(t) = self.engine.next_change() {
                    if t > self.engine.cycle {
                        let skip = t - self.engine.cycle;
                        self.engine.note_stall(why, skip);
                        self.engine.cycle = t;
                    }
                }
            } else if self.finished && !self.engine.idle() {
                if let Some(t) = self.engine.next_change() {
                    self.engine.cycle = self.engine.cycle.max(t);
                }
            }
        }
        Ok(())
    }

    /// FNV-1a over registers and memories.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |w: u128| {
            for b in w.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        self.vregs.iter().for_each(|&w| eat(w));
        self.sregs.iter().for_each(|&w| eat(w));
        self.mregs.iter().for_each(|m| eat(m.map_or(0, |m| m.q())));
        self.aregs.iter().for_each(|&w| eat(w as u128));
        self.vdm.iter().for_each(|&w| eat(w));
        self.sdm.iter().for_each(|&w| eat(w));
        h
    }

    pub fn result(&self, keep_trace: bool) -> RunResult {
        let c = &self.engine.counters;
        let cycles = self.engine.cycle;
        let util = |b: u64| if cycles == 0 { 0.0 } else { b as f64 / cycles as f64 };
        RunResult {
            cycles,
            wall_time_us: cycles as f64 / (self.cfg().clock_ghz * 1e3),
            queue_busy: c.queue_busy,
            utilization: [util(c.queue_busy[0]), util(c.queue_busy[1]), util(c.queue_busy[2])],
            hazard_stalls: c.hazard_stalls,
            queue_full_stalls: c.queue_full_stalls,
            bank_conflict_cycles: c.bank_conflict_cycles,
            instructions: self.pc,
            digest: self.digest(),
            trace: keep_trace.then(|| self.engine.trace.clone()),
        }
    }
}

/// Validate, then run `p` to completion on fresh memories preloaded with the
/// images (placed at word 0).
pub fn run(p: &Program, cfg: &MachineConfig, vdm_image: &[u128], sdm_image: &[u128]) -> Result<(RunResult, RpuState), SimError> {
    let diags = validate(p, cfg);
    if diags.iter().any(|d| d.severity == Severity::Error) {
        return Err(SimError::Invalid(diags));
    }
    let mut st = RpuState::new(p.clone(), cfg.clone())?;
    st.load_memory(Region::Vdm, 0, vdm_image)?;
    st.load_memory(Region::Sdm, 0, sdm_image)?;
    st.run_to_end()?;
    let r = st.result(true);
    Ok((r, st))
}

/// Hazard violations in a trace: a read starting before the producing
/// write completed, a write completing before an earlier one, or a write
/// starting before an earlier reader finished. Empty for a correct timing.
pub fn trace_hazards(p: &Program, trace: &[TraceEntry]) -> Vec<usize> {
    let mut by_index: Vec<Option<TraceEntry>> = vec![None; p.instrs.len()];
    for t in trace {
        by_index[t.index] = Some(*t);
    }
    let mut last_write: [Option<TraceEntry>; RegId::DENSE_COUNT] = [None; RegId::DENSE_COUNT];
    let mut last_read_done: [u64; RegId::DENSE_COUNT] = [0; RegId::DENSE_COUNT];
    let mut bad = Vec::new();
    for (i, ins) in p.instrs.iter().enumerate() {
        let Some(t) = by_index[i] else { continue };
        let mut ok = true;
        for r in ins.reads() {
            if let Some(w) = last_write[r.dense()] {
                ok &= t.start >= w.complete;
            }
        }
        for r in ins.writes() {
            if let Some(w) = last_write[r.dense()] {
                ok &= t.complete > w.complete;
            }
            ok &= t.start >= last_read_done[r.dense()];
        }
        if !ok {
            bad.push(i);
        }
        for r in ins.reads() {
            let d = r.dense();
            last_read_done[d] = last_read_done[d].max(t.reads_done);
        }
        for r in ins.writes() {
            last_write[r.dense()] = Some(t);
        }
    }
    bad
}
