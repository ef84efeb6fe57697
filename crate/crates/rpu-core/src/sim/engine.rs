//! Cycle-level timing shared by the simulator and the code scheduler.
//!
//! Each cycle: retire events due now, start queue heads on idle units, then
//! try to decode one instruction. Decode stalls on a busy source (RAW), a
//! busy destination (WAW) or a destination an in-flight instruction has not
//! finished reading (WAR), and on a full queue.

use alloc::collections::{BinaryHeap, VecDeque};
use alloc::vec::Vec;
use core::cmp::Reverse;

use serde::{Deserialize, Serialize};

use super::MachineConfig;
use crate::isa::{Instr, Opcode, QueueClass, RegId, VReg};

pub const QUEUES: [QueueClass; 3] = [QueueClass::LoadStore, QueueClass::Compute, QueueClass::Shuffle];

pub fn queue_index(q: QueueClass) -> Option<usize> {
    match q {
        QueueClass::LoadStore => Some(0),
        QueueClass::Compute => Some(1),
        QueueClass::Shuffle => Some(2),
        QueueClass::Control => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StallReason {
    Hazard,
    QueueFull,
}

/// Issue cycles, pipeline depth and stacked-memory penalty of one instruction.
pub fn op_timing(ins: &Instr, cfg: &MachineConfig) -> (u32, u32, u32) {
    let lat = &cfg.latency;
    let (occ, depth) = match ins.opcode() {
        Opcode::Ctrl => (0, 0),
        Opcode::VLoad | Opcode::VLoadS | Opcode::VStore | Opcode::VStoreS => (cfg.vdm_occupancy(), lat.vdm_latency),
        Opcode::SLoad | Opcode::MSet | Opcode::ASet => (1, lat.scalar_latency),
        Opcode::VAddMod | Opcode::VSubMod | Opcode::VCmp => (cfg.vector_occupancy(), lat.add_depth),
        Opcode::VMulMod | Opcode::VSMulMod | Opcode::VBfly | Opcode::VIBfly => {
            (cfg.vector_occupancy(), lat.mul_depth)
        }
        Opcode::VShuf | Opcode::VBroadcast => (cfg.vector_occupancy(), lat.sbar_latency),
    };
    (occ, depth, port_penalty(ins, cfg))
}

/// Extra issue cycles when distinct operands share a single-port memory:
/// one per additional register in each memory.
pub fn port_penalty(ins: &Instr, cfg: &MachineConfig) -> u32 {
    let per = cfg.regs_per_memory();
    if per == 1 {
        return 0;
    }
    let mut regs: Vec<u8> = ins
        .reads()
        .into_iter()
        .chain(ins.writes())
        .filter_map(|r| if let RegId::V(i) = r { Some(i) } else { None })
        .collect();
    regs.sort_unstable();
    regs.dedup();
    let mut mems: Vec<u8> = regs.iter().map(|&r| crate::isa::bank_of(VReg(r), cfg)).collect();
    let total = mems.len();
    mems.dedup();
    (total - mems.len()) as u32
}

/// Timestamps of one executed instruction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub index: usize,
    pub dispatch: u64,
    pub start: u64,
    pub reads_done: u64,
    pub complete: u64,
    /// Why decode held this instruction back, if it did.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stall: Option<StallReason>,
}

#[derive(Clone, Copy, Debug)]
struct Issued {
    index: usize,
    dispatched: u64,
    occ: u32,
    depth: u32,
    penalty: u32,
    reads: [u8; 5],
    nreads: u8,
    writes: [u8; 2],
    nwrites: u8,
    stall: Option<StallReason>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Ev {
    ReadsDone(usize),
    WritesDone(usize),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub hazard_stalls: u64,
    pub queue_full_stalls: u64,
    pub bank_conflict_cycles: u64,
    pub queue_busy: [u64; 3],
}

#[derive(Clone, Debug)]
pub struct Engine {
    pub cfg: MachineConfig,
    pub cycle: u64,
    queues: [VecDeque<Issued>; 3],
    unit_free: [u64; 3],
    write_pending: [u16; RegId::DENSE_COUNT],
    read_pending: [u16; RegId::DENSE_COUNT],
    events: BinaryHeap<Reverse<(u64, Ev)>>,
    issued: Vec<Issued>,
    pub trace: Vec<TraceEntry>,
    pub counters: Counters,
    stalled: Option<StallReason>,
}

fn dense(regs: Vec<RegId>) -> ([u8; 5], u8) {
    let mut out = [0u8; 5];
    let mut n = 0;
    for r in regs {
        let d = r.dense() as u8;
        if !out[..n].contains(&d) {
            out[n] = d;
            n += 1;
        }
    }
    (out, n as u8)
}

impl Engine {
    pub fn new(cfg: MachineConfig) -> Self {
        Engine {
            cfg,
            cycle: 0,
            queues: Default::default(),
            unit_free: [0; 3],
            write_pending: [0; RegId::DENSE_COUNT],
            read_pending: [0; RegId::DENSE_COUNT],
            events: BinaryHeap::new(),
            issued: Vec::new(),
            trace: Vec::new(),
            counters: Counters::default(),
            stalled: None,
        }
    }

    /// Vector registers with a write in flight.
    pub fn busy_board(&self) -> u64 {
        (0..64).filter(|&i| self.write_pending[i] > 0).fold(0, |m, i| m | 1 << i)
    }

    pub fn reg_write_pending(&self, r: RegId) -> bool {
        self.write_pending[r.dense()] > 0
    }

    pub fn reg_read_pending(&self, r: RegId) -> bool {
        self.read_pending[r.dense()] > 0
    }

    pub fn idle(&self) -> bool {
        self.events.is_empty() && self.queues.iter().all(|q| q.is_empty())
    }

    /// Phase one of a cycle: retire due events and start queue heads.
    pub fn begin_cycle(&mut self) {
        let now = self.cycle;
        while let Some(&Reverse((t, ev))) = self.events.peek() {
            if t > now {
                break;
            }
            self.events.pop();
            match ev {
                Ev::ReadsDone(k) => {
                    let is = self.issued[k];
                    for &r in &is.reads[..is.nreads as usize] {
                        self.read_pending[r as usize] -= 1;
                    }
                }
                Ev::WritesDone(k) => {
                    let is = self.issued[k];
                    for &r in &is.writes[..is.nwrites as usize] {
                        self.write_pending[r as usize] -= 1;
                    }
                }
            }
        }
        for q in 0..3 {
            if self.unit_free[q] > now {
                continue;
            }
            if let Some(is) = self.queues[q].pop_front() {
                let busy = (is.occ + is.penalty) as u64;
                self.unit_free[q] = now + busy;
                self.counters.queue_busy[q] += busy;
                self.counters.bank_conflict_cycles += is.penalty as u64;
                let k = self.trace.len();
                let reads_done = now + busy;
                let complete = reads_done + is.depth as u64;
                self.trace.push(TraceEntry {
                    index: is.index,
                    dispatch: is.dispatched,
                    start: now,
                    reads_done,
                    complete,
                    stall: is.stall,
                });
                self.issued.push(is);
                self.events.push(Reverse((reads_done, Ev::ReadsDone(k))));
                self.events.push(Reverse((complete, Ev::WritesDone(k))));
            }
        }
    }

    /// Can `ins` be decoded this cycle?
    pub fn check(&self, ins: &Instr) -> Result<(), StallReason> {
        for r in ins.reads() {
            if self.write_pending[r.dense()] > 0 {
                return Err(StallReason::Hazard);
            }
        }
        for r in ins.writes() {
            let d = r.dense();
            if self.write_pending[d] > 0 || self.read_pending[d] > 0 {
                return Err(StallReason::Hazard);
            }
        }
        if let Some(q) = queue_index(ins.opcode().queue()) {
            if self.queues[q].len() >= self.cfg.queue_depth as usize {
                return Err(StallReason::QueueFull);
            }
        }
        Ok(())
    }

    pub fn note_stall(&mut self, why: StallReason, cycles: u64) {
        self.stalled = Some(why);
        match why {
            StallReason::Hazard => self.counters.hazard_stalls += cycles,
            StallReason::QueueFull => self.counters.queue_full_stalls += cycles,
        }
    }

    /// Decode `ins` (program index `index`) now; `check` must have passed.
    pub fn dispatch(&mut self, ins: &Instr, index: usize) {
        let stall = self.stalled.take();
        let Some(q) = queue_index(ins.opcode().queue()) else {
            return;
        };
        let (occ, depth, penalty) = op_timing(ins, &self.cfg);
        let (reads, nreads) = dense(ins.reads());
        let (w5, nwrites) = dense(ins.writes());
        let writes = [w5[0], w5[1]];
        for &r in &reads[..nreads as usize] {
            self.read_pending[r as usize] += 1;
        }
        for &r in &writes[..nwrites as usize] {
            self.write_pending[r as usize] += 1;
        }
        let dispatched = self.cycle;
        self.queues[q].push_back(Issued { index, dispatched, occ, depth, penalty, reads, nreads, writes, nwrites, stall });
    }

    /// Earliest future cycle at which anything can change, if any.
    pub fn next_change(&self) -> Option<u64> {
        let ev = self.events.peek().map(|Reverse((t, _))| *t);
        let unit = (0..3).filter(|&q| !self.queues[q].is_empty()).map(|q| self.unit_free[q].max(self.cycle)).min();
        match (ev, unit) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}
