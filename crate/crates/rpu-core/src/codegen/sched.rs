//! Register assignment and list scheduling against the engine's timing.
//!
//! Ops become ready when their producers and any conflicting memory
//! accesses have been decoded. Each simulated cycle the first ready op (in
//! generation order, within a window) that the engine would accept is
//! decoded. Registers are handed out per block: a block is admitted only
//! when the free pool covers the peak it reaches in generation order, and
//! its allocating ops keep that order, so admission can never deadlock.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use super::emit::{BinKind, Ir, Op, Val};
use super::{CodegenError, RegAllocStrategy};
use crate::isa::{AReg, BcastSrc, Instr, MReg, MemAccess, Program, RegId, SReg, VReg, NUM_AREGS, VLEN};
use crate::sim::engine::Engine;
use crate::sim::MachineConfig;

const WINDOW: usize = 48;
const NREGS: usize = 64;
const NONE: u32 = u32::MAX;

/// Cycles `instrs` take on `cfg`; timing does not depend on data.
pub fn timing(instrs: &[Instr], cfg: &MachineConfig) -> u64 {
    let mut e = Engine::new(cfg.clone());
    let mut pc = 0;
    while pc < instrs.len() || !e.idle() {
        e.begin_cycle();
        let mut stalled = false;
        if let Some(ins) = instrs.get(pc) {
            match e.check(ins) {
                Ok(()) => {
                    e.dispatch(ins, pc);
                    pc += 1;
                }
                Err(_) => stalled = true,
            }
        }
        e.cycle += 1;
        if stalled || pc >= instrs.len() {
            match e.next_change() {
                Some(t) => e.cycle = e.cycle.max(t),
                None if stalled => break,
                None => {}
            }
        }
    }
    e.cycle
}

fn seg(addr: u32) -> (AReg, u16) {
    (AReg((addr >> 16) as u8), (addr & 0xffff) as u16)
}

fn words(addr: u32, stride: u32) -> impl Iterator<Item = usize> {
    (0..VLEN as u32).map(move |i| (addr + i * stride) as usize)
}

struct Deps {
    npred: Vec<u32>,
    succ: Vec<Vec<u32>>,
}

fn add_edges(deps: &mut Deps, i: usize, mut preds: Vec<u32>) {
    preds.sort_unstable();
    preds.dedup();
    deps.npred[i] = preds.len() as u32;
    for p in preds {
        deps.succ[p as usize].push(i as u32);
    }
}

/// Memory ordering: loads after the last store to a word, stores after the
/// last store and every load since.
#[derive(Default)]
struct MemDeps {
    writer: Vec<u32>,
    readers: Vec<Vec<u32>>,
}

impl MemDeps {
    fn access(&mut self, i: u32, ws: impl Iterator<Item = usize>, store: bool, preds: &mut Vec<u32>) {
        for w in ws {
            if w >= self.writer.len() {
                self.writer.resize(w + 1, NONE);
                self.readers.resize(w + 1, Vec::new());
            }
            if self.writer[w] != NONE {
                preds.push(self.writer[w]);
            }
            if store {
                preds.append(&mut self.readers[w]);
                self.writer[w] = i;
            } else {
                self.readers[w].push(i);
            }
        }
    }
}

fn ir_deps(ir: &Ir, def_op: &[u32]) -> Deps {
    let n = ir.ops.len();
    let mut deps = Deps { npred: vec![0; n], succ: vec![Vec::new(); n] };
    let mut mem = MemDeps::default();
    let mut last_fixed = NONE;
    for (i, op) in ir.ops.iter().enumerate() {
        let mut preds = Vec::new();
        if last_fixed != NONE {
            preds.push(last_fixed);
        }
        if let Op::Fixed(_) = op {
            last_fixed = i as u32;
        }
        let (u, nu) = op.uses();
        preds.extend(u[..nu].iter().map(|&v| def_op[v as usize]));
        if let Some((addr, stride, store)) = op.vdm() {
            mem.access(i as u32, words(addr, stride), store, &mut preds);
        }
        add_edges(&mut deps, i, preds);
    }
    deps
}

struct BlockInfo {
    /// `peak[k]`: most registers the block holds from its k-th allocating
    /// op on, in generation order.
    peak: Vec<u32>,
    cursor: usize,
    live: u32,
    /// Some value is used by a later block (pass-resident twiddles).
    leaks: bool,
    left: usize,
}

impl BlockInfo {
    fn extra(&self) -> u32 {
        self.peak.get(self.cursor).map_or(0, |&p| p.saturating_sub(self.live))
    }
}

/// Registers kept back for older blocks when a younger one allocates.
const SLACK: u32 = 8;

/// Banker's check: can blocks `lo..=hi` still run to completion oldest
/// first with `free` registers? Blocks older than `b` get some slack.
fn safe(blocks: &[BlockInfo], lo: usize, hi: usize, free: u32, b: usize) -> bool {
    let mut avail = free as i64;
    for (a, bl) in blocks[lo..=hi].iter().enumerate() {
        let x = bl.extra() as i64;
        let slack = if lo + a < b && bl.cursor < bl.peak.len() { SLACK as i64 } else { 0 };
        if x + slack > avail {
            return false;
        }
        avail += if bl.leaks { -x } else { bl.live as i64 };
    }
    true
}

fn allocs(op: &Op) -> usize {
    if op.tied().is_some() {
        0
    } else {
        op.defs().1
    }
}

struct Alloc<'a> {
    cfg: &'a MachineConfig,
    strategy: RegAllocStrategy,
    free: [bool; NREGS],
    rr: usize,
}

impl Alloc<'_> {
    /// Pick a register from `free` plus `also`, avoiding pending ones and,
    /// with single-port memories, the memories of `avoid`.
    fn pick(&self, e: &Engine, also: &[u8], taken: &[u8], avoid: &[u8]) -> Option<u8> {
        let per = self.cfg.regs_per_memory();
        let mut best: Option<(u32, usize, u8)> = None;
        for k in 0..NREGS {
            let r = match self.strategy {
                RegAllocStrategy::Greedy => k,
                RegAllocStrategy::RoundRobin => (self.rr + k) % NREGS,
            } as u8;
            if !(self.free[r as usize] || also.contains(&r)) || taken.contains(&r) {
                continue;
            }
            let id = RegId::V(r);
            let mut cost = 0;
            if e.reg_write_pending(id) || e.reg_read_pending(id) {
                cost += 2;
            }
            if per > 1 && avoid.iter().chain(taken).any(|&a| a / per == r / per) {
                cost += 1;
            }
            if best.is_none_or(|b| cost < b.0) {
                best = Some((cost, k, r));
                if cost == 0 {
                    break;
                }
            }
        }
        best.map(|b| b.2)
    }
}

fn lower_op(op: &Op, phys: &[u8]) -> Instr {
    let p = |v: Val| VReg(phys[v as usize]);
    let m = MReg(1);
    match *op {
        Op::Fixed(i) => i,
        Op::Load { d, addr, stride } => {
            let (base, off) = seg(addr);
            if stride == 1 {
                Instr::VLoad { vd: p(d), base, off }
            } else {
                Instr::VLoadS { vd: p(d), base, off, stride: stride as u16 }
            }
        }
        Op::Store { s, addr, stride } => {
            let (base, off) = seg(addr);
            if stride == 1 {
                Instr::VStore { base, off, vs: p(s) }
            } else {
                Instr::VStoreS { base, off, vs: p(s), stride: stride as u16 }
            }
        }
        Op::Bcast { d, slot } => Instr::VBroadcast { vd: p(d), src: BcastSrc::Mem { base: AReg(0), off: slot } },
        Op::Bfly { x, y, w, inv, .. } => {
            if inv {
                Instr::VIBfly { vx: p(x), vy: p(y), vw: p(w), m }
            } else {
                Instr::VBfly { vx: p(x), vy: p(y), vw: p(w), m }
            }
        }
        Op::Bin { kind, d, a, b } => match kind {
            BinKind::Add => Instr::VAddMod { vd: p(d), va: p(a), vb: p(b), m },
            BinKind::Sub => Instr::VSubMod { vd: p(d), va: p(a), vb: p(b), m },
            BinKind::Mul => Instr::VMulMod { vd: p(d), va: p(a), vb: p(b), m },
        },
        Op::Scale { d, a } => Instr::VSMulMod { vd: p(d), va: p(a), s: SReg(1), m },
        Op::Shuf { d, a, b, mode } => Instr::VShuf { vd: p(d), va: p(a), vb: p(b), mode },
    }
}

/// Assign registers and order the ops. With `reorder` off the generation
/// order is kept.
fn list(ir: &Ir, cfg: &MachineConfig, strategy: RegAllocStrategy, reorder: bool) -> Result<Vec<Instr>, CodegenError> {
    let n = ir.ops.len();
    let nv = ir.nvals as usize;
    let mut def_op = vec![NONE; nv];
    let mut uses_left = vec![0u32; nv];
    for (i, op) in ir.ops.iter().enumerate() {
        let (d, nd) = op.defs();
        for &v in &d[..nd] {
            def_op[v as usize] = i as u32;
        }
        let (u, nu) = op.uses();
        for &v in &u[..nu] {
            uses_left[v as usize] += 1;
        }
    }
    let owner = |v: Val| ir.block[def_op[v as usize] as usize] as usize;
    let nblk = ir.block.iter().copied().max().unwrap_or(0) as usize + 1;
    let mut blocks: Vec<BlockInfo> =
        (0..nblk).map(|_| BlockInfo { peak: Vec::new(), cursor: 0, live: 0, leaks: false, left: 0 }).collect();
    let mut alloc_idx = vec![NONE; n];
    // generation-order register use per block
    {
        let mut left = uses_left.clone();
        let mut live = vec![0u32; nblk];
        for (i, op) in ir.ops.iter().enumerate() {
            let b = ir.block[i] as usize;
            blocks[b].left += 1;
            let (u, nu) = op.uses();
            let tied = op.tied();
            for &v in &u[..nu] {
                left[v as usize] -= 1;
                if owner(v) != b {
                    blocks[owner(v)].leaks = true;
                }
                let kept = tied.is_some_and(|t| t.iter().any(|&(_, x)| x == v));
                if left[v as usize] == 0 && !kept {
                    live[owner(v)] -= 1;
                }
            }
            let a = allocs(op) as u32;
            if a > 0 {
                alloc_idx[i] = blocks[b].peak.len() as u32;
                live[b] += a;
                blocks[b].peak.push(live[b]);
            }
        }
        for bl in &mut blocks {
            for k in (0..bl.peak.len().saturating_sub(1)).rev() {
                bl.peak[k] = bl.peak[k].max(bl.peak[k + 1]);
            }
            if bl.peak.first().is_some_and(|&p| p as usize > NREGS) {
                return Err(CodegenError::BadPlan("a block needs more than 64 registers"));
            }
        }
    }
    let mut deps = ir_deps(ir, &def_op);
    let mut engine = Engine::new(cfg.clone());
    let mut alloc = Alloc { cfg, strategy, free: [true; NREGS], rr: 0 };
    let mut nfree = NREGS as u32;
    let mut phys = vec![0u8; nv];
    let leave = n - 1;
    let mut ready: BTreeSet<u32> = (0..n).filter(|&i| deps.npred[i] == 0 && i != leave).map(|i| i as u32).collect();
    let mut done = vec![false; n];
    let mut out = Vec::with_capacity(n);
    let mut next_in_order = 0usize;
    // oldest block with ops left; youngest block that has allocated
    let mut lo = 0usize;
    let mut hi = 0usize;

    while out.len() < n {
        engine.begin_cycle();
        if out.len() == n - 1 {
            out.push(lower_op(&ir.ops[leave], &phys));
            break;
        }
        let mut issued = false;
        let cands: Vec<u32> = if reorder {
            ready.iter().take(WINDOW).copied().collect()
        } else if ready.contains(&(next_in_order as u32)) {
            vec![next_in_order as u32]
        } else {
            Vec::new()
        };
        for i in cands {
            let iu = i as usize;
            let op = &ir.ops[iu];
            let b = ir.block[iu] as usize;
            let a = allocs(op) as u32;
            // allocating ops of a block keep generation order
            if a > 0 && alloc_idx[iu] as usize != blocks[b].cursor {
                continue;
            }
            let (u, nu) = op.uses();
            let tied = op.tied();
            // values whose last use this is
            let mut dying: Vec<Val> = Vec::new();
            for (x, &v) in u[..nu].iter().enumerate() {
                if u[..x].contains(&v) {
                    continue;
                }
                let cnt = u[..nu].iter().filter(|&&w| w == v).count() as u32;
                let kept = tied.is_some_and(|t| t.iter().any(|&(_, y)| y == v));
                if uses_left[v as usize] == cnt && !kept {
                    dying.push(v);
                }
            }
            let freed: Vec<u8> = dying.iter().map(|&v| phys[v as usize]).collect();
            if a > 0 {
                // tentative state for the safety check
                for &v in &dying {
                    blocks[owner(v)].live -= 1;
                }
                blocks[b].live += a;
                blocks[b].cursor += 1;
                let ok = nfree + freed.len() as u32 >= a && safe(&blocks, lo, hi.max(b), nfree + freed.len() as u32 - a, b);
                blocks[b].cursor -= 1;
                blocks[b].live -= a;
                for &v in &dying {
                    blocks[owner(v)].live += 1;
                }
                if !ok {
                    continue;
                }
            }
            let (d, nd) = op.defs();
            let avoid: Vec<u8> = u[..nu].iter().map(|&v| phys[v as usize]).collect();
            let mut taken: Vec<u8> = Vec::new();
            if let Some(t) = tied {
                for (dv, uv) in t {
                    phys[dv as usize] = phys[uv as usize];
                }
            } else {
                for &v in &d[..nd] {
                    let r = alloc.pick(&engine, &freed, &taken, &avoid).expect("free count checked");
                    phys[v as usize] = r;
                    taken.push(r);
                }
            }
            let ins = lower_op(op, &phys);
            if engine.check(&ins).is_err() {
                continue;
            }
            engine.dispatch(&ins, out.len());
            out.push(ins);
            done[iu] = true;
            ready.remove(&i);
            for &v in &u[..nu] {
                uses_left[v as usize] -= 1;
            }
            for &v in &dying {
                alloc.free[phys[v as usize] as usize] = true;
                blocks[owner(v)].live -= 1;
                nfree += 1;
            }
            for &r in &taken {
                alloc.free[r as usize] = false;
                nfree -= 1;
                if strategy == RegAllocStrategy::RoundRobin {
                    alloc.rr = (r as usize + 1) % NREGS;
                }
            }
            if a > 0 {
                blocks[b].live += a;
                blocks[b].cursor += 1;
                hi = hi.max(b);
            }
            blocks[b].left -= 1;
            while lo < nblk && blocks[lo].left == 0 {
                lo += 1;
            }
            hi = hi.max(lo.min(nblk - 1));
            for &s in &deps.succ[iu] {
                let s = s as usize;
                deps.npred[s] -= 1;
                if deps.npred[s] == 0 && s != leave {
                    ready.insert(s as u32);
                }
            }
            while next_in_order < n && done[next_in_order] {
                next_in_order += 1;
            }
            issued = true;
            break;
        }
        engine.cycle += 1;
        if !issued {
            match engine.next_change() {
                Some(t) => engine.cycle = engine.cycle.max(t),
                None => return Err(CodegenError::Deadlock),
            }
        }
    }
    Ok(out)
}

/// Lower generated code to instructions, keeping whichever order runs
/// faster.
pub(crate) fn lower(ir: &Ir, cfg: &MachineConfig, strategy: RegAllocStrategy, reorder: bool) -> Result<Vec<Instr>, CodegenError> {
    let plain = list(ir, cfg, strategy, false)?;
    if !reorder {
        return Ok(plain);
    }
    let sched = list(ir, cfg, strategy, true)?;
    Ok(if timing(&sched, cfg) <= timing(&plain, cfg) { sched } else { plain })
}

/// Reorder a program without renaming registers. Dependences cover
/// registers (read/write in every combination) and VDM words, with
/// addresses tracked through ASET. Returns the original when reordering
/// does not help.
pub fn schedule(p: &Program, cfg: &MachineConfig) -> Program {
    let ins = &p.instrs;
    let n = ins.len();
    if n < 3 || ins[0] != Instr::Enter || ins[n - 1] != Instr::Leave {
        return p.clone();
    }
    let mut deps = Deps { npred: vec![0; n], succ: vec![Vec::new(); n] };
    let mut writer = [NONE; RegId::DENSE_COUNT];
    let mut readers: Vec<Vec<u32>> = vec![Vec::new(); RegId::DENSE_COUNT];
    let mut mem = MemDeps::default();
    let mut areg = [0u64; NUM_AREGS as usize];
    for (i, x) in ins.iter().enumerate() {
        let mut preds = Vec::new();
        if i > 0 {
            preds.push(0);
        }
        if i == n - 1 {
            preds.extend(0..i as u32);
        }
        for r in x.reads() {
            let d = r.dense();
            if writer[d] != NONE {
                preds.push(writer[d]);
            }
        }
        for r in x.writes() {
            let d = r.dense();
            if writer[d] != NONE {
                preds.push(writer[d]);
            }
            preds.append(&mut readers[d]);
        }
        for r in x.reads() {
            readers[r.dense()].push(i as u32);
        }
        for r in x.writes() {
            writer[r.dense()] = i as u32;
        }
        match x.mem_access() {
            MemAccess::VdmRead { base, off, stride } | MemAccess::VdmWrite { base, off, stride } => {
                let store = matches!(x.mem_access(), MemAccess::VdmWrite { .. });
                let first = areg[base.index()] + off as u64;
                let ws = (0..VLEN as u64).map(move |k| (first + k * stride as u64) as usize);
                mem.access(i as u32, ws, store, &mut preds);
            }
            _ => {}
        }
        if let Instr::ASet { ad, src, imm, hi } = *x {
            if ad.0 != 0 {
                let shift = if hi { 16 } else { 0 };
                areg[ad.index()] = src.map_or(0, |s| areg[s.index()]) + ((imm as u64) << shift);
            }
        }
        preds.retain(|&q| (q as usize) < i);
        add_edges(&mut deps, i, preds);
    }
    let mut engine = Engine::new(cfg.clone());
    let mut ready: BTreeSet<u32> = BTreeSet::new();
    ready.insert(0);
    let mut order: Vec<Instr> = Vec::with_capacity(n);
    while order.len() < n {
        engine.begin_cycle();
        let mut pick = None;
        for &i in ready.iter().take(WINDOW) {
            if engine.check(&ins[i as usize]).is_ok() {
                pick = Some(i);
                break;
            }
        }
        if let Some(i) = pick {
            let iu = i as usize;
            engine.dispatch(&ins[iu], order.len());
            order.push(ins[iu]);
            ready.remove(&i);
            for &s in &deps.succ[iu] {
                deps.npred[s as usize] -= 1;
                if deps.npred[s as usize] == 0 {
                    ready.insert(s);
                }
            }
        }
        engine.cycle += 1;
        if pick.is_none() {
            match engine.next_change() {
                Some(t) => engine.cycle = engine.cycle.max(t),
                None => {
                    // nothing in flight: the head must be accepted next cycle
                    if ready.is_empty() {
                        return p.clone();
                    }
                }
            }
        }
    }
    if timing(&order, cfg) <= timing(ins, cfg) {
        Program { meta: p.meta.clone(), instrs: order }
    } else {
        p.clone()
    }
}
