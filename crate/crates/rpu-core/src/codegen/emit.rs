//! Pass plan -> virtual register code.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::layout::{chain_spec, Move, Pass, PassPlan, PassSpec, LANE_BITS};
use super::plan::{NttPlan, Variant};
use super::{sched, ButterflyStyle, CodegenError, Direction, GenOptions, Kernel, TwiddleLayout};
use crate::isa::{validate, AReg, Instr, MReg, Program, SReg, ShufMode, VLEN};
use crate::sim::MachineConfig;

pub(crate) type Val = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum BinKind {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Op {
    Fixed(Instr),
    Load { d: Val, addr: u32, stride: u32 },
    Store { s: Val, addr: u32, stride: u32 },
    /// Broadcast of SDM word `slot`.
    Bcast { d: Val, slot: u16 },
    /// `xo`/`yo` take over the registers of `x`/`y`.
    Bfly { x: Val, y: Val, w: Val, xo: Val, yo: Val, inv: bool },
    Bin { kind: BinKind, d: Val, a: Val, b: Val },
    /// Multiply by the scaling constant in `s1`.
    Scale { d: Val, a: Val },
    Shuf { d: Val, a: Val, b: Val, mode: ShufMode },
}

impl Op {
    pub(crate) fn uses(&self) -> ([Val; 3], usize) {
        match *self {
            Op::Fixed(_) | Op::Load { .. } | Op::Bcast { .. } => ([0; 3], 0),
            Op::Store { s, .. } => ([s, 0, 0], 1),
            Op::Bfly { x, y, w, .. } => ([x, y, w], 3),
            Op::Bin { a, b, .. } | Op::Shuf { a, b, .. } => ([a, b, 0], 2),
            Op::Scale { a, .. } => ([a, 0, 0], 1),
        }
    }

    pub(crate) fn defs(&self) -> ([Val; 2], usize) {
        match *self {
            Op::Fixed(_) | Op::Store { .. } => ([0; 2], 0),
            Op::Bfly { xo, yo, .. } => ([xo, yo], 2),
            Op::Load { d, .. } | Op::Bcast { d, .. } | Op::Bin { d, .. } | Op::Scale { d, .. } | Op::Shuf { d, .. } => {
                ([d, 0], 1)
            }
        }
    }

    /// Definitions that reuse an operand's register.
    pub(crate) fn tied(&self) -> Option<[(Val, Val); 2]> {
        match *self {
            Op::Bfly { x, y, xo, yo, .. } => Some([(xo, x), (yo, y)]),
            _ => None,
        }
    }

    /// `(first word, stride, is_store)` of a VDM access.
    pub(crate) fn vdm(&self) -> Option<(u32, u32, bool)> {
        match *self {
            Op::Load { addr, stride, .. } => Some((addr, stride, false)),
            Op::Store { addr, stride, .. } => Some((addr, stride, true)),
            _ => None,
        }
    }
}

/// Straight-line virtual code. Ops of one block are contiguous; block 0 is
/// the prologue.
#[derive(Clone, Debug, Default)]
pub(crate) struct Ir {
    pub ops: Vec<Op>,
    pub block: Vec<u32>,
    pub nvals: u32,
}

pub const RESIDENT_MAX: usize = 16;

fn addr_of(layout: &[u8], logical: u64) -> u64 {
    layout.iter().enumerate().map(|(b, &d)| ((logical >> d) & 1) << b).sum()
}

/// Register-level plan for `2^real` points.
pub fn pass_plan(real: u32) -> Result<PassPlan, CodegenError> {
    let bits = real.max(10);
    if real <= 13 {
        let slots: Vec<u8> = (9..bits as u8).collect();
        return PassPlan::build(bits, real, &[chain_spec(bits, &slots, 0)]);
    }
    PassPlan::build(bits, real, &multi_pass_specs(real))
}

fn win(lo: u8) -> [u8; LANE_BITS] {
    core::array::from_fn(|j| lo + j as u8)
}

/// Passes for 2^14 .. 2^16 points, in blocks of at most 16 registers.
/// The first pass puts the top four digits in slots over lanes
/// `lo..lo+8`, then five unpack rounds finish the top lane digits; it ends
/// with the nine finished digits ascending in the lanes. Later passes keep
/// those lanes and take the remaining digits four at a time.
fn multi_pass_specs(k: u32) -> Vec<PassSpec> {
    let k = k as u8;
    let lo = k - 13;
    let top: Vec<u8> = (lo + 9..k).rev().collect();
    let mut moves: Vec<Move> = top.iter().map(|&d| Move::Stage(d)).collect();
    let mut ejected = top.clone();
    for i in 0..5u8 {
        moves.push(Move::Unpack(ejected[i as usize]));
        moves.push(Move::Stage(lo + 8 - i));
        ejected.push(lo + 8 - i);
    }
    let mut specs = vec![PassSpec { window: win(lo), slots: top, moves }];
    let mut left: Vec<u8> = (0..lo + 4).rev().collect();
    while !left.is_empty() {
        let take = if left.len() <= 5 { left.len() } else { 4 };
        let slots: Vec<u8> = left.drain(..take).collect();
        let moves = slots.iter().map(|&d| Move::Stage(d)).collect();
        specs.push(PassSpec { window: win(k - 9), slots, moves });
    }
    specs
}

struct Emitter {
    ir: Ir,
    k: u32,
    bits: u32,
    forward: bool,
    nega: bool,
    style: ButterflyStyle,
    variant: Variant,
    sdm_exp: Vec<u64>,
    sdm_map: BTreeMap<u64, u16>,
    tw: Vec<Vec<u64>>,
    tw_map: BTreeMap<Vec<u64>, usize>,
    tw_base: u64,
    block: u32,
}

impl Emitter {
    fn val(&mut self) -> Val {
        self.ir.nvals += 1;
        self.ir.nvals - 1
    }

    fn op(&mut self, op: Op) {
        self.ir.ops.push(op);
        self.ir.block.push(self.block);
    }

    fn load(&mut self, addr: u64, stride: u64) -> Val {
        let d = self.val();
        self.op(Op::Load { d, addr: addr as u32, stride: stride as u32 });
        d
    }

    /// Weight of digit `dd` in the twiddle exponent of a stage on `d`.
    fn coef(&self, d: u8, dd: u8) -> u64 {
        if dd > d && (dd as u32) < self.k {
            1u64 << (self.k - 1 - dd as u32 + d as u32)
        } else {
            0
        }
    }

    fn expo(&self, d: u8, raw: u64) -> u64 {
        let n = 1u64 << self.k;
        if self.nega {
            (2 * raw + (1 << d)) % (2 * n)
        } else {
            raw % n
        }
    }

    fn lane_exps(&self, d: u8, lanes: &[u8; LANE_BITS]) -> Vec<u64> {
        (0..VLEN as u64)
            .map(|j| (0..LANE_BITS).map(|t| ((j >> t) & 1) * self.coef(d, lanes[t])).sum())
            .collect()
    }

    /// Twiddle for a stage with constant part `rest`.
    fn twiddle(&mut self, d: u8, lane: &[u64], rest: u64) -> Val {
        let v = self.val();
        if lane.iter().all(|&x| x == 0) {
            let e = self.expo(d, rest);
            let next = self.sdm_exp.len() as u16 + 2;
            let slot = *self.sdm_map.entry(e).or_insert(next);
            if slot == next {
                self.sdm_exp.push(e);
            }
            self.op(Op::Bcast { d: v, slot });
        } else {
            let exps: Vec<u64> = lane.iter().map(|&x| self.expo(d, x + rest)).collect();
            let next = self.tw.len();
            let idx = *self.tw_map.entry(exps.clone()).or_insert(next);
            if idx == next {
                self.tw.push(exps);
            }
            let addr = self.tw_base + (idx * VLEN) as u64;
            self.op(Op::Load { d: v, addr: addr as u32, stride: 1 });
        }
        v
    }

    fn bfly(&mut self, x: Val, y: Val, w: Val) -> (Val, Val) {
        match self.style {
            ButterflyStyle::Fused => {
                let (xo, yo) = (self.val(), self.val());
                self.op(Op::Bfly { x, y, w, xo, yo, inv: !self.forward });
                (xo, yo)
            }
            ButterflyStyle::MulAddSub if self.forward => {
                let (t, xo, yo) = (self.val(), self.val(), self.val());
                self.op(Op::Bin { kind: BinKind::Mul, d: t, a: y, b: w });
                self.op(Op::Bin { kind: BinKind::Add, d: xo, a: x, b: t });
                self.op(Op::Bin { kind: BinKind::Sub, d: yo, a: x, b: t });
                (xo, yo)
            }
            ButterflyStyle::MulAddSub => {
                let (s, t, yo) = (self.val(), self.val(), self.val());
                self.op(Op::Bin { kind: BinKind::Add, d: s, a: x, b: y });
                self.op(Op::Bin { kind: BinKind::Sub, d: t, a: x, b: y });
                self.op(Op::Bin { kind: BinKind::Mul, d: yo, a: t, b: w });
                (s, yo)
            }
        }
    }

    fn buf_base(&self, b: u8) -> u64 {
        (b as u64) << self.bits
    }

    /// Twiddles that are the same in every block of the pass.
    fn residents(&mut self, p: &Pass, edig: &[u8]) -> BTreeMap<(usize, u64), Val> {
        let mut want: Vec<(usize, u8, u64, [u8; LANE_BITS])> = Vec::new();
        let mut st = p.start();
        for (mi, &mv) in p.moves.iter().enumerate() {
            if let Move::Stage(d) | Move::IStage(d) = mv {
                if (d as u32) < self.k && edig.iter().all(|&e| self.coef(d, e) == 0) {
                    let s = st.slot_of(d).unwrap();
                    for r in 0..1u64 << st.nslots {
                        if (r >> s) & 1 == 0 {
                            let rest = self.slot_part(d, st.slots(), r);
                            if !want.iter().any(|w| w.0 == mi && w.2 == rest) {
                                want.push((mi, d, rest, st.lanes));
                            }
                        }
                    }
                }
            }
            st.apply(mv).unwrap();
        }
        let mut out = BTreeMap::new();
        if want.len() > RESIDENT_MAX {
            return out;
        }
        for (mi, d, rest, lanes) in want {
            let lane = self.lane_exps(d, &lanes);
            let v = self.twiddle(d, &lane, rest);
            out.insert((mi, rest), v);
        }
        out
    }

    fn slot_part(&self, d: u8, slots: &[u8], r: u64) -> u64 {
        slots.iter().enumerate().map(|(i, &sd)| ((r >> i) & 1) * self.coef(d, sd)).sum()
    }

    fn pass(&mut self, p: &Pass, last: bool) {
        let st0 = p.start();
        let edig = p.block_digits();
        let nregs = 1usize << st0.nslots;
        self.block += 1;
        let resident = if !edig.is_empty() { self.residents(p, &edig) } else { BTreeMap::new() };
        for blk in 0..1u64 << edig.len() {
            self.block += 1;
            let bl: u64 = edig.iter().enumerate().map(|(i, &e)| ((blk >> i) & 1) << e).sum();
            let block_part = |em: &Self, d: u8| -> u64 {
                edig.iter().enumerate().map(|(i, &e)| ((blk >> i) & 1) * em.coef(d, e)).sum()
            };
            let reg_logical = |slots: &[u8], r: usize| -> u64 {
                bl + slots.iter().enumerate().map(|(i, &sd)| ((r as u64 >> i) & 1) << sd).sum::<u64>()
            };
            let src = self.buf_base(p.src_buf);
            let mut cur: Vec<Val> = (0..nregs)
                .map(|r| self.load(src + addr_of(&p.src, reg_logical(st0.slots(), r)), 1 << p.window))
                .collect();
            let mut st = st0;
            let mut local: BTreeMap<(usize, u64), Val> = BTreeMap::new();
            let mut i = 0;
            while i < p.moves.len() {
                match p.moves[i] {
                    Move::Stage(_) | Move::IStage(_) => {
                        let mut j = i;
                        while j < p.moves.len() && matches!(p.moves[j], Move::Stage(_) | Move::IStage(_)) {
                            j += 1;
                        }
                        let run: Vec<(usize, u8)> = (i..j)
                            .filter_map(|mi| match p.moves[mi] {
                                Move::Stage(d) | Move::IStage(d) if (d as u32) < self.k => Some((mi, d)),
                                _ => None,
                            })
                            .collect();
                        // Pease: one stage at a time over all registers.
                        // Korn–Lambiotte: stages two at a time, both on one
                        // four-register sub-cube before the next.
                        let chunk = match self.variant {
                            Variant::Pease => 1,
                            Variant::KornLambiotte => 2,
                        };
                        for part in run.chunks(chunk) {
                            let smask: usize = part.iter().map(|&(_, d)| 1usize << st.slot_of(d).unwrap()).sum();
                            let groups: Vec<usize> = (0..nregs).filter(|g| g & smask == 0).collect();
                            let gmask = if chunk == 1 { usize::MAX } else { smask };
                            let groups = if chunk == 1 { vec![0] } else { groups };
                            let lanes: Vec<Vec<u64>> = part.iter().map(|&(_, d)| self.lane_exps(d, &st.lanes)).collect();
                            for &g in &groups {
                                for (ri, &(mi, d)) in part.iter().enumerate() {
                                    let s = st.slot_of(d).unwrap();
                                    for r in 0..nregs {
                                        if (r >> s) & 1 != 0 || (r & !gmask) != g {
                                            continue;
                                        }
                                        let rest = self.slot_part(d, st.slots(), r as u64) + block_part(self, d);
                                        let w = match resident.get(&(mi, rest)).or(local.get(&(mi, rest))) {
                                            Some(&w) => w,
                                            None => {
                                                let w = self.twiddle(d, &lanes[ri], rest);
                                                local.insert((mi, rest), w);
                                                w
                                            }
                                        };
                                        let r1 = r | 1 << s;
                                        let (x, y) = self.bfly(cur[r], cur[r1], w);
                                        cur[r] = x;
                                        cur[r1] = y;
                                    }
                                }
                            }
                        }
                        i = j;
                    }
                    mv @ (Move::Unpack(b) | Move::Pack(b)) => {
                        let s = st.slot_of(b).unwrap();
                        let (m0, m1) = match mv {
                            Move::Unpack(_) => (ShufMode::UnpackLo, ShufMode::UnpackHi),
                            _ => (ShufMode::PackEven, ShufMode::PackOdd),
                        };
                        for r in 0..nregs {
                            if (r >> s) & 1 == 0 {
                                let r1 = r | 1 << s;
                                let (a, b) = (cur[r], cur[r1]);
                                let (lo, hi) = (self.val(), self.val());
                                self.op(Op::Shuf { d: lo, a, b, mode: m0 });
                                self.op(Op::Shuf { d: hi, a, b, mode: m1 });
                                cur[r] = lo;
                                cur[r1] = hi;
                            }
                        }
                        st.apply(mv).unwrap();
                        i += 1;
                    }
                }
            }
            let dst = self.buf_base(p.dst_buf);
            for (r, v) in cur.into_iter().enumerate() {
                let v = if last && !self.forward {
                    let d = self.val();
                    self.op(Op::Scale { d, a: v });
                    d
                } else {
                    v
                };
                let addr = dst + addr_of(&p.dst, reg_logical(st.slots(), r));
                self.op(Op::Store { s: v, addr: addr as u32, stride: 1 << p.store_window });
            }
        }
    }
}

pub(crate) struct Emitted {
    pub ir: Ir,
    pub twiddles: TwiddleLayout,
    pub passes: PassPlan,
    pub output_offset: usize,
    pub buffer_words: usize,
    pub vdm_words: usize,
}

pub(crate) fn emit(plan: &NttPlan, style: ButterflyStyle, dir: Direction) -> Result<Emitted, CodegenError> {
    let k = plan.n.trailing_zeros();
    let fwd = pass_plan(k)?;
    let passes = match dir {
        Direction::Forward => fwd,
        Direction::Inverse => fwd.inverse()?,
    };
    let p = &plan.params;
    let m = &p.modulus;
    let forward = dir == Direction::Forward;
    let nega = p.psi.is_some();
    let root = match (forward, p.psi, p.psi_inv) {
        (true, Some(psi), _) => psi,
        (false, _, Some(pi)) => pi,
        (true, None, _) => p.omega,
        (false, _, None) => p.omega_inv,
    };
    let bits = passes.bits;
    let buffer_words = 1usize << bits;
    let nbuf = if passes.uses_second_buffer() { 2 } else { 1 };
    let mut em = Emitter {
        ir: Ir::default(),
        k,
        bits,
        forward,
        nega,
        style,
        variant: plan.variant,
        sdm_exp: Vec::new(),
        sdm_map: BTreeMap::new(),
        tw: Vec::new(),
        tw_map: BTreeMap::new(),
        tw_base: (nbuf * buffer_words) as u64,
        block: 0,
    };
    let vdm_words = em.tw_base as usize;
    // prologue; ASETs for the high segments are added once sizes are known
    em.op(Op::Fixed(Instr::Enter));
    let np = passes.passes.len();
    for (i, ps) in passes.passes.iter().enumerate() {
        em.pass(ps, i + 1 == np);
    }
    let total = vdm_words + em.tw.len() * VLEN;
    let segs = total.div_ceil(1 << 16);
    let mut pro = vec![Instr::Enter];
    for a in 1..segs.min(4) {
        pro.push(Instr::ASet { ad: AReg(a as u8), src: None, imm: a as u16, hi: true });
    }
    pro.push(Instr::SLoad { sd: SReg(0), base: AReg(0), off: 0 });
    pro.push(Instr::MSet { m: MReg(1), s: SReg(0) });
    if !forward {
        pro.push(Instr::SLoad { sd: SReg(1), base: AReg(0), off: 1 });
    }
    let mut ops: Vec<Op> = pro.into_iter().map(Op::Fixed).collect();
    let mut block = vec![0; ops.len()];
    ops.extend_from_slice(&em.ir.ops[1..]);
    block.extend_from_slice(&em.ir.block[1..]);
    ops.push(Op::Fixed(Instr::Leave));
    block.push(em.block + 1);
    let ir = Ir { ops, block, nvals: em.ir.nvals };

    let mut sdm = vec![m.q(), if forward { 1 } else { p.n_inv }];
    sdm.extend(em.sdm_exp.iter().map(|&e| m.pow(root, e as u128)));
    let mut vdm = Vec::with_capacity(em.tw.len() * VLEN);
    for v in &em.tw {
        vdm.extend(v.iter().map(|&e| m.pow(root, e as u128)));
    }
    let twiddles = TwiddleLayout {
        root,
        vdm_offset: vdm_words,
        vdm,
        vdm_exponents: em.tw.concat(),
        sdm,
        sdm_exponents: em.sdm_exp,
    };
    let output_offset = passes.output_buf() as usize * buffer_words;
    Ok(Emitted { ir, twiddles, passes, output_offset, buffer_words, vdm_words: total })
}

/// Generate a kernel with explicit options.
pub fn generate_with(plan: &NttPlan, cfg: &MachineConfig, opts: &GenOptions) -> Result<Kernel, CodegenError> {
    let e = emit(plan, opts.style, opts.direction)?;
    if e.vdm_words > cfg.vdm_words() {
        return Err(CodegenError::OutOfMemory { words: e.vdm_words, available: cfg.vdm_words() });
    }
    if e.twiddles.sdm.len() > cfg.sdm_words() {
        return Err(CodegenError::OutOfMemory { words: e.twiddles.sdm.len(), available: cfg.sdm_words() });
    }
    let instrs = sched::lower(&e.ir, cfg, opts.strategy, opts.schedule)?;
    let dir = match opts.direction {
        Direction::Forward => "fwd",
        Direction::Inverse => "inv",
    };
    let program = Program::new(&format!("_ntt{}_{}_{}", plan.n, plan.variant.name(), dir), instrs);
    let diagnostics = validate(&program, cfg);
    let note = format!(
        "{} pass(es), {} twiddle vectors, {} broadcast constants",
        e.passes.passes.len(),
        e.twiddles.vdm.len() / VLEN,
        e.twiddles.sdm_exponents.len()
    );
    Ok(Kernel {
        n: plan.n,
        direction: opts.direction,
        program,
        input_offset: 0,
        output_offset: e.output_offset,
        buffer_words: e.buffer_words,
        twiddles: e.twiddles,
        passes: e.passes,
        diagnostics,
        note,
    })
}
