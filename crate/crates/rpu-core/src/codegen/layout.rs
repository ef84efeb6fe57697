//! Register-level pass plans.
//!
//! Element indices are written in binary "digits" `0..bits`. In a pass every
//! vector register holds the 512 elements that agree on all digits except
//! the nine lane digits; the register's position within its block is given
//! by the slot digits, and the remaining digits pick the block. A strided
//! load brings nine consecutive address bits into the lanes, so the address
//! layout (address bit -> digit) decides what a register can hold.
//!
//! Within a pass:
//! - `Stage(d)` is a butterfly across the slot holding digit `d`.
//! - `Unpack(b)` interleaves register pairs differing in `b`. The lanes become
//!   `[b, L0..L7]`, and `L8` takes over `b`'s slot.
//! - `Pack(b)` is the inverse direction: the lanes become `[L1..L8, b]`, and
//!   `L0` takes `b`'s slot.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::CodegenError;

pub const LANE_BITS: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Move {
    Stage(u8),
    /// Gentleman–Sande butterfly of an inverse plan.
    IStage(u8),
    Unpack(u8),
    Pack(u8),
}

pub type Lanes = [u8; LANE_BITS];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pass {
    /// Address bit -> digit for the buffer read.
    pub src: Vec<u8>,
    pub src_buf: u8,
    /// Lowest address bit of the load window.
    pub window: u8,
    /// Slot digits at load; slot `i` is bit `i` of the register index.
    pub slots: Vec<u8>,
    pub moves: Vec<Move>,
    pub dst: Vec<u8>,
    pub dst_buf: u8,
    pub store_window: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DigitState {
    pub lanes: Lanes,
    /// Slot digits; at most 8.
    pub slots: [u8; 8],
    pub nslots: u8,
}

impl DigitState {
    pub fn slots(&self) -> &[u8] {
        &self.slots[..self.nslots as usize]
    }

    pub fn slot_of(&self, d: u8) -> Option<usize> {
        self.slots().iter().position(|&s| s == d)
    }

    /// Apply one move to the digit bookkeeping.
    pub fn apply(&mut self, mv: Move) -> Result<(), CodegenError> {
        let bad = || CodegenError::BadPlan("move names a digit outside the slots");
        match mv {
            Move::Stage(d) | Move::IStage(d) => {
                self.slot_of(d).ok_or_else(bad)?;
            }
            Move::Unpack(b) => {
                let s = self.slot_of(b).ok_or_else(bad)?;
                let top = self.lanes[8];
                self.lanes.copy_within(0..8, 1);
                self.lanes[0] = b;
                self.slots[s] = top;
            }
            Move::Pack(b) => {
                let s = self.slot_of(b).ok_or_else(bad)?;
                let bottom = self.lanes[0];
                self.lanes.copy_within(1..9, 0);
                self.lanes[8] = b;
                self.slots[s] = bottom;
            }
        }
        Ok(())
    }
}

impl Pass {
    pub fn start(&self) -> DigitState {
        let w = self.window as usize;
        let mut lanes = [0u8; LANE_BITS];
        lanes.copy_from_slice(&self.src[w..w + LANE_BITS]);
        let mut slots = [0u8; 8];
        slots[..self.slots.len()].copy_from_slice(&self.slots);
        DigitState { lanes, slots, nslots: self.slots.len() as u8 }
    }

    pub fn end(&self) -> Result<DigitState, CodegenError> {
        let mut st = self.start();
        for &m in &self.moves {
            st.apply(m)?;
        }
        Ok(st)
    }

    /// Digits that select the block (neither lanes nor slots).
    pub fn block_digits(&self) -> Vec<u8> {
        let st = self.start();
        let mut e: Vec<u8> = (0..self.src.len() as u8).filter(|d| !st.lanes.contains(d) && st.slot_of(*d).is_none()).collect();
        e.sort_unstable();
        e
    }

    pub fn in_place(&self) -> bool {
        self.src == self.dst && self.src_buf == self.dst_buf
    }
}

/// A complete transform as a sequence of passes over `bits` digits, of which
/// the low `real` are data and the rest padding (zero elements).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassPlan {
    pub bits: u32,
    pub real: u32,
    pub passes: Vec<Pass>,
}

/// Compact description of one pass: load window contents, slot digits,
/// moves. Layouts are derived by [`PassPlan::build`].
#[derive(Clone, Debug)]
pub struct PassSpec {
    pub window: Lanes,
    pub slots: Vec<u8>,
    pub moves: Vec<Move>,
}

fn identity(bits: u32) -> Vec<u8> {
    (0..bits as u8).collect()
}

/// Place `store` at `c` and `load` at `w`, filling the other bits with the
/// leftover digits in ascending order. `None` if the windows disagree.
fn join_layout(bits: usize, store: &Lanes, c: usize, load: &Lanes, w: usize, hint: &[u8]) -> Option<Vec<u8>> {
    let mut lay: Vec<Option<u8>> = vec![None; bits];
    for (j, &d) in store.iter().enumerate() {
        lay[c + j] = Some(d);
    }
    for (j, &d) in load.iter().enumerate() {
        match lay[w + j] {
            Some(x) if x != d => return None,
            _ => lay[w + j] = Some(d),
        }
    }
    let placed: Vec<u8> = lay.iter().flatten().copied().collect();
    let mut seen = vec![false; bits];
    for &d in &placed {
        if seen[d as usize] {
            return None;
        }
        seen[d as usize] = true;
    }
    // keep leftover digits where they were when possible
    for b in 0..bits {
        if lay[b].is_none() && !seen[hint[b] as usize] {
            lay[b] = Some(hint[b]);
            seen[hint[b] as usize] = true;
        }
    }
    let mut rest = (0..bits as u8).filter(|d| !seen[*d as usize]);
    Some(lay.into_iter().map(|x| x.unwrap_or_else(|| rest.next().unwrap())).collect())
}

impl PassPlan {
    /// Derive layouts for a chain of pass specs. The first pass reads the
    /// identity layout; the last must finish with ascending consecutive
    /// lanes, so the result lands in the identity layout too (element `i`
    /// at address `i`).
    pub fn build(bits: u32, real: u32, specs: &[PassSpec]) -> Result<PassPlan, CodegenError> {
        let nb = bits as usize;
        if nb < LANE_BITS || specs.is_empty() {
            return Err(CodegenError::BadPlan("too few digits"));
        }
        let mut passes: Vec<Pass> = Vec::new();
        let mut src = identity(bits);
        let mut buf = 0u8;
        for (p, spec) in specs.iter().enumerate() {
            let window = src
                .windows(LANE_BITS)
                .position(|w| w == spec.window)
                .ok_or(CodegenError::BadPlan("load window is not contiguous in the layout"))?;
            let mut pass = Pass {
                src: src.clone(),
                src_buf: buf,
                window: window as u8,
                slots: spec.slots.clone(),
                moves: spec.moves.clone(),
                dst: Vec::new(),
                dst_buf: buf,
                store_window: 0,
            };
            let end = pass.end()?;
            let (dst, c) = match specs.get(p + 1) {
                Some(next) => {
                    let mut found = None;
                    // prefer writing back where the data came from
                    'outer: for c in core::iter::once(window).chain(0..=nb - LANE_BITS) {
                        for w in 0..=nb - LANE_BITS {
                            if let Some(l) = join_layout(nb, &end.lanes, c, &next.window, w, &src) {
                                found = Some((l, c));
                                break 'outer;
                            }
                        }
                    }
                    found.ok_or(CodegenError::BadPlan("next window cannot be formed"))?
                }
                None => {
                    let c = end.lanes[0] as usize;
                    if (0..LANE_BITS).any(|j| end.lanes[j] as usize != c + j) || c + LANE_BITS > nb {
                        return Err(CodegenError::BadPlan("final lanes are not an identity window"));
                    }
                    (identity(bits), c)
                }
            };
            if dst != src {
                buf ^= 1;
            }
            pass.dst = dst.clone();
            pass.dst_buf = buf;
            pass.store_window = c as u8;
            passes.push(pass);
            src = dst;
        }
        let plan = PassPlan { bits, real, passes };
        plan.check()?;
        Ok(plan)
    }

    /// Every real digit gets exactly one butterfly, highest first.
    pub fn check(&self) -> Result<(), CodegenError> {
        let mut order = Vec::new();
        for p in &self.passes {
            if p.slots.len() > 6 {
                return Err(CodegenError::BadPlan("too many slot digits"));
            }
            for m in &p.moves {
                if let Move::Stage(d) | Move::IStage(d) = *m {
                    if (d as u32) < self.real {
                        order.push(d);
                    }
                }
            }
            p.end()?;
        }
        let forward = self.passes.iter().flat_map(|p| &p.moves).any(|m| matches!(m, Move::Stage(_)));
        let want: Vec<u8> = if forward { (0..self.real as u8).rev().collect() } else { (0..self.real as u8).collect() };
        if order != want {
            return Err(CodegenError::BadPlan("butterfly order must visit each digit once"));
        }
        Ok(())
    }

    pub fn uses_second_buffer(&self) -> bool {
        self.passes.iter().any(|p| p.src_buf == 1 || p.dst_buf == 1)
    }

    pub fn output_buf(&self) -> u8 {
        self.passes.last().map_or(0, |p| p.dst_buf)
    }

    /// The reverse plan: passes and moves in reverse order, each move
    /// undone, butterflies replaced by their Gentleman–Sande form.
    pub fn inverse(&self) -> Result<PassPlan, CodegenError> {
        let mut passes = Vec::new();
        let last_buf = self.output_buf();
        for p in self.passes.iter().rev() {
            let mut st = p.start();
            let mut undo = Vec::new();
            for &m in &p.moves {
                let inv = match m {
                    Move::Stage(d) => Move::IStage(d),
                    Move::IStage(d) => Move::Stage(d),
                    Move::Unpack(_) => Move::Pack(st.lanes[8]),
                    Move::Pack(_) => Move::Unpack(st.lanes[0]),
                };
                st.apply(m)?;
                undo.push(inv);
            }
            undo.reverse();
            // buffers are renamed so the inverse starts where the forward ended
            let rename = |b: u8| if last_buf == 1 { b ^ 1 } else { b };
            passes.push(Pass {
                src: p.dst.clone(),
                src_buf: rename(p.dst_buf),
                window: p.store_window,
                slots: st.slots().to_vec(),
                moves: undo,
                dst: p.src.clone(),
                dst_buf: rename(p.src_buf),
                store_window: p.window,
            });
        }
        let plan = PassPlan { bits: self.bits, real: self.real, passes };
        plan.check()?;
        Ok(plan)
    }
}

/// Single pass over ten or more digits: every slot digit is processed, then
/// the lane digits are ejected from the top one at a time, each replaced by
/// the digit just finished. Ends in the identity layout.
pub fn chain_spec(bits: u32, slots: &[u8], window_lo: u8) -> PassSpec {
    let mut window = [0u8; LANE_BITS];
    for (j, w) in window.iter_mut().enumerate() {
        *w = window_lo + j as u8;
    }
    let mut moves = Vec::new();
    let mut high: Vec<u8> = slots.iter().copied().filter(|&d| d > window_lo + 8).collect();
    high.sort_unstable_by(|a, b| b.cmp(a));
    for &d in &high {
        moves.push(Move::Stage(d));
    }
    let mut last = *high.last().expect("chain needs a slot digit above the lanes");
    for d in (window_lo..window_lo + LANE_BITS as u8).rev() {
        moves.push(Move::Unpack(last));
        moves.push(Move::Stage(d));
        last = d;
    }
    let mut low: Vec<u8> = slots.iter().copied().filter(|&d| d < window_lo).collect();
    low.sort_unstable_by(|a, b| b.cmp(a));
    for &d in &low {
        moves.push(Move::Stage(d));
    }
    let _ = bits;
    PassSpec { window, slots: slots.to_vec(), moves }
}

/// Apply the plan to data at the digit level: element values are moved as
/// the machine would move them, and each butterfly calls `bfly(d, i0, i1)`
/// with the logical indices of the pair. Used by tests to check layouts.
pub fn trace_indices(plan: &PassPlan, mut bfly: impl FnMut(u8, usize, usize)) -> Result<Vec<usize>, CodegenError> {
    let n = 1usize << plan.bits;
    // buffers hold logical indices
    let mut bufs = [(0..n).collect::<Vec<usize>>(), vec![usize::MAX; n]];
    let addr_of = |lay: &[u8], logical: usize| -> usize {
        lay.iter().enumerate().map(|(b, &d)| ((logical >> d) & 1) << b).sum()
    };
    for p in &plan.passes {
        let src = bufs[p.src_buf as usize].clone();
        let mut dst = bufs[p.dst_buf as usize].clone();
        // every element moves with its logical index; check placement
        for logical in 0..n {
            let a = addr_of(&p.src, logical);
            if src[a] != logical {
                return Err(CodegenError::BadPlan("element not where the layout says"));
            }
        }
        let mut st = p.start();
        for &m in &p.moves {
            if let Move::Stage(d) | Move::IStage(d) = m {
                for i in 0..n {
                    if (i >> d) & 1 == 0 {
                        bfly(d, i, i | 1 << d);
                    }
                }
            }
            st.apply(m)?;
        }
        for logical in 0..n {
            dst[addr_of(&p.dst, logical)] = logical;
        }
        // lane digits must sit in the store window in order
        for j in 0..LANE_BITS {
            if p.dst[p.store_window as usize + j] != st.lanes[j] {
                return Err(CodegenError::BadPlan("store window disagrees with lanes"));
            }
        }
        bufs[p.dst_buf as usize] = dst;
    }
    Ok(bufs[plan.output_buf() as usize].clone())
}
