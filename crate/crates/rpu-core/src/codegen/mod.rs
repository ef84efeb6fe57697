//! NTT kernel generation.
//!
//! [`plan`] factors the transform into radix-2 stages (Pease or
//! Korn–Lambiotte) and can realise them as dense matrices. [`generate`]
//! lowers a plan onto the machine: a register-level pass plan decides which
//! digits live in lanes, slots and blocks, the emitter produces virtual
//! register code, and a list scheduler assigns registers and orders the
//! three queue classes against the engine's timing.
//!
//! Kernel convention: the forward kernel reads natural order and writes
//! bit-reversed order (`out[i] = X[bitrev(i)]`); the inverse kernel reads
//! bit-reversed order and writes natural order, scaled by `1/n`.

mod emit;
mod layout;
mod plan;
mod ring;
mod sched;
mod verify;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::isa::{Diagnostic, Program};
use crate::sim::{self, MachineConfig, RunResult, SimError};

pub use emit::generate_with;
pub use layout::{chain_spec, trace_indices, DigitState, Move, Pass, PassPlan, PassSpec, LANE_BITS};
pub use plan::{bit_reverse, dft_matrix, plan, Matrix, NttPlan, Stage, StridePerm, Variant};
pub use ring::{ring_kernel, RingKernel, RingOp};
pub use sched::schedule;
pub use verify::{default_params, verify, verify_one, VerifyRow};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CodegenError {
    UnsupportedSize(usize),
    ParamsMismatch,
    BadPlan(&'static str),
    /// Data buffers and twiddle tables do not fit in VDM.
    OutOfMemory { words: usize, available: usize },
    Deadlock,
}

impl fmt::Display for CodegenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodegenError::UnsupportedSize(n) => write!(f, "unsupported NTT size {n}"),
            CodegenError::ParamsMismatch => write!(f, "parameters are for a different size"),
            CodegenError::BadPlan(m) => write!(f, "invalid pass plan: {m}"),
            CodegenError::OutOfMemory { words, available } => {
                write!(f, "kernel needs {words} VDM words, {available} available")
            }
            CodegenError::Deadlock => write!(f, "scheduler made no progress"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CodegenError {}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegAllocStrategy {
    /// Lowest free register.
    #[default]
    Greedy,
    /// Next free register after the last one handed out.
    RoundRobin,
}

impl RegAllocStrategy {
    pub const ALL: [RegAllocStrategy; 2] = [RegAllocStrategy::Greedy, RegAllocStrategy::RoundRobin];

    pub fn name(self) -> &'static str {
        match self {
            RegAllocStrategy::Greedy => "greedy",
            RegAllocStrategy::RoundRobin => "round-robin",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ButterflyStyle {
    /// One VBFLY / VIBFLY per butterfly pair.
    #[default]
    Fused,
    /// VMULMOD then VADDMOD / VSUBMOD, the shape of the SPIRAL listing.
    MulAddSub,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    #[default]
    Forward,
    Inverse,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenOptions {
    pub strategy: RegAllocStrategy,
    pub style: ButterflyStyle,
    pub direction: Direction,
    /// Run the list scheduler; otherwise emit in generation order.
    pub schedule: bool,
}

impl GenOptions {
    pub fn new(strategy: RegAllocStrategy) -> Self {
        GenOptions { strategy, style: ButterflyStyle::Fused, direction: Direction::Forward, schedule: true }
    }
}

/// Twiddle storage of one kernel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwiddleLayout {
    /// Powers are of this root: `psi` (negacyclic) or `omega`, inverted for
    /// the inverse kernel.
    pub root: u128,
    /// First VDM word of the twiddle vectors.
    pub vdm_offset: usize,
    /// Twiddle vectors, 512 words each, stored back to back.
    pub vdm: Vec<u128>,
    pub vdm_exponents: Vec<u64>,
    /// SDM image: word 0 is q, word 1 the inverse-scaling factor, then
    /// broadcast constants.
    pub sdm: Vec<u128>,
    /// Exponent of each SDM word from 2 on.
    pub sdm_exponents: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Kernel {
    pub n: usize,
    pub direction: Direction,
    pub program: Program,
    pub twiddles: TwiddleLayout,
    /// VDM word where the input goes and where the output appears.
    pub input_offset: usize,
    pub output_offset: usize,
    /// Words the data layout occupies (n, or 1024 for small sizes).
    pub buffer_words: usize,
    pub passes: PassPlan,
    #[serde(skip)]
    pub diagnostics: Vec<Diagnostic>,
    pub note: String,
}

impl Kernel {
    /// VDM image with `input` placed and the twiddles after it.
    pub fn vdm_image(&self, input: &[u128]) -> Vec<u128> {
        let tw = &self.twiddles;
        let mut img = alloc::vec![0u128; tw.vdm_offset + tw.vdm.len()];
        img[self.input_offset..self.input_offset + input.len()].copy_from_slice(input);
        img[tw.vdm_offset..].copy_from_slice(&tw.vdm);
        img
    }

    /// Simulate on `input` (length n) and return the output words.
    pub fn run(&self, input: &[u128], cfg: &MachineConfig) -> Result<(Vec<u128>, RunResult), SimError> {
        let (r, st) = sim::run(&self.program, cfg, &self.vdm_image(input), &self.twiddles.sdm)?;
        let out = st.vdm[self.output_offset..self.output_offset + self.n].to_vec();
        Ok((out, r))
    }
}

/// Lower `plan` with the given register allocation strategy.
pub fn generate(plan: &NttPlan, cfg: &MachineConfig, strategy: RegAllocStrategy) -> Result<Kernel, CodegenError> {
    generate_with(plan, cfg, &GenOptions::new(strategy))
}
