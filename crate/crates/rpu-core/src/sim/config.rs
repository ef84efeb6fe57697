use serde::{Deserialize, Serialize};

use crate::isa::VLEN;

/// Register-file organisation: one register per memory, or four stacked
/// registers sharing a single-port memory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum VrfMode {
    #[default]
    Model1,
    Model2,
}

/// Pipeline depths in cycles, counted after the last issue cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Latencies {
    pub mul_depth: u32,
    pub add_depth: u32,
    pub vdm_latency: u32,
    pub sbar_latency: u32,
    pub scalar_latency: u32,
}

impl Default for Latencies {
    fn default() -> Self {
        Latencies { mul_depth: 12, add_depth: 2, vdm_latency: 4, sbar_latency: 2, scalar_latency: 1 }
    }
}

/// Parameters of one tile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MachineConfig {
    pub num_hples: u32,
    pub vrf_mode: VrfMode,
    pub vdm_bytes: u64,
    pub vdm_banks: u32,
    /// Elements each VDM bank delivers per cycle.
    pub vdm_bank_width: u32,
    pub sdm_bytes: u64,
    pub latency: Latencies,
    pub queue_depth: u32,
    pub clock_ghz: f64,
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            num_hples: 32,
            vrf_mode: VrfMode::Model1,
            vdm_bytes: 4 << 20,
            vdm_banks: 16,
            vdm_bank_width: 2,
            sdm_bytes: 32 << 10,
            latency: Latencies::default(),
            queue_depth: 16,
            clock_ghz: 2.0,
        }
    }
}

pub const WORD_BYTES: u64 = 16;
pub const MAX_VDM_BYTES: u64 = 32 << 20;

impl MachineConfig {
    pub fn model2() -> Self {
        MachineConfig { vrf_mode: VrfMode::Model2, ..Default::default() }
    }

    pub fn vdm_words(&self) -> usize {
        (self.vdm_bytes / WORD_BYTES) as usize
    }

    pub fn sdm_words(&self) -> usize {
        (self.sdm_bytes / WORD_BYTES) as usize
    }

    pub fn regs_per_memory(&self) -> u8 {
        match self.vrf_mode {
            VrfMode::Model1 => 1,
            VrfMode::Model2 => 4,
        }
    }

    /// Issue cycles of one vector op on the lanes.
    pub fn vector_occupancy(&self) -> u32 {
        VLEN as u32 / self.num_hples
    }

    /// Issue cycles of one vector memory access. Elements are interleaved
    /// across banks by lane index, so every stride sees the same bandwidth.
    pub fn vdm_occupancy(&self) -> u32 {
        let per_cycle = self.num_hples.min(self.vdm_banks * self.vdm_bank_width).max(1);
        (VLEN as u32).div_ceil(per_cycle)
    }

    pub fn check(&self) -> Result<(), &'static str> {
        if self.num_hples == 0 || !(VLEN as u32).is_multiple_of(self.num_hples) {
            return Err("num_hples must divide 512");
        }
        if self.vdm_bytes == 0 || !self.vdm_bytes.is_multiple_of(WORD_BYTES) || !(self.vdm_bytes / WORD_BYTES).is_power_of_two() {
            return Err("vdm_bytes must be a power-of-two multiple of 16");
        }
        if self.vdm_bytes > MAX_VDM_BYTES {
            return Err("vdm_bytes above 32 MiB");
        }
        if self.sdm_bytes == 0 || !self.sdm_bytes.is_multiple_of(WORD_BYTES) {
            return Err("sdm_bytes must be a multiple of 16");
        }
        if self.vdm_banks == 0 || self.vdm_bank_width == 0 {
            return Err("vdm banks and width must be nonzero");
        }
        if self.queue_depth == 0 {
            return Err("queue_depth must be nonzero");
        }
        if !(self.clock_ghz > 0.0) {
            return Err("clock_ghz must be positive");
        }
        Ok(())
    }
}
