//! Chip-level performance model.
//!
//! Per-kernel latencies (published constants or simulator measurements) are
//! combined with per-iteration operation counts of a workload, spread over
//! the tiles of a chip, and derated by the chip I/O interface. Ring
//! multiplies are throttled to the time needed to move their tower data
//! through the interface; NTTs are never derated.

mod calibrate;
mod kernels;
mod tables;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub use calibrate::{calibrate, residuals, Calibration, CalibrationError, Residual, DERATE_TOLERANCE_PTS, IDEAL_TOLERANCE};
pub use kernels::{measure_kernels, KernelRow};
pub use tables::{published_speedups, speedup_table, CpuLatencies, SpeedupRow, Table1Row, TABLE1};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RpuConfigName {
    Model1,
    Model2,
    Phase2,
}

impl RpuConfigName {
    pub const ALL: [RpuConfigName; 3] = [RpuConfigName::Model1, RpuConfigName::Model2, RpuConfigName::Phase2];

    pub fn label(self) -> &'static str {
        match self {
            RpuConfigName::Model1 => "RPU Model 1",
            RpuConfigName::Model2 => "RPU Model 2",
            RpuConfigName::Phase2 => "RPU Phase2",
        }
    }
}

impl fmt::Display for RpuConfigName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One chip: tile count, clock and 64k-point kernel latencies of a tile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChipModel {
    pub name: RpuConfigName,
    pub tiles: u32,
    pub clock_ghz: f64,
    pub ring_add_us: f64,
    pub ring_mult_us: f64,
    pub ntt_us: f64,
}

impl ChipModel {
    pub fn published(name: RpuConfigName) -> Self {
        let (tiles, ntt_us) = match name {
            RpuConfigName::Model1 => (10, 9.15),
            RpuConfigName::Model2 => (14, 12.3),
            RpuConfigName::Phase2 => (14, 8.0),
        };
        ChipModel { name, tiles, clock_ghz: 2.0, ring_add_us: 1.73, ring_mult_us: 1.73, ntt_us }
    }

    pub fn published_all() -> Vec<ChipModel> {
        RpuConfigName::ALL.iter().map(|&c| ChipModel::published(c)).collect()
    }

    /// Replace the kernel latencies with simulated cycle counts.
    pub fn with_cycles(mut self, ring_add: u64, ring_mult: u64, ntt: u64) -> Self {
        let us = |c: u64| c as f64 / (self.clock_ghz * 1e3);
        self.ring_add_us = us(ring_add);
        self.ring_mult_us = us(ring_mult);
        self.ntt_us = us(ntt);
        self
    }

    /// Tiles left for compute with this interface; two HBM2 stacks cost one.
    pub fn effective_tiles(&self, io: &IoModel) -> u32 {
        match io.kind {
            IoKind::Hbm2x2 => self.tiles.saturating_sub(1).max(1),
            _ => self.tiles,
        }
    }

    pub fn check(&self) -> Result<(), &'static str> {
        if self.tiles == 0 {
            return Err("a chip needs at least one tile");
        }
        if !(self.clock_ghz > 0.0) {
            return Err("clock must be positive");
        }
        if [self.ring_add_us, self.ring_mult_us, self.ntt_us].iter().any(|&t| !(t >= 0.0)) {
            return Err("kernel latencies must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IoKind {
    Ideal,
    Lvds2k,
    Hbm2x1,
    Hbm2x2,
}

impl IoKind {
    pub const ALL: [IoKind; 4] = [IoKind::Ideal, IoKind::Lvds2k, IoKind::Hbm2x1, IoKind::Hbm2x2];

    pub fn label(self) -> &'static str {
        match self {
            IoKind::Ideal => "Ideal",
            IoKind::Lvds2k => "LVDS2k",
            IoKind::Hbm2x1 => "1xHBM2",
            IoKind::Hbm2x2 => "2xHBM2",
        }
    }
}

/// Chip I/O interface. `None` bandwidth is the ideal data model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IoModel {
    pub kind: IoKind,
    pub bandwidth_gbps: Option<f64>,
}

/// LVDS at DDR over 2k pins.
pub const LVDS_DDR_GBPS: f64 = 250.0;
pub const LVDS_SDR_GBPS: f64 = 62.5;
pub const HBM2_GBPS: f64 = 460.8;

impl IoModel {
    pub fn ideal() -> Self {
        IoModel { kind: IoKind::Ideal, bandwidth_gbps: None }
    }

    /// LVDS between the SDR and DDR rates.
    pub fn lvds(gbps: f64) -> Self {
        IoModel { kind: IoKind::Lvds2k, bandwidth_gbps: Some(gbps) }
    }

    pub fn hbm2(stacks: u32) -> Self {
        let kind = if stacks >= 2 { IoKind::Hbm2x2 } else { IoKind::Hbm2x1 };
        IoModel { kind, bandwidth_gbps: Some(HBM2_GBPS * stacks.max(1) as f64) }
    }

    pub fn of(kind: IoKind) -> Self {
        match kind {
            IoKind::Ideal => IoModel::ideal(),
            IoKind::Lvds2k => IoModel::lvds(LVDS_DDR_GBPS),
            IoKind::Hbm2x1 => IoModel::hbm2(1),
            IoKind::Hbm2x2 => IoModel::hbm2(2),
        }
    }

    pub fn published_all() -> Vec<IoModel> {
        IoKind::ALL.iter().map(|&k| IoModel::of(k)).collect()
    }

    /// Microseconds to move `bytes` through the interface.
    pub fn transfer_us(&self, bytes: f64) -> f64 {
        self.bandwidth_gbps.map_or(0.0, |bw| bytes / (bw * 1e3))
    }
}

/// Ring multiply latency throttled to the time to move one tower of `n`
/// words of `word_bytes`.
pub fn derate_ring_mult(latency_us: f64, io: &IoModel, n: usize, word_bytes: usize) -> f64 {
    latency_us.max(io.transfer_us((n * word_bytes) as f64))
}

/// Tower-level operation counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OpCounts {
    pub ring_add: f64,
    pub ring_mult: f64,
    pub ntt: f64,
}

impl OpCounts {
    pub fn new(ring_add: f64, ring_mult: f64, ntt: f64) -> Self {
        OpCounts { ring_add, ring_mult, ntt }
    }

    pub fn scale(self, k: f64) -> Self {
        OpCounts::new(self.ring_add * k, self.ring_mult * k, self.ntt * k)
    }

    pub fn add(self, o: OpCounts) -> Self {
        OpCounts::new(self.ring_add + o.ring_add, self.ring_mult + o.ring_mult, self.ntt + o.ntt)
    }

    pub fn as_array(self) -> [f64; 3] {
        [self.ring_add, self.ring_mult, self.ntt]
    }

    fn non_negative(self) -> bool {
        self.as_array().iter().all(|&x| x >= 0.0)
    }
}

/// Key and modulus switches one functional bootstrap performs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchCounts {
    pub keyswitch: f64,
    pub modswitch: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CountSource {
    /// Base-op counts missing; estimates are not produced.
    Uncalibrated,
    /// Counts fitted against published iteration times.
    Calibrated,
    UserSupplied,
}

/// Logistic-regression style workload: direct base-op counts for the
/// non-bootstrap path plus functional bootstraps expanded through key and
/// modulus switches into base ops at the bootstrap tower count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub n: usize,
    pub slots: usize,
    pub towers_normal: u32,
    pub towers_bootstrap: u32,
    pub bootstrap_sign: u32,
    pub bootstrap_rescale: u32,
    pub sign_expansion: SwitchCounts,
    pub rescale_expansion: SwitchCounts,
    /// Base ops of one modulus switch on one tower.
    pub modswitch_ops: OpCounts,
    /// Base ops of one key switch on one tower.
    pub keyswitch_ops: Option<OpCounts>,
    /// Base ops of one iteration without bootstrapping.
    pub base_ops: Option<OpCounts>,
    /// Tower vectors moved through chip I/O per ring multiply.
    pub vectors_per_ring_mult: f64,
    pub word_bytes: usize,
    pub source: CountSource,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            n: 1 << 16,
            slots: 64,
            towers_normal: 3,
            towers_bootstrap: 30,
            bootstrap_sign: 33,
            bootstrap_rescale: 18,
            sign_expansion: SwitchCounts { keyswitch: 4.0, modswitch: 2.0 },
            rescale_expansion: SwitchCounts { keyswitch: 2.0, modswitch: 1.0 },
            modswitch_ops: OpCounts::new(1.0, 1.0, 2.0),
            keyswitch_ops: None,
            base_ops: None,
            vectors_per_ring_mult: 1.0,
            word_bytes: 16,
            source: CountSource::Uncalibrated,
        }
    }
}

impl WorkloadSpec {
    /// Key and modulus switches of all bootstraps in one iteration.
    pub fn switches(&self) -> SwitchCounts {
        let (s, r) = (self.bootstrap_sign as f64, self.bootstrap_rescale as f64);
        SwitchCounts {
            keyswitch: s * self.sign_expansion.keyswitch + r * self.rescale_expansion.keyswitch,
            modswitch: s * self.sign_expansion.modswitch + r * self.rescale_expansion.modswitch,
        }
    }

    /// Base ops the bootstraps of one iteration add.
    pub fn bootstrap_ops(&self) -> Option<OpCounts> {
        let ks = self.keyswitch_ops?;
        let sw = self.switches();
        let t = self.towers_bootstrap as f64;
        Some(ks.scale(sw.keyswitch * t).add(self.modswitch_ops.scale(sw.modswitch * t)))
    }

    pub fn with_bootstrap_ops(&self) -> Option<OpCounts> {
        Some(self.base_ops?.add(self.bootstrap_ops()?))
    }

    fn tower_bytes(&self) -> f64 {
        (self.n * self.word_bytes) as f64 * self.vectors_per_ring_mult
    }

    /// An all-zero workload.
    pub fn empty() -> Self {
        WorkloadSpec {
            bootstrap_sign: 0,
            bootstrap_rescale: 0,
            keyswitch_ops: Some(OpCounts::default()),
            base_ops: Some(OpCounts::default()),
            source: CountSource::UserSupplied,
            ..WorkloadSpec::default()
        }
    }
}

/// Seconds for `ops` spread evenly over the chip's tiles.
pub fn time_s(ops: OpCounts, chip: &ChipModel, io: &IoModel, w: &WorkloadSpec) -> f64 {
    let rm = chip.ring_mult_us.max(io.transfer_us(w.tower_bytes()));
    let us = ops.ring_add * chip.ring_add_us + ops.ring_mult * rm + ops.ntt * chip.ntt_us;
    us / chip.effective_tiles(io) as f64 / 1e6
}

/// Per-op latencies after derating, in the order add, mult, NTT, divided by
/// the effective tile count and scaled to seconds.
pub(crate) fn coefficients(chip: &ChipModel, io: &IoModel, w: &WorkloadSpec) -> [f64; 3] {
    let one = |k: usize| {
        let mut a = [0.0; 3];
        a[k] = 1.0;
        time_s(OpCounts::new(a[0], a[1], a[2]), chip, io, w)
    };
    [one(0), one(1), one(2)]
}

/// Percent slow-down of `t` relative to `ideal`, rounded half away from zero.
pub fn derate_pct(t: f64, ideal: f64) -> i64 {
    if ideal == 0.0 {
        return 0;
    }
    round((t - ideal) / ideal * 100.0)
}

pub(crate) fn round(x: f64) -> i64 {
    if x >= 0.0 {
        (x + 0.5) as i64
    } else {
        -((-x + 0.5) as i64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub config: RpuConfigName,
    pub io: IoKind,
    pub time_no_bs_s: Option<f64>,
    pub derate_no_bs_pct: Option<i64>,
    pub time_with_bs_s: Option<f64>,
    pub derate_with_bs_pct: Option<i64>,
    pub source: CountSource,
}

/// One row; derates need the ideal row and are filled in by [`estimate_table`].
pub fn estimate(w: &WorkloadSpec, chip: &ChipModel, io: &IoModel) -> EstimateRow {
    let t = |ops: Option<OpCounts>| ops.map(|o| time_s(o, chip, io, w));
    let ok = w.source != CountSource::Uncalibrated;
    EstimateRow {
        config: chip.name,
        io: io.kind,
        time_no_bs_s: if ok { t(w.base_ops) } else { None },
        derate_no_bs_pct: None,
        time_with_bs_s: if ok { t(w.with_bootstrap_ops()) } else { None },
        derate_with_bs_pct: None,
        source: if ok && w.base_ops.is_some() { w.source } else { CountSource::Uncalibrated },
    }
}

/// Every chip under every interface, ordered by interface then chip.
pub fn estimate_table(w: &WorkloadSpec, chips: &[ChipModel], ios: &[IoModel]) -> Vec<EstimateRow> {
    let mut out = Vec::new();
    for io in ios {
        for chip in chips {
            let mut r = estimate(w, chip, io);
            let ideal = estimate(w, chip, &IoModel::ideal());
            let d = |a: Option<f64>, b: Option<f64>| Some(derate_pct(a?, b?));
            r.derate_no_bs_pct = d(r.time_no_bs_s, ideal.time_no_bs_s);
            r.derate_with_bs_pct = d(r.time_with_bs_s, ideal.time_with_bs_s);
            out.push(r);
        }
    }
    out
}

/// Markdown rendering of an estimate table.
pub fn estimate_markdown(rows: &[EstimateRow]) -> String {
    use core::fmt::Write;
    let mut s = String::from(
        "| Configuration | I/O model | no BS (s) | derate | w/BS (s) | derate |\n|---|---|---|---|---|---|\n",
    );
    let t = |x: Option<f64>| x.map_or(String::from("uncalibrated"), |v| alloc::format!("{v:.3}"));
    let p = |x: Option<i64>, io: IoKind| match (x, io) {
        (_, IoKind::Ideal) => String::new(),
        (Some(d), _) => alloc::format!("{d}%"),
        (None, _) => String::from("-"),
    };
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} |",
            r.config,
            r.io.label(),
            t(r.time_no_bs_s),
            p(r.derate_no_bs_pct, r.io),
            t(r.time_with_bs_s),
            p(r.derate_with_bs_pct, r.io)
        );
    }
    s
}
