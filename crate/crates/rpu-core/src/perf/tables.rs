//! Published reference values and the kernel speedup table.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ChipModel, IoKind, RpuConfigName};

/// One row of the published iteration-time table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub config: RpuConfigName,
    pub io: IoKind,
    pub no_bs_s: f64,
    pub no_bs_derate_pct: Option<i64>,
    pub with_bs_s: f64,
    pub with_bs_derate_pct: Option<i64>,
}

const fn row(config: RpuConfigName, io: IoKind, a: f64, da: i64, b: f64, db: i64) -> Table1Row {
    let ideal = matches!(io, IoKind::Ideal);
    Table1Row {
        config,
        io,
        no_bs_s: a,
        no_bs_derate_pct: if ideal { None } else { Some(da) },
        with_bs_s: b,
        with_bs_derate_pct: if ideal { None } else { Some(db) },
    }
}

use IoKind::*;
use RpuConfigName::*;

/// Seconds per logistic-regression training iteration, without and with
/// bootstrapping, with the printed derate percentages.
pub const TABLE1: [Table1Row; 12] = [
    row(Model1, Ideal, 0.110, 0, 3.650, 0),
    row(Model2, Ideal, 0.091, 0, 2.912, 0),
    row(Phase2, Ideal, 0.074, 0, 2.495, 0),
    row(Model1, Lvds2k, 0.153, 39, 5.370, 47),
    row(Model2, Lvds2k, 0.122, 34, 4.141, 42),
    row(Phase2, Lvds2k, 0.105, 42, 3.724, 49),
    row(Model1, Hbm2x1, 0.125, 14, 4.233, 16),
    row(Model2, Hbm2x1, 0.102, 12, 3.329, 14),
    row(Phase2, Hbm2x1, 0.084, 14, 2.912, 17),
    row(Model1, Hbm2x2, 0.122, 11, 4.055, 11),
    row(Model2, Hbm2x2, 0.098, 8, 3.136, 8),
    row(Phase2, Hbm2x2, 0.080, 8, 2.687, 8),
];

impl Table1Row {
    /// The ideal row of the same configuration.
    pub fn ideal(&self) -> &'static Table1Row {
        TABLE1.iter().find(|r| r.config == self.config && r.io == IoKind::Ideal).unwrap()
    }
}

/// Single-core software latencies of the three kernels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpuLatencies {
    pub ring_add_us: f64,
    pub ring_mult_us: f64,
    pub ntt_us: f64,
}

impl Default for CpuLatencies {
    fn default() -> Self {
        CpuLatencies { ring_add_us: 333.0, ring_mult_us: 1240.0, ntt_us: 7807.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub kernel: &'static str,
    pub cpu_us: f64,
    pub rpu_us: f64,
    pub single: u64,
    pub chiplet: u64,
    pub quad: u64,
}

fn floor_ratio(num: f64, den: f64) -> u64 {
    // the tolerance absorbs representation error in ratios that are whole
    (num / den + 1e-9) as u64
}

/// Speedups of one tile, one chiplet of `chip.tiles` tiles and four
/// chiplets, each `floor(cpu · multiplier / rpu)` on the exact ratio.
pub fn speedup_table(cpu: &CpuLatencies, chip: &ChipModel) -> Vec<SpeedupRow> {
    let t = chip.tiles as f64;
    [
        ("ringAdd", cpu.ring_add_us, chip.ring_add_us),
        ("ringMult", cpu.ring_mult_us, chip.ring_mult_us),
        ("NTT", cpu.ntt_us, chip.ntt_us),
    ]
    .into_iter()
    .map(|(kernel, c, r)| SpeedupRow {
        kernel,
        cpu_us: c,
        rpu_us: r,
        single: floor_ratio(c, r),
        chiplet: floor_ratio(c * t, r),
        quad: floor_ratio(c * t * 4.0, r),
    })
    .collect()
}

/// The published speedup table: 64k kernels of the 14-tile chip whose NTT
/// takes 12.3 µs.
pub fn published_speedups() -> Vec<SpeedupRow> {
    speedup_table(&CpuLatencies::default(), &ChipModel::published(RpuConfigName::Model2))
}
