use proptest::prelude::*;

use rpu_core::perf::*;
use rpu_core::sim::MachineConfig;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn ring_mult_derating() {
    let n = 1 << 16;
    assert_eq!(derate_ring_mult(1.73, &IoModel::ideal(), n, 16), 1.73);
    assert!(close(derate_ring_mult(1.73, &IoModel::of(IoKind::Lvds2k), n, 16), 4.194304, 1e-9));
    assert!(close(derate_ring_mult(1.73, &IoModel::hbm2(1), n, 16), 2.275556, 1e-6));
    assert_eq!(derate_ring_mult(1.73, &IoModel::hbm2(2), n, 16), 1.73);
    assert!(close(derate_ring_mult(1.73, &IoModel::lvds(LVDS_SDR_GBPS), n, 16), 16.777216, 1e-9));
}

#[test]
fn speedup_table_matches_publication() {
    let got: Vec<[u64; 3]> = published_speedups().iter().map(|r| [r.single, r.chiplet, r.quad]).collect();
    assert_eq!(got, vec![[192, 2694, 10779], [716, 10034, 40138], [634, 8886, 35544]]);
}

#[test]
fn published_derates_are_ideal_denominated() {
    let mut n = 0;
    for r in TABLE1.iter().filter(|r| r.io != IoKind::Ideal) {
        let i = r.ideal();
        assert!((derate_pct(r.no_bs_s, i.no_bs_s) - r.no_bs_derate_pct.unwrap()).abs() <= 1, "{r:?}");
        assert!((derate_pct(r.with_bs_s, i.with_bs_s) - r.with_bs_derate_pct.unwrap()).abs() <= 1, "{r:?}");
        n += 2;
    }
    assert_eq!(n, 18);
    assert_eq!(derate_pct(0.153, 0.110), 39);
    assert_eq!(derate_pct(5.370, 3.650), 47);
}

fn calibrated() -> Calibration {
    calibrate(&WorkloadSpec::default(), &ChipModel::published_all(), &TABLE1, &[IoKind::Ideal, IoKind::Lvds2k, IoKind::Hbm2x1])
        .unwrap()
}

#[test]
fn calibration_reproduces_iteration_times() {
    let c = calibrated();
    assert_eq!(c.residuals.len(), 24);
    for r in &c.residuals {
        assert!(r.ok(), "{r:?}");
    }
    let w = &c.workload;
    assert_eq!(w.source, CountSource::Calibrated);
    let rows = estimate_table(w, &ChipModel::published_all(), &IoModel::published_all());
    let find = |c, io| rows.iter().find(|r| r.config == c && r.io == io).unwrap();
    let m1 = find(RpuConfigName::Model1, IoKind::Ideal).time_no_bs_s.unwrap();
    assert!((0.1045..=0.1155).contains(&m1), "{m1}");
    let m2 = find(RpuConfigName::Model2, IoKind::Ideal).time_with_bs_s.unwrap();
    assert!((2.766..=3.058).contains(&m2), "{m2}");
    // the dual-stack rows were held out of the fit
    for r in c.residuals.iter().filter(|r| r.io == IoKind::Hbm2x2) {
        assert!(!r.fitted);
        assert!((r.target_derate_pct.unwrap() - r.predicted_derate_pct.unwrap()).abs() <= 3, "{r:?}");
    }
    let ks = w.keyswitch_ops.unwrap();
    assert!(ks.ring_add > 0.0 && ks.ring_mult > 0.0 && ks.ntt > 0.0);
}

#[test]
fn uncalibrated_rows_are_marked() {
    let w = WorkloadSpec::default();
    let r = estimate(&w, &ChipModel::published(RpuConfigName::Model1), &IoModel::ideal());
    assert_eq!(r.source, CountSource::Uncalibrated);
    assert_eq!(r.time_no_bs_s, None);
    assert!(estimate_markdown(&[r]).contains("uncalibrated"));
}

#[test]
fn zero_workload_takes_no_time() {
    let w = WorkloadSpec::empty();
    for r in estimate_table(&w, &ChipModel::published_all(), &IoModel::published_all()) {
        assert_eq!((r.time_no_bs_s, r.time_with_bs_s), (Some(0.0), Some(0.0)));
        assert_eq!(r.derate_no_bs_pct, Some(0));
    }
}

#[test]
fn dual_hbm_costs_a_tile() {
    let c = ChipModel::published(RpuConfigName::Model1);
    assert_eq!(c.effective_tiles(&IoModel::hbm2(2)), 9);
    assert_eq!(c.effective_tiles(&IoModel::hbm2(1)), 10);
    let w = calibrated().workload;
    let rows = estimate_table(&w, &[c], &[IoModel::ideal()]);
    assert_eq!(rows[0].derate_no_bs_pct, Some(0));
}

#[test]
fn simulated_kernel_latencies() {
    let cfg = MachineConfig::default();
    let rows = measure_kernels(&[1 << 16], &cfg);
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!(r.error.is_empty(), "{r:?}");
        assert!(r.cycles >= r.compute_bound_cycles);
    }
    assert_eq!(rows[0].compute_bound_cycles, 2048);
    assert_eq!(rows[2].compute_bound_cycles, 16384);
    assert!(rows[0].us <= 2.0 * 1.73 && rows[1].us <= 2.0 * 1.73, "{rows:?}");
    assert_eq!(rows[2].published_cycles, Some(18300));
    assert!(measure_kernels(&[], &cfg).is_empty());
}

proptest! {
    #[test]
    fn model_is_monotone(add in 0.0f64..1e6, mult in 0.0f64..1e6, ntt in 0.0f64..1e5, bw in 50.0f64..2000.0, tiles in 1u32..32) {
        let w = WorkloadSpec { base_ops: Some(OpCounts::new(add, mult, ntt)), keyswitch_ops: Some(OpCounts::new(1.0, 1.0, 1.0)), source: CountSource::UserSupplied, ..WorkloadSpec::default() };
        let mut chip = ChipModel::published(RpuConfigName::Model2);
        chip.tiles = tiles;
        let slow = IoModel::lvds(bw);
        let fast = IoModel::lvds(bw * 1.5);
        let a = estimate_table(&w, &[chip.clone()], &[slow.clone(), fast]);
        prop_assert!(a[1].derate_no_bs_pct.unwrap() <= a[0].derate_no_bs_pct.unwrap());
        prop_assert!(a[0].time_with_bs_s.unwrap() >= a[0].time_no_bs_s.unwrap());
        let mut more = chip.clone();
        more.tiles += 1;
        let t0 = estimate(&w, &chip, &slow).time_no_bs_s.unwrap();
        let t1 = estimate(&w, &more, &slow).time_no_bs_s.unwrap();
        prop_assert!(t1 <= t0);
        if add + mult + ntt > 0.0 {
            prop_assert!(t1 < t0);
        }
    }
}
