use num_bigint::BigUint;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use rpu_core::codegen::{
    bit_reverse, default_params, dft_matrix, generate, generate_with, plan, schedule, verify, ButterflyStyle,
    CodegenError, Direction, GenOptions, Kernel, Matrix, NttPlan, RegAllocStrategy, Variant,
};
use rpu_core::isa::{random_program, Instr, Opcode, RegId, ShufMode, RANDOM_VDM_WORDS};
use rpu_core::modmath::{find_ntt_prime, Modulus, NttParams};
use rpu_core::ring::{ntt_forward, ntt_inverse, Tower};
use rpu_core::sim::{run, MachineConfig};

fn product(factors: &[Matrix], q: u128) -> Matrix {
    let n = factors[0].len();
    let q = BigUint::from(q);
    let mut acc: Vec<Vec<BigUint>> =
        (0..n).map(|r| (0..n).map(|c| BigUint::from((r == c) as u8)).collect()).collect();
    for f in factors {
        let next: Vec<Vec<BigUint>> = (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| {
                        let mut s = BigUint::from(0u8);
                        for k in 0..n {
                            s += BigUint::from(f[r][k]) * &acc[k][c];
                        }
                        s % &q
                    })
                    .collect()
            })
            .collect();
        acc = next;
    }
    acc.into_iter().map(|row| row.into_iter().map(|x| x.try_into().unwrap()).collect()).collect()
}

fn mod17_plan(variant: Variant) -> NttPlan {
    let p = NttParams::with_omega(4, Modulus::new(17).unwrap(), 4).unwrap();
    plan(4, variant, &p).unwrap()
}

#[test]
fn four_point_plan_is_the_dft_mod_17() {
    let want: Matrix = vec![vec![1, 1, 1, 1], vec![1, 4, 16, 13], vec![1, 16, 1, 16], vec![1, 13, 16, 4]];
    for v in Variant::ALL {
        let pl = mod17_plan(v);
        assert_eq!(pl.stages.len(), 2);
        assert_eq!(product(&pl.factors(), 17), want, "{v:?}");
        assert_eq!(pl.matrix(), want);
    }
}

#[test]
fn small_plans_match_dense_dft() {
    for n in [8usize, 16, 32, 64] {
        let q = find_ntt_prime(20, n as u64).unwrap();
        let p = NttParams::cyclic(n, q).unwrap();
        for v in Variant::ALL {
            let pl = plan(n, v, &p).unwrap();
            assert_eq!(pl.stages.len(), n.trailing_zeros() as usize);
            assert_eq!(product(&pl.factors(), q.q()), dft_matrix(n, p.omega, &q), "n={n} {v:?}");
        }
    }
}

#[test]
fn pease_has_constant_geometry() {
    let p = default_params(1024).unwrap();
    let pl = plan(1024, Variant::Pease, &p).unwrap();
    assert_eq!(pl.stages.len(), 10);
    assert!(pl.constant_geometry());
}

#[test]
fn unsupported_sizes() {
    let p = default_params(1024).unwrap();
    assert_eq!(plan(2, Variant::Pease, &p), Err(CodegenError::UnsupportedSize(2)));
    assert_eq!(plan(1000, Variant::Pease, &p), Err(CodegenError::UnsupportedSize(1000)));
    assert_eq!(plan(131072, Variant::Pease, &p), Err(CodegenError::UnsupportedSize(131072)));
    assert_eq!(plan(2048, Variant::Pease, &p), Err(CodegenError::ParamsMismatch));
}

fn kernel(n: usize, variant: Variant, dir: Direction, cfg: &MachineConfig) -> (Kernel, NttParams) {
    let p = default_params(n).unwrap();
    let pl = plan(n, variant, &p).unwrap();
    let k = generate_with(&pl, cfg, &GenOptions { direction: dir, ..GenOptions::new(RegAllocStrategy::Greedy) }).unwrap();
    (k, p)
}

fn bitrev(x: &[u128]) -> Vec<u128> {
    let b = x.len().trailing_zeros();
    (0..x.len()).map(|i| x[bit_reverse(i, b)]).collect()
}

fn random_tower(rng: &mut StdRng, p: &NttParams) -> Tower {
    let q = p.modulus.q();
    Tower::new((0..p.n).map(|_| rng.gen_range(0..q)).collect(), p.modulus).unwrap()
}

#[test]
fn n1024_matches_reference_on_random_inputs() {
    let cfg = MachineConfig::default();
    let (k, p) = kernel(1024, Variant::Pease, Direction::Forward, &cfg);
    let mut rng = StdRng::seed_from_u64(1024);
    for _ in 0..100 {
        let t = random_tower(&mut rng, &p);
        let (out, _) = k.run(&t.coeffs, &cfg).unwrap();
        assert_eq!(out, bitrev(&ntt_forward(&t, &p).unwrap().coeffs));
    }
}

#[test]
fn delta_gives_all_ones() {
    let cfg = MachineConfig::default();
    for n in [16usize, 1024, 4096] {
        let (k, _) = kernel(n, Variant::KornLambiotte, Direction::Forward, &cfg);
        let mut x = vec![0u128; n];
        x[0] = 1;
        assert_eq!(k.run(&x, &cfg).unwrap().0, vec![1u128; n], "n={n}");
    }
}

#[test]
fn small_kernels_are_the_dft_matrix() {
    let cfg = MachineConfig::default();
    for n in [4usize, 8, 16, 32, 64] {
        let q = find_ntt_prime(30, n as u64).unwrap();
        let p = NttParams::cyclic(n, q).unwrap();
        let want = dft_matrix(n, p.omega, &q);
        for v in Variant::ALL {
            let k = generate(&plan(n, v, &p).unwrap(), &cfg, RegAllocStrategy::Greedy).unwrap();
            for c in 0..n {
                let mut e = vec![0u128; n];
                e[c] = 1;
                let col = k.run(&e, &cfg).unwrap().0;
                for r in 0..n {
                    assert_eq!(col[r], want[bit_reverse(r, n.trailing_zeros())][c], "n={n} {v:?} ({r},{c})");
                }
            }
        }
    }
}

#[test]
fn variants_compute_the_same_function() {
    let cfg = MachineConfig::default();
    let p = default_params(4096).unwrap();
    let opts = GenOptions { schedule: false, ..GenOptions::new(RegAllocStrategy::Greedy) };
    let a = generate_with(&plan(4096, Variant::Pease, &p).unwrap(), &cfg, &opts).unwrap();
    let b = generate_with(&plan(4096, Variant::KornLambiotte, &p).unwrap(), &cfg, &opts).unwrap();
    // emission order differs; the scheduler may reconverge the two
    assert_ne!(a.program.instrs, b.program.instrs);
    let t = random_tower(&mut StdRng::seed_from_u64(7), &p);
    assert_eq!(a.run(&t.coeffs, &cfg).unwrap().0, b.run(&t.coeffs, &cfg).unwrap().0);
}

#[test]
fn inverse_undoes_forward() {
    let cfg = MachineConfig::default();
    for n in [64usize, 2048, 16384] {
        let (f, p) = kernel(n, Variant::Pease, Direction::Forward, &cfg);
        let (i, _) = kernel(n, Variant::Pease, Direction::Inverse, &cfg);
        let t = random_tower(&mut StdRng::seed_from_u64(n as u64), &p);
        let spectrum = f.run(&t.coeffs, &cfg).unwrap().0;
        assert_eq!(i.run(&spectrum, &cfg).unwrap().0, t.coeffs, "n={n}");
        // inverse kernel alone against the reference
        let want = ntt_inverse(&Tower::new(bitrev(&spectrum), p.modulus).unwrap(), &p).unwrap();
        assert_eq!(want.coeffs, t.coeffs);
    }
}

fn check_twiddles(k: &Kernel, m: &Modulus) {
    let tw = &k.twiddles;
    assert_eq!(tw.vdm.len(), tw.vdm_exponents.len());
    for (&w, &e) in tw.vdm.iter().zip(&tw.vdm_exponents) {
        assert_eq!(w, m.pow(tw.root, e as u128));
    }
    assert_eq!(tw.sdm[0], m.q());
    assert_eq!(tw.sdm.len(), tw.sdm_exponents.len() + 2);
    for (&w, &e) in tw.sdm[2..].iter().zip(&tw.sdm_exponents) {
        assert_eq!(w, m.pow(tw.root, e as u128));
    }
}

#[test]
fn twiddle_tables_hold_planned_powers() {
    let cfg = MachineConfig::default();
    for n in [1024usize, 65536] {
        for dir in [Direction::Forward, Direction::Inverse] {
            let (k, p) = kernel(n, Variant::Pease, dir, &cfg);
            check_twiddles(&k, &p.modulus);
            let root_inv = p.modulus.inv(k.twiddles.root).unwrap();
            let psi = p.psi.unwrap();
            assert!(k.twiddles.root == psi || root_inv == psi);
        }
    }
}

fn vregs_in_range(k: &Kernel) -> bool {
    k.program
        .instrs
        .iter()
        .flat_map(|i| i.reads().into_iter().chain(i.writes()))
        .all(|r| !matches!(r, RegId::V(v) if v >= 64))
}

#[test]
fn n65536_compute_bound_and_schedule() {
    let cfg = MachineConfig::default();
    let p = default_params(65536).unwrap();
    let pl = plan(65536, Variant::Pease, &p).unwrap();
    let sched = generate(&pl, &cfg, RegAllocStrategy::Greedy).unwrap();
    let plain = generate_with(&pl, &cfg, &GenOptions { schedule: false, ..GenOptions::new(RegAllocStrategy::Greedy) }).unwrap();
    let t = random_tower(&mut StdRng::seed_from_u64(3), &p);
    let (out, r) = sched.run(&t.coeffs, &cfg).unwrap();
    assert_eq!(out, bitrev(&ntt_forward(&t, &p).unwrap().coeffs));
    let (out2, r2) = plain.run(&t.coeffs, &cfg).unwrap();
    assert_eq!(out, out2);
    assert!(r.cycles <= r2.cycles);
    let bfly = sched.program.instrs.iter().filter(|i| i.opcode() == Opcode::VBfly).count();
    assert_eq!(bfly, 1024);
    assert_eq!(r.queue_busy[1], 1024 * cfg.vector_occupancy() as u64);
    assert!(r.cycles as f64 <= 1.6 * 16384.0, "{} cycles", r.cycles);
    assert!(vregs_in_range(&sched));
}

#[test]
fn listing_shape_at_1024() {
    let cfg = MachineConfig::default();
    let p = default_params(1024).unwrap();
    let pl = plan(1024, Variant::Pease, &p).unwrap();
    let opts = GenOptions { style: ButterflyStyle::MulAddSub, schedule: false, ..GenOptions::new(RegAllocStrategy::Greedy) };
    let k = generate_with(&pl, &cfg, &opts).unwrap();
    let ins = &k.program.instrs;
    let body: Vec<&Instr> = ins.iter().filter(|i| !matches!(i.opcode(), Opcode::Ctrl | Opcode::SLoad | Opcode::MSet | Opcode::ASet)).collect();
    assert!(matches!(body[0], Instr::VLoadS { .. } | Instr::VLoad { .. }));
    assert!(matches!(body[1], Instr::VLoadS { .. } | Instr::VLoad { .. }));
    let has = |op: Opcode| ins.iter().any(|i| i.opcode() == op);
    assert!(has(Opcode::VBroadcast) && has(Opcode::VMulMod) && has(Opcode::VAddMod) && has(Opcode::VSubMod));
    assert!(ins.iter().any(|i| matches!(i, Instr::VShuf { mode: ShufMode::UnpackLo, .. })));
    let tail: Vec<&Instr> = body.iter().rev().take(2).copied().collect();
    assert!(tail.iter().all(|i| matches!(i, Instr::VStoreS { stride: 2, .. })), "{tail:?}");
    let t = random_tower(&mut StdRng::seed_from_u64(5), &p);
    assert_eq!(k.run(&t.coeffs, &cfg).unwrap().0, bitrev(&ntt_forward(&t, &p).unwrap().coeffs));
}

#[test]
fn model2_kernels_are_correct_and_flag_conflicts() {
    let cfg = MachineConfig::model2();
    let (k, p) = kernel(2048, Variant::Pease, Direction::Forward, &cfg);
    let t = random_tower(&mut StdRng::seed_from_u64(9), &p);
    let (out, r) = k.run(&t.coeffs, &cfg).unwrap();
    assert_eq!(out, bitrev(&ntt_forward(&t, &p).unwrap().coeffs));
    if r.bank_conflict_cycles > 0 {
        assert!(k.diagnostics.iter().any(|d| d.code == "port-conflict"));
    }
}

#[test]
fn schedule_preserves_results() {
    let cfg = MachineConfig::default();
    let mut rng = StdRng::seed_from_u64(20);
    for _ in 0..20 {
        let p = random_program(&mut rng, 60, 12);
        let q = Modulus::new(find_ntt_prime(40, 1024).unwrap().q()).unwrap();
        let vdm: Vec<u128> = (0..RANDOM_VDM_WORDS).map(|_| rng.gen_range(0..q.q())).collect();
        let sdm = [q.q(), 3, 5, 7];
        let s = schedule(&p, &cfg);
        let (ra, _) = run(&p, &cfg, &vdm, &sdm).unwrap();
        let (rb, _) = run(&s, &cfg, &vdm, &sdm).unwrap();
        assert_eq!(ra.digest, rb.digest);
        assert!(rb.cycles <= ra.cycles);
    }
}

#[test]
fn verify_all_sizes() {
    let cfg = MachineConfig::default();
    let mut last = 0;
    for k in 10..=16 {
        let rows = verify(1 << k, Variant::Pease, RegAllocStrategy::Greedy, &cfg);
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!(r.pass, "{r:?}");
        }
        assert!(rows[0].cycles > last, "cycles not increasing at 2^{k}");
        last = rows[0].cycles;
    }
}
