use rpu_core::isa::{assemble, Instr, MReg, Program, VReg};
use rpu_core::modmath::Modulus;
use rpu_core::ring::{ring_add, Domain, RnsPoly, Tower};
use rpu_core::sim::{run, trace_hazards, MachineConfig, Region, RpuState};

fn chain(n: usize) -> Program {
    let mut text = String::from("enter\naset a1, 1\nsload s0, a1, 0\nmset m0, s0\n");
    for _ in 0..n {
        text.push_str("vaddmod v1, v1, v0, m0\n");
    }
    text.push_str("leave\n");
    assemble(&text).unwrap()
}

#[test]
fn vaddmod_matches_ring_add() {
    let p = assemble("enter\nsload s0, a0, 0\nmset m1, s0\nvload v1, a0, 0\nvload v2, a0, 512\nvaddmod v3, v1, v2, m1\nvstore a0, 1024, v3\nleave").unwrap();
    let a: Vec<u128> = (1..=512).map(|x| x % 17).collect();
    let b = vec![16u128; 512];
    let mut vdm = a.clone();
    vdm.extend(&b);
    let (r, st) = run(&p, &MachineConfig::default(), &vdm, &[17]).unwrap();
    let got = st.dump_memory(Region::Vdm, 1024, 512).unwrap();
    let q = Modulus::new(17).unwrap();
    let pa = RnsPoly::new(vec![Tower::new(a, q).unwrap()], Domain::Coefficient).unwrap();
    let pb = RnsPoly::new(vec![Tower::new(b, q).unwrap()], Domain::Coefficient).unwrap();
    assert_eq!(got, ring_add(&pa, &pb).unwrap().towers[0].coeffs);
    assert!(trace_hazards(&p, r.trace.as_ref().unwrap()).is_empty());
}

#[test]
fn dependency_chain_closed_form() {
    let cfg = MachineConfig::default();
    let per = 1 + cfg.vector_occupancy() as u64 + cfg.latency.add_depth as u64;
    let (r10, _) = run(&chain(10), &cfg, &[], &[0, 17]).unwrap();
    let (r20, _) = run(&chain(20), &cfg, &[], &[0, 17]).unwrap();
    assert_eq!(r20.cycles - r10.cycles, 10 * per);
}

#[test]
fn step_semantics() {
    let p = Program::new("t", vec![Instr::Enter, Instr::Leave]);
    let mut st = RpuState::new(p, MachineConfig::default()).unwrap();
    st.run_to_end().unwrap();
    let before = st.digest();
    let c = st.cycle();
    st.step().unwrap();
    assert_eq!(st.cycle(), c + 1);
    assert_eq!(st.digest(), before);

    let p = Program::new(
        "t",
        vec![
            Instr::Enter,
            Instr::VMulMod { vd: VReg(1), va: VReg(2), vb: VReg(3), m: MReg(0) },
            Instr::VAddMod { vd: VReg(4), va: VReg(1), vb: VReg(1), m: MReg(0) },
            Instr::Leave,
        ],
    );
    let mut st = RpuState::new(p, MachineConfig::default()).unwrap();
    st.set_modulus(0, Modulus::new(17).unwrap());
    st.step().unwrap();
    st.step().unwrap();
    assert_eq!(st.busy_board(), 1 << 1);
    let pc = st.pc;
    st.step().unwrap();
    assert_eq!(st.pc, pc);
    assert_eq!(st.engine.counters.hazard_stalls, 1);
}

#[test]
fn memory_roundtrip_and_sizes() {
    let p = Program::new("t", vec![Instr::Enter, Instr::Leave]);
    let mut st = RpuState::new(p, MachineConfig::default()).unwrap();
    assert_eq!(st.vdm.len(), 262144);
    let bytes: Vec<u8> = (0..1 << 20).map(|i| (i * 7 % 251) as u8).collect();
    st.load_bytes(Region::Vdm, 3 * 65536, &bytes).unwrap();
    assert_eq!(st.dump_bytes(Region::Vdm, 3 * 65536, 65536).unwrap(), bytes);
    assert!(st.load_bytes(Region::Vdm, 3 * 65536 + 1, &bytes).is_err());
}
