use std::fs;
use std::path::{Path, PathBuf};

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::Value;

use rpu::formats::{bytes_to_words, parse_program, program_binary, program_json, words_to_bytes, PolyFile};
use rpu_core::isa::{disassemble, random_program};
use rpu_core::modmath::Modulus;
use rpu_core::ring::{Domain, RnsPoly, Tower};

struct Out {
    code: u8,
    out: String,
    err: String,
}

fn rpu(args: &[&str]) -> Out {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("rpu").chain(args.iter().copied());
    let code = rpu::cli::run(argv, &mut out, &mut err, false);
    Out { code, out: String::from_utf8(out).unwrap(), err: String::from_utf8(err).unwrap() }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SUBCOMMANDS: [&str; 8] = ["asm", "disasm", "sim", "ntt-gen", "ntt-verify", "kernels", "perf", "tables"];

/// Set RPU_UPDATE_GOLDEN=1 to rewrite the files.
#[test]
fn help_matches_golden_files() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let update = std::env::var_os("RPU_UPDATE_GOLDEN").is_some();
    let mut cases = vec![("rpu".to_string(), vec!["--help"])];
    for s in SUBCOMMANDS {
        cases.push((s.to_string(), vec![s, "--help"]));
    }
    for (name, args) in cases {
        let r = rpu(&args);
        assert_eq!(r.code, 0, "{name}: {}", r.err);
        let file = dir.join(format!("{name}.help.txt"));
        if update {
            fs::create_dir_all(&dir).unwrap();
            fs::write(&file, &r.out).unwrap();
        }
        let want = fs::read_to_string(&file).unwrap_or_else(|_| panic!("missing {}", file.display()));
        assert_eq!(r.out, want, "help for {name} changed; rerun with RPU_UPDATE_GOLDEN=1");
    }
}

#[test]
fn every_flag_is_documented() {
    for s in SUBCOMMANDS {
        let help = rpu(&[s, "--help"]).out;
        for line in help.lines().filter(|l| l.trim_start().starts_with("--")) {
            let after = line.trim_start().split_once("  ").map(|(_, d)| d.trim()).unwrap_or("");
            assert!(!after.is_empty(), "{s}: {line:?} has no description");
        }
    }
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &[][..],
        &["bogus"],
        &["tables"],
        &["tables", "--table", "3"],
        &["kernels", "--sizes", "3..5"],
        &["kernels", "--sizes", "x"],
        &["ntt-verify", "--frobnicate"],
        &["perf", "--save-calibration", "x.json"],
        &["ntt-gen", "--size", "1024", "--variant", "all", "--out-dir", "/nonexistent-rpu-dir"],
        &["ntt-gen", "--size", "1000", "--out-dir", "/nonexistent-rpu-dir"],
    ] {
        let r = rpu(args);
        assert_eq!(r.code, 2, "{args:?}: {}", r.out);
        assert!(r.out.is_empty(), "{args:?} printed data");
        assert!(!r.err.is_empty());
    }
    let r = rpu(&["--version"]);
    assert_eq!(r.code, 0);
    assert!(r.out.starts_with("rpu "));
}

#[test]
fn domain_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let r = rpu(&["asm", "/nonexistent/x.s"]);
    assert_eq!(r.code, 1);
    let bad = dir.path().join("bad.s");
    fs::write(&bad, "enter\nvfrob v1\n").unwrap();
    let r = rpu(&["asm", p(&bad)]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("vfrob"), "{}", r.err);
    // a load past the end of VDM faults during simulation
    let far = dir.path().join("far.s");
    fs::write(&far, "enter\naset a1, a0, 65535, 1\nvload v0, a1, 65535\nleave\n").unwrap();
    let r = rpu(&["sim", p(&far), "--format", "json"]);
    assert_eq!(r.code, 1, "{}", r.out);
}

#[test]
fn tables_reproduce_speedups() {
    let r = rpu(&["tables", "--table", "2", "--format", "json"]);
    assert_eq!(r.code, 0);
    let v: Value = serde_json::from_str(&r.out).unwrap();
    let got: Vec<[u64; 3]> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|r| [r["single"].as_u64().unwrap(), r["chiplet"].as_u64().unwrap(), r["quad"].as_u64().unwrap()])
        .collect();
    assert_eq!(got, vec![[192, 2694, 10779], [716, 10034, 40138], [634, 8886, 35544]]);
    let md = rpu(&["tables", "--table", "2", "--format", "md"]).out;
    assert!(md.contains("14 tiles"));
    let t1 = rpu(&["tables", "--table", "1", "--format", "csv"]);
    assert_eq!(t1.code, 0, "{}", t1.err);
    assert_eq!(t1.out.lines().count(), 25);
    assert!(t1.out.contains("0.153,39%,39%"));
}

#[test]
fn formats_default_by_terminal() {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    assert_eq!(rpu::cli::run(["rpu", "tables", "--table", "2"], &mut out, &mut err, true), 0);
    assert!(String::from_utf8(out).unwrap().starts_with("| kernel"));
    let r = rpu(&["tables", "--table", "2"]);
    assert!(r.out.starts_with('['));
}

#[test]
fn outputs_are_deterministic() {
    for args in [
        &["tables", "--table", "1", "--format", "json"][..],
        &["perf", "--calibrate", "--format", "csv"],
        &["kernels", "--sizes", "1024", "--format", "json"],
        &["ntt-verify", "--sizes", "1024..2048", "--variant", "all", "--strategy", "all", "--direction", "both"],
    ] {
        let a = rpu(args);
        let b = rpu(args);
        assert_eq!(a.code, 0, "{args:?}: {}", a.err);
        assert_eq!(a.out, b.out, "{args:?}");
    }
}

#[test]
fn ntt_verify_reports_one_row_per_kernel() {
    let r = rpu(&["ntt-verify", "--sizes", "1024..4096", "--variant", "pease", "--jobs", "3"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let lines: Vec<&str> = r.out.lines().collect();
    assert_eq!(lines[0], "size,variant,strategy,direction,cycles,stalls,hazards,pass");
    assert_eq!(lines.len(), 4);
    for (l, n) in lines[1..].iter().zip([1024, 2048, 4096]) {
        assert!(l.starts_with(&format!("{n},pease,greedy,forward,")), "{l}");
        assert!(l.ends_with(",0,true"), "{l}");
    }
    let serial = rpu(&["ntt-verify", "--sizes", "1024..4096", "--variant", "pease", "--jobs", "1"]);
    assert_eq!(serial.out, r.out);
}

#[test]
fn kernels_report() {
    let r = rpu(&["kernels", "--sizes", "", "--format", "json"]);
    assert_eq!(r.code, 0);
    assert_eq!(r.out.trim(), "[]");
    let r = rpu(&["kernels", "--sizes", "1024", "--model", "model2", "--format", "csv"]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(r.out.lines().count(), 4);
}

#[test]
fn perf_marks_uncalibrated_rows() {
    let r = rpu(&["perf", "--format", "json"]);
    assert_eq!(r.code, 0);
    let v: Value = serde_json::from_str(&r.out).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r["source"] == "UNCALIBRATED" && r["time_no_bs_s"].is_null()));
    assert!(rpu(&["perf", "--format", "md"]).out.contains("uncalibrated"));
}

#[test]
fn perf_calibration_round_trips_through_config_files() {
    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("workload.json");
    let fit = rpu(&["perf", "--calibrate", "--save-calibration", p(&saved), "--format", "json"]);
    assert_eq!(fit.code, 0, "{}", fit.err);
    let w: Value = serde_json::from_str(&fs::read_to_string(&saved).unwrap()).unwrap();
    assert_eq!(w["source"], "CALIBRATED");
    let again = rpu(&["perf", "--workload", p(&saved), "--format", "json"]);
    let a: Value = serde_json::from_str(&fit.out).unwrap();
    let b: Value = serde_json::from_str(&again.out).unwrap();
    assert_eq!(a["rows"], b["rows"]);
    let m1 = a["rows"][0]["time_no_bs_s"].as_f64().unwrap();
    assert!((0.1045..=0.1155).contains(&m1), "{m1}");

    let bad = dir.path().join("chips.json");
    fs::write(&bad, r#"[{"name":"Model1","tiles":0,"clock_ghz":2.0,"ring_add_us":1.0,"ring_mult_us":1.0,"ntt_us":1.0}]"#)
        .unwrap();
    assert_eq!(rpu(&["perf", "--chips", p(&bad)]).code, 2);
    fs::write(&bad, "{").unwrap();
    assert_eq!(rpu(&["perf", "--chips", p(&bad)]).code, 1);
}

#[test]
fn asm_disasm_sim_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let gen = rpu(&["ntt-gen", "--size", "1024", "--out-dir", p(dir.path()), "--name", "k", "--format", "json"]);
    assert_eq!(gen.code, 0, "{}", gen.err);
    let g: Value = serde_json::from_str(&gen.out).unwrap();
    assert_eq!(g["n"], 1024);
    for ext in ["s", "rpu", "json", "vdm.bin", "sdm.bin"] {
        assert!(dir.path().join(format!("k.{ext}")).exists(), "{ext}");
    }
    let bin = dir.path().join("k2.rpu");
    assert_eq!(rpu(&["asm", p(&dir.path().join("k.s")), "-o", p(&bin)]).code, 0);
    assert_eq!(fs::read(&bin).unwrap(), fs::read(dir.path().join("k.rpu")).unwrap());
    let text = rpu(&["disasm", p(&bin)]).out;
    // the binary encoding carries instructions only, not the entry name
    let src = fs::read_to_string(dir.path().join("k.s")).unwrap();
    assert_eq!(text, src.split_once('\n').filter(|(h, _)| h.starts_with(".entry")).unwrap().1);

    let trace = dir.path().join("t.jsonl");
    let vdm = dir.path().join("k.vdm.bin");
    let sdm = dir.path().join("k.sdm.bin");
    let out_img = dir.path().join("out.bin");
    let args = [
        "sim", p(&bin), "--vdm", p(&vdm), "--sdm", p(&sdm), "--trace", p(&trace), "--vdm-out", p(&out_img),
        "--vdm-range", "0:1024", "--format", "json",
    ];
    let r = rpu(&args);
    assert_eq!(r.code, 0, "{}", r.err);
    let v: Value = serde_json::from_str(&r.out).unwrap();
    assert!(v.get("trace").is_none());
    assert_eq!(v["queue_busy"][1], 2 * 16 * 5);
    let lines: Vec<Value> =
        fs::read_to_string(&trace).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    // enter and leave retire at decode and are not traced
    assert_eq!(lines.len() as u64 + 2, v["instructions"].as_u64().unwrap());
    let cycles: Vec<u64> = lines.iter().map(|l| l["cycle"].as_u64().unwrap()).collect();
    assert!(cycles.windows(2).all(|w| w[0] <= w[1]));
    assert!(lines.iter().any(|l| l["stall_reason"].is_string()));
    assert_eq!(fs::read(&out_img).unwrap().len(), 1024 * 16);
    // the JSON kernel description also loads as a program source for sim
    let json_prog = dir.path().join("p.json");
    let asm_json = rpu(&["asm", p(&dir.path().join("k.s")), "--emit", "json", "-o", p(&json_prog)]);
    assert_eq!(asm_json.code, 0);
    let r2 = rpu(&["sim", p(&json_prog), "--vdm", p(&vdm), "--sdm", p(&sdm), "--format", "json"]);
    let v2: Value = serde_json::from_str(&r2.out).unwrap();
    assert_eq!(v2["digest"], v["digest"]);
}

#[test]
fn empty_kernel_simulates_in_a_few_cycles() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("e.s");
    fs::write(&src, "enter\nleave\n").unwrap();
    let bin = dir.path().join("e.rpu");
    assert_eq!(rpu(&["asm", p(&src), "-o", p(&bin)]).code, 0);
    let img = dir.path().join("img.bin");
    fs::write(&img, []).unwrap();
    let trace = dir.path().join("t.jsonl");
    let r = rpu(&["sim", p(&bin), "--vdm", p(&img), "--trace", p(&trace), "--format", "json"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let v: Value = serde_json::from_str(&r.out).unwrap();
    assert!(v["cycles"].as_u64().unwrap() <= 4);
    fs::write(&img, [0u8; 7]).unwrap();
    assert_eq!(rpu(&["sim", p(&bin), "--vdm", p(&img)]).code, 1);
}

fn poly(n: usize, moduli: &[u128], seed: u64) -> RnsPoly {
    let mut rng = StdRng::seed_from_u64(seed);
    let towers = moduli
        .iter()
        .map(|&q| Tower::new((0..n).map(|_| rng.gen_range(0..q)).collect(), Modulus::new(q).unwrap()).unwrap())
        .collect();
    RnsPoly::new(towers, Domain::Coefficient).unwrap()
}

#[test]
fn poly_file_rejects_bad_input() {
    let mut f = PolyFile::from_poly(&poly(4, &[17, 97], 1));
    f.towers[0][1] = "17".into();
    assert!(f.to_poly().is_err());
    let mut f = PolyFile::from_poly(&poly(4, &[17, 97], 1));
    f.moduli.pop();
    assert!(f.to_poly().is_err());
    let mut f = PolyFile::from_poly(&poly(4, &[17], 1));
    f.towers[0][0] = "-1".into();
    assert!(f.to_poly().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn programs_round_trip(seed in any::<u64>(), len in 0usize..120) {
        let prog = random_program(&mut StdRng::seed_from_u64(seed), len, 24);
        prop_assert_eq!(&parse_program(&program_binary(&prog)).unwrap().instrs, &prog.instrs);
        prop_assert_eq!(&parse_program(program_json(&prog).as_bytes()).unwrap(), &prog);
        let text = disassemble(&prog);
        let back = parse_program(text.as_bytes()).unwrap();
        prop_assert_eq!(disassemble(&back), text);
        prop_assert_eq!(back, prog);
    }

    #[test]
    fn images_round_trip(words in proptest::collection::vec(any::<u128>(), 0..64)) {
        let bytes = words_to_bytes(&words);
        prop_assert_eq!(bytes.len(), words.len() * 16);
        prop_assert_eq!(bytes_to_words(&bytes).unwrap(), words);
    }

    #[test]
    fn poly_json_round_trips(log_n in 0u32..6, seed in any::<u64>(), wide in any::<bool>()) {
        let moduli: Vec<u128> = if wide { vec![(1 << 125) + 1, 97] } else { vec![17] };
        let a = poly(1 << log_n, &moduli, seed);
        let text = serde_json::to_string(&PolyFile::from_poly(&a)).unwrap();
        let back: PolyFile = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.to_poly().unwrap(), a);
    }
}
