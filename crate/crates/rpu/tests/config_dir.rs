//! Kept in its own binary: the test changes the process environment.

use std::fs;

fn kernels_csv(extra: &[&str]) -> String {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let args = ["rpu", "kernels", "--sizes", "1024", "--format", "csv"].into_iter().chain(extra.iter().copied());
    assert_eq!(rpu::cli::run(args, &mut out, &mut err, false), 0);
    String::from_utf8(out).unwrap()
}

#[test]
fn config_dir_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let m2 = serde_json::to_string(&rpu_core::sim::MachineConfig::model2()).unwrap();
    fs::write(dir.path().join("machine.json"), m2).unwrap();
    let m1 = kernels_csv(&[]);
    let explicit = kernels_csv(&["--model", "model2"]);
    assert_ne!(m1, explicit);
    std::env::set_var("RPU_CONFIG_DIR", dir.path());
    let from_dir = kernels_csv(&[]);
    let overridden = kernels_csv(&["--model", "model1"]);
    std::env::remove_var("RPU_CONFIG_DIR");
    assert_eq!(explicit, from_dir);
    assert_eq!(m1, overridden);
}
