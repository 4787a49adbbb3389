use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mmtpd"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = cmd.output().unwrap();
    (status.code().unwrap(), String::from_utf8(stdout).unwrap(), String::from_utf8(stderr).unwrap())
}

#[test]
fn verify_accepts_reference_file() {
    let (code, out, _) = run(bin().args(["verify", "--rank"]).arg(fixture("t222_r7_s4_t1.json")));
    assert_eq!(code, 0);
    assert!(out.contains("exact_integer"));
    assert!(out.contains("(4,1) conforms"));
    assert!(out.contains("jacobian: 64 x 28"));
}

#[test]
fn verify_rejects_a_flipped_entry() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("t223_r11_s2_t2.json")).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let entry = &mut value["W"][0][10];
    *entry = (1 - entry.as_i64().unwrap().abs()).into();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, serde_json::to_string(&value).unwrap()).unwrap();
    let (code, out, err) = run(bin().arg("verify").arg(&path));
    assert_eq!(code, 1, "{out}{err}");
    assert!(out.contains("failed"));
}

#[test]
fn verify_rejects_a_broken_tie() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("strassen.json")).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["s"] = 4.into();
    value["t"] = 1.into();
    let path = dir.path().join("mislabelled.json");
    std::fs::write(&path, serde_json::to_string(&value).unwrap()).unwrap();
    let (code, out, _) = run(bin().arg("verify").arg(&path));
    assert_eq!(code, 1);
    assert!(out.contains("violated"));
}

#[test]
fn usage_and_input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "shape = [2, 2, 2]\nrank = 7\nst = [[9, 9]]\nseeds = 1\n").unwrap();
    assert_eq!(run(bin().args(["search", "--config"]).arg(&cfg)).0, 2);
    assert_eq!(run(bin().args(["verify", "/nonexistent/pd.json"])).0, 2);
    assert_eq!(run(bin().args(["mmt-dump", "2,x,2"])).0, 2);
    assert_eq!(run(bin().args(["search", "--shape", "2,2,2"])).0, 2);
}

#[test]
fn compose_keeps_cyclic_structure() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("t444.json");
    let (code, out, err) = run(bin().arg("compose").arg(fixture("t222_r7_s4_t1.json")).arg("-o").arg(&out_path));
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("T_444 rank 49 (s,t) = (16,11)"));
    let (code, out, _) = run(bin().arg("verify").arg(&out_path));
    assert_eq!(code, 0);
    assert!(out.contains("exact_integer"));
}

#[test]
fn mmt_dump_lists_ones() {
    let (code, out, _) = run(bin().args(["mmt-dump", "2,2,3"]));
    assert_eq!(code, 0);
    assert_eq!(out.lines().filter(|l| !l.starts_with('#')).count(), 12);
}

#[test]
fn rank_prints_json() {
    let (code, out, _) = run(bin().arg("rank").arg(fixture("t223_r11_s2_t2.json")));
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["dims"], serde_json::json!([144, 112]));
}

#[test]
fn search_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run(bin()
        .args(["search", "--shape", "2,2,2", "--rank", "7", "--st", "4,1", "--seeds", "3", "--workers", "2", "-o"])
        .arg(dir.path()));
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("T_222 r=7 seeds=3"));
    assert!(dir.path().join("summary.csv").exists());
    let practical = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with("_practical.json"))
        .count();
    assert!(practical >= 1);
    let first = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.to_string_lossy().ends_with("_practical.json"))
        .unwrap();
    let (code, _, _) = run(bin().arg("verify").arg(&first));
    assert_eq!(code, 0);
}

#[test]
fn discretize_refines_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("out.json");
    let (code, _, err) = run(bin().arg("discretize").arg(fixture("t224_r14_s3_t1.json")).arg("-o").arg(&out_path));
    assert_eq!(code, 0, "{err}");
    let (code, out, _) = run(bin().arg("verify").arg(&out_path));
    assert_eq!(code, 0);
    assert!(out.contains("exact_integer"));
}
