use std::fs;
use std::path::Path;
use std::process::Command;

use foldmap::cli::run;

const AP: &str = r#"
[operator]
kind = "dirichlet_laplacian_1d"
n = 3

[nonlinearity]
kind = "nemitskii"
a = 5.0
b = 15.0

[form]
kind = "m_form"

[run]
nt = 128
fold_offsets = [-1.0, 0.0, 1.0]
random_targets = 3
expect = "fold_down"
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("scenario.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn invoke(args: &[&str]) -> i32 {
    run(std::iter::once("foldmap").chain(args.iter().copied()))
}

fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_str().unwrap().to_string(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), AP);
    for cmd in ["classify", "solve", "verify"] {
        let a = tmp.path().join(format!("{cmd}_a"));
        let b = tmp.path().join(format!("{cmd}_b"));
        for (out, jobs) in [(&a, "1"), (&b, "3")] {
            let code = invoke(&[cmd, "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "7", "--jobs", jobs]);
            assert_eq!(code, 0, "{cmd}");
        }
        let (x, y) = (outputs(&a), outputs(&b));
        assert!(!x.is_empty());
        assert_eq!(x, y, "{cmd}");
    }
}

#[test]
fn manifest_lists_hashes_of_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), AP);
    let out = tmp.path().join("o");
    assert_eq!(invoke(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()]), 0);
    let triple: serde_json::Value = serde_json::from_slice(&fs::read(out.join("triple.json")).unwrap()).unwrap();
    let lm = triple["lambda_m"].as_f64().unwrap();
    assert!((lm - 16.0 * (2.0 - 2f64.sqrt())).abs() < 1e-10, "{triple}");
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert!(files.iter().any(|f| f["name"] == "triple.json"));
    for f in files {
        let bytes = fs::read(out.join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), foldmap::cli::hex_digest(&bytes));
    }
}

#[test]
fn unknown_key_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{AP}\nslope_windw = 0.3\n"));
    let out = tmp.path().join("o");
    assert_eq!(invoke(&["classify", "--config", &cfg, "--out", out.to_str().unwrap()]), 2);
}

#[test]
fn reversed_slopes_are_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &AP.replace("a = 5.0", "a = 15.0").replace("b = 15.0", "b = 5.0"));
    let out = tmp.path().join("o");
    assert_eq!(invoke(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]), 2);
}

#[test]
fn narrow_window_fails_the_solve() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), AP);
    let out = tmp.path().join("o");
    let code = invoke(&["solve", "--config", &cfg, "--out", out.to_str().unwrap(), "--t-min", "-1", "--t-max", "1"]);
    assert_eq!(code, 1);
}

#[test]
fn binary_runs_a_small_demo() {
    let tmp = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_foldmap"))
        .args(["demo", "ap_fold", "--small", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    for f in ["triple.json", "fiber.csv", "classify.json", "solve.json", "verify.json", "manifest.json"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    let bad = Command::new(env!("CARGO_BIN_EXE_foldmap")).args(["demo", "nope"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
