use std::path::Path;
use std::process::{Command, Output};

fn diffoci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diffoci"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn xi_of_identity_file() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = write(tmp.path(), "id.csv", "x,y\n1,1\n2,2\n3,3\n4,4\n");
    let out = tmp.path().to_str().unwrap();
    let o = diffoci(&["estimate", "--input", &csv, "--which", "xi", "--predictors", "x", "--out-dir", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let value: f64 = stdout(&o).trim().parse().unwrap();
    assert!((value - 0.4).abs() < 1e-12);
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("estimate-xi-seed0.json")).unwrap()).unwrap();
    assert!((json["value"].as_f64().unwrap() - 0.4).abs() < 1e-12, "{json}");
    assert!(tmp.path().join("estimate-xi-seed0.manifest.json").exists());
}

#[test]
fn response_determined_by_condition_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let mut text = String::from("x,z,y\n");
    for i in 0..20 {
        let x = i / 2;
        text.push_str(&format!("{x},{},{}\n", (i * 7) % 11, x * x));
    }
    let csv = write(tmp.path(), "rep.csv", &text);
    let out = tmp.path().to_str().unwrap();
    let o = diffoci(&[
        "estimate", "--input", &csv, "--which", "t", "--predictors", "z", "--cond", "x", "--out-dir", out,
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(diffoci(&["gen", "--kind", "toy9", "--out-dir", out]).status.code(), Some(2));
    assert_eq!(diffoci(&["train", "--preset", "nope", "--out-dir", out]).status.code(), Some(2));
    let csv = write(tmp.path(), "id.csv", "x,y\n1,1\n2,2\n3,3\n");
    let o = diffoci(&["estimate", "--input", &csv, "--which", "xi", "--predictors", "missing", "--out-dir", out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_input_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let missing = tmp.path().join("absent.csv");
    let o = diffoci(&["foci", "--input", missing.to_str().unwrap(), "--out-dir", out]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gen_writes_the_expected_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = diffoci(&["gen", "--kind", "toy1", "--seed", "2", "--out-dir", out]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(tmp.path().join("toy1-seed2.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2001);
    assert_eq!(lines[0].split(',').count(), 11);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("toy1-seed2.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 2);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 1);
    assert!(manifest["wall_clock_secs"].is_null());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let d = dir.to_str().unwrap();
        assert_eq!(diffoci(&["gen", "--kind", "foci_toy", "--seed", "1", "--out-dir", d]).status.code(), Some(0));
        let csv = format!("{d}/foci_toy-seed1.csv");
        let o = diffoci(&["foci", "--input", &csv, "--seed", "1", "--out-dir", d]);
        assert_eq!(o.status.code(), Some(0));
        let o = diffoci(&["train", "--kind", "toy2", "--objective", "df1", "--param", "mlp", "--hidden", "4", "--epochs", "3", "--out-dir", d]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 6);
    for name in names {
        let fa = std::fs::read(a.join(&name)).unwrap();
        let fb = std::fs::read(b.join(&name)).unwrap();
        // Manifests record their own directory; compare them with it removed.
        let strip = |bytes: Vec<u8>, dir: &Path| {
            String::from_utf8(bytes).unwrap().replace(dir.to_str().unwrap(), "")
        };
        assert_eq!(strip(fa, &a), strip(fb, &b), "{name:?}");
    }
}
