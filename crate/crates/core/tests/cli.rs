use std::fs;
use std::process::Command;

use image::{GrayImage, Luma};

fn seqvpr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_seqvpr"))
}

#[test]
fn synth_then_run() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let status = seqvpr()
        .args(["synth", "--places", "40", "--dim", "48", "--sigma", "0.6", "--seed", "3", "--out"])
        .arg(&data)
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["query.svpr", "reference.svpr", "manifest.json", "gt.csv", "config.json"] {
        assert!(data.join(f).exists(), "{f}");
    }

    let out = tmp.path().join("results");
    let output = seqvpr()
        .args(["run", "--config"])
        .arg(data.join("config.json"))
        .args(["--k-sweep", "full", "--cost-model", "cached", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let csv = fs::read_to_string(out.join("summary.csv")).unwrap();
    // k = 1..=15
    assert_eq!(csv.lines().count(), 16);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",cached")));
}

#[test]
fn encode_writes_svpr_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let frames = tmp.path().join("frames");
    fs::create_dir_all(&frames).unwrap();
    for i in 0..3u32 {
        GrayImage::from_fn(40, 30, |x, y| Luma([((x * (i + 1) + y) % 256) as u8]))
            .save(frames.join(format!("{i}.png")))
            .unwrap();
    }
    let out = tmp.path().join("hog.svpr");
    let status = seqvpr().args(["encode", "--dataset"]).arg(&frames).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());

    let bytes = fs::read(&out).unwrap();
    assert_eq!(&bytes[..5], b"SVPR1");
    assert_eq!(u32::from_le_bytes(bytes[5..9].try_into().unwrap()), 3);
    assert_eq!(u32::from_le_bytes(bytes[9..13].try_into().unwrap()), 31 * 31 * 36);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("hog.json")).unwrap()).unwrap();
    assert_eq!(manifest["technique_name"], "HOG");
    assert!(manifest["encode_time_per_frame_sec"].as_f64().unwrap() > 0.0);
}

#[test]
fn errors_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let output = seqvpr().args(["encode", "--dataset"]).arg(tmp.path()).arg("--out").arg(tmp.path().join("x.svpr")).output().unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("no frames"));

    let output = seqvpr()
        .args(["synth", "--places", "10", "--dim", "5", "--sigma", "0.1", "--out"])
        .arg(tmp.path().join("s"))
        .output()
        .unwrap();
    assert!(!output.status.success());
}
