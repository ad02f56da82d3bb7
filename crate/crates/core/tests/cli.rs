use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use extcalib::network::NetworkConfig;
use extcalib::trainer::save_reference_checkpoint;

fn extcalib(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_extcalib")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = extcalib(args);
    assert!(
        out.status.success(),
        "`extcalib {}` failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, n: usize, seed: u64) {
    synth_points(dir, n, seed, 1000);
}

fn synth_points(dir: &Path, n: usize, seed: u64, points: usize) {
    ok(&[
        "synth",
        "--out",
        dir.to_str().unwrap(),
        "--n-scenes",
        &n.to_string(),
        "--n-points",
        &points.to_string(),
        "--width",
        "128",
        "--height",
        "64",
        "--seed",
        &seed.to_string(),
    ]);
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "run_manifest.json" {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn png_pixels(path: &Path) -> image::RgbImage {
    image::open(path).unwrap().to_rgb8()
}

#[test]
fn synth_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&a, 2, 7);
    synth(&b, 2, 7);
    let (ta, tb) = (tree(&a), tree(&b));
    assert_eq!(ta.iter().filter(|(n, _)| n.ends_with(".bin")).count(), 2);
    assert!(ta == tb, "same seed produced different files");
    for (name, bytes) in &ta {
        if name.ends_with(".bin") {
            assert_eq!(bytes.len(), 1000 * 16, "{name}");
        }
    }
}

#[test]
fn synth_zero_scenes_writes_empty_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), 0, 1);
    let m = fs::read_to_string(tmp.path().join("manifest.toml")).unwrap();
    assert!(!m.contains("[[frames]]"));
}

#[test]
fn render_writes_two_or_three_overlays() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    // dense enough for the overlays to differ visibly
    synth_points(&data, 1, 3, 20000);
    let d = data.to_str().unwrap();

    let plain = tmp.path().join("plain");
    ok(&["render", "--dataset", d, "--out", plain.to_str().unwrap(), "--deviation-t", "0.5", "--deviation-r", "5"]);
    let mut names: Vec<_> = fs::read_dir(&plain)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".png"))
        .collect();
    names.sort();
    assert_eq!(names, ["ground_truth.png", "miscalibrated.png"]);
    let (mis, gt) = (png_pixels(&plain.join("miscalibrated.png")), png_pixels(&plain.join("ground_truth.png")));
    let differing = mis.pixels().zip(gt.pixels()).filter(|(a, b)| a != b).count();
    assert!(differing * 100 >= (mis.width() * mis.height()) as usize, "only {differing} pixels differ");

    let still = tmp.path().join("still");
    ok(&["render", "--dataset", d, "--out", still.to_str().unwrap(), "--deviation-t", "0", "--deviation-r", "0"]);
    assert_eq!(png_pixels(&still.join("miscalibrated.png")), png_pixels(&still.join("ground_truth.png")));

    let ck = tmp.path().join("oracle.safetensors");
    save_reference_checkpoint(&ck, "oracle", &NetworkConfig::tiny()).unwrap();
    let with = tmp.path().join("with");
    ok(&["render", "--dataset", d, "--out", with.to_str().unwrap(), "--checkpoint", ck.to_str().unwrap()]);
    for n in ["miscalibrated.png", "predicted.png", "ground_truth.png"] {
        assert!(with.join(n).is_file(), "{n}");
    }
    // the oracle recovers the true extrinsic exactly
    assert_eq!(png_pixels(&with.join("predicted.png")), png_pixels(&with.join("ground_truth.png")));

    let missing = extcalib(&["render", "--dataset", d, "--out", d, "--checkpoint", "/nonexistent.safetensors"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn eval_with_oracle_checkpoint_prints_zeros() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), 2, 5);
    let ck = tmp.path().join("oracle.safetensors");
    save_reference_checkpoint(&ck, "oracle", &NetworkConfig::tiny()).unwrap();
    let before = tree(tmp.path());
    let out = ok(&["eval", "--checkpoint", ck.to_str().unwrap(), "--dataset", tmp.path().to_str().unwrap()]);
    let row = out.lines().find(|l| l.starts_with("oracle")).expect("oracle row");
    let numbers: Vec<f64> = row
        .split(|c: char| c == '|' || c.is_whitespace())
        .filter_map(|s| s.parse().ok())
        .collect();
    // eight metric columns and the sample count
    assert_eq!(numbers.len(), 9, "{row}");
    assert!(numbers[..8].iter().all(|&x| x == 0.0), "{row}");
    assert_eq!(numbers[8], 2.0);
    assert!(before == tree(tmp.path()), "eval modified its dataset");
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = extcalib(&["ablate", "--variant", "bogus", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no_multihead"), "{err}");
    assert_eq!(extcalib(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(extcalib(&["--help"]).status.code(), Some(0));
    let ck = tmp.path().join("nope.safetensors");
    assert_eq!(extcalib(&["latency", "--checkpoint", ck.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = extcalib(&["render", "--dataset", tmp.path().join("missing").to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
