mod common;

use std::path::Path;
use std::process::{Command, Output};

use dppmask::io::{read_mask, write_features, write_image};
use dppmask::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::tempdir;

fn dppmask(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dppmask"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn noise_image(path: &Path, h: usize, w: usize, channels: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let image = Image::new(
        h,
        w,
        channels,
        (0..h * w * channels).map(|_| rng.random()).collect(),
    )
    .unwrap();
    write_image(path, &image).unwrap();
}

#[test]
fn mask_writes_document_and_overlay() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("photo.ppm");
    noise_image(&input, 224, 224, 3, 1);
    let out = dir.path().join("out");
    let o = dppmask(&[
        "mask",
        "--overlay",
        "--out-dir",
        out.to_str().unwrap(),
        input.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("visible=49"));

    let doc = read_mask(out.join("photo.mask.json")).unwrap();
    assert_eq!(doc.visible.len(), 49);
    assert_eq!((doc.rows, doc.cols, doc.patch_size), (14, 14, 16));
    let overlay = dppmask::io::read_image(out.join("photo.overlay.ppm")).unwrap();
    assert_eq!(
        (overlay.height(), overlay.width(), overlay.channels()),
        (224, 224, 3)
    );
}

#[test]
fn mask_output_is_byte_identical_across_runs() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("a.pgm");
    noise_image(&input, 64, 64, 1, 2);
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = dppmask(&[
            "mask",
            "--tau",
            "1.0",
            "--seed",
            "5",
            "--out-dir",
            out.to_str().unwrap(),
            input.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(out.join("a.mask.json")).unwrap()
    };
    assert_eq!(run("x"), run("y"));
}

#[test]
fn invalid_config_is_a_usage_error_and_writes_nothing() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("a.pgm");
    noise_image(&input, 32, 32, 1, 3);
    let out = dir.path().join("out");
    for bad in [
        ["--mask-ratio", "1.0"],
        ["--tau", "1.5"],
        ["--epsilon", "0"],
    ] {
        let o = dppmask(&[
            "mask",
            bad[0],
            bad[1],
            "--out-dir",
            out.to_str().unwrap(),
            input.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(2), "{bad:?}");
        assert!(!out.exists());
    }
    let o = dppmask(&["mask", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn per_file_failures_keep_other_outputs() {
    let dir = tempdir().unwrap();
    let good = dir.path().join("good.pgm");
    noise_image(&good, 32, 32, 1, 4);
    let odd = dir.path().join("odd.pgm");
    noise_image(&odd, 30, 32, 1, 5);
    let out = dir.path().join("out");
    let o = dppmask(&[
        "mask",
        "--out-dir",
        out.to_str().unwrap(),
        good.to_str().unwrap(),
        odd.to_str().unwrap(),
        dir.path().join("missing.pgm").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(out.join("good.mask.json").exists());
    assert!(!out.join("odd.mask.json").exists());
    let err = stderr(&o);
    assert!(
        err.contains("odd.pgm") && err.contains("missing.pgm"),
        "{err}"
    );
}

#[test]
fn feature_mode_reads_feature_files() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("emb.dppf");
    let f = common::uniform_features(&mut ChaCha8Rng::seed_from_u64(6), 20, 5);
    write_features(&input, &f).unwrap();
    let out = dir.path().join("out");
    let o = dppmask(&[
        "mask",
        "--mode",
        "feature",
        "--tau",
        "0",
        "--out-dir",
        out.to_str().unwrap(),
        input.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = read_mask(out.join("emb.mask.json")).unwrap();
    assert_eq!(
        (doc.rows, doc.cols, doc.visible.len(), doc.greedy_count),
        (1, 20, 5, 5)
    );

    let o = dppmask(&[
        "mask",
        "--mode",
        "feature",
        "--overlay",
        input.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_passes_and_catches_a_broken_update() {
    let o = dppmask(&["verify", "--trials", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).lines().all(|l| l.starts_with("PASS")));

    let o = dppmask(&["verify", "--trials", "5", "--corrupt-update"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));

    let o = dppmask(&["verify", "--trials", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning"));
}

#[test]
fn stats_reports_diversity_per_tau() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("scene.pgm");
    write_image(&input, &common::sky_foreground_image()).unwrap();
    let out = dir.path().join("out");
    let o = dppmask(&[
        "stats",
        "--patch-size",
        "8",
        "--tau-list",
        "0,1",
        "--trials",
        "20",
        "--out-dir",
        out.to_str().unwrap(),
        input.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let taus = &v["inputs"][0]["taus"];
    let j = |i: usize| taus[i]["mean_jaccard_distance"].as_f64().unwrap();
    assert!(j(0) < j(1), "{taus}");
    assert!(taus[0].get("var_jaccard_distance").is_some());
    assert!(out.join("stats.json").exists());

    let o = dppmask(&[
        "stats",
        "--patch-size",
        "8",
        "--tau-list",
        "0.5",
        "--trials",
        "1",
        input.to_str().unwrap(),
    ]);
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let entry = v["inputs"][0]["taus"][0].as_object().unwrap();
    assert!(entry.contains_key("mean_log_det"));
    assert!(!entry.keys().any(|k| k.starts_with("var_")), "{entry:?}");
}

#[test]
fn bench_skips_exhaustive_search_when_too_large() {
    let o = dppmask(&[
        "bench",
        "--trials",
        "3",
        "--dim",
        "16",
        "--sizes",
        "196:49,10:3",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let sizes = v["sizes"].as_array().unwrap();
    let big = sizes.iter().find(|s| s["n"] == 196).unwrap();
    assert!(big["exact_map"]["skipped"]
        .as_str()
        .unwrap()
        .contains("budget"));
    let small = sizes.iter().find(|s| s["n"] == 10).unwrap();
    assert!(small["exact_map"]["median_ms"].is_number());
    assert!(stderr(&o).contains("exact-map skipped"));
}
