//! End-to-end runs of the `i2ieval` binary.

use std::path::Path;
use std::process::{Command, Output};

use i2ieval::analysis::{translate, MetricReport};
use i2ieval::features::{toy_extract, write_activations, ActivationSet, Dtype};
use i2ieval::synth::{noise, textured};
use i2ieval::{write_image, BitDepth, Image};
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_i2ieval"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

fn write_set(dir: &Path, images: &[(String, Image)]) {
    std::fs::create_dir_all(dir).unwrap();
    for (name, img) in images {
        write_image(img, &dir.join(name), BitDepth::Sixteen).unwrap();
    }
}

fn toy_acts(count: usize, seed: u64, bias: f64) -> ActivationSet {
    let images: Vec<Image> = (0..count as u64)
        .map(|i| {
            let n = noise(20, 20, seed * 10_007 + i);
            Image::from_fn(20, 20, |r, c| (n.at(r, c) + bias).min(1.0))
        })
        .collect();
    toy_extract(&images, 5, 32).unwrap()
}

#[test]
fn preprocess_empty_dir_is_user_error() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("empty");
    std::fs::create_dir(&input).unwrap();
    let out = run(&[
        "preprocess",
        "--input",
        s(&input),
        "--out",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no input images"));
}

#[test]
fn preprocess_writes_patches_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let img = Image::from_fn(200, 180, |r, c| {
        if c < 150 {
            0.6 + 0.1 * ((r * 5 + c * 11) % 23) as f64 / 23.0
        } else {
            0.0
        }
    });
    write_set(&tmp.path().join("in"), &[("m.png".into(), img)]);
    let o = tmp.path().join("o");
    let out = run(&[
        "preprocess",
        "--input",
        s(&tmp.path().join("in")),
        "--out",
        s(&o),
        "--canvas",
        "256",
        "--patch-size",
        "64",
        "--step",
        "60",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest = read_json(&o.join("manifest.json"));
    let patches = manifest["patches"].as_array().unwrap();
    assert!(!patches.is_empty());
    for p in patches {
        assert!(o.join("patches").join(p["file"].as_str().unwrap()).exists());
    }
    assert_eq!(read_json(&o.join("config.json"))["command"], "preprocess");
}

#[test]
fn invalid_patch_config_fails_before_io() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tmp.path().join("never");
    let out = run(&[
        "preprocess",
        "--input",
        s(&tmp.path().join("missing")),
        "--out",
        s(&o),
        "--patch-size",
        "256",
        "--step",
        "300",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!o.exists());
}

#[test]
fn fullref_identical_dirs_score_perfectly() {
    let tmp = tempfile::tempdir().unwrap();
    let imgs: Vec<(String, Image)> = (0..3)
        .map(|i| (format!("p{i}.png"), textured(48, 48, i)))
        .collect();
    write_set(&tmp.path().join("a"), &imgs);
    write_set(&tmp.path().join("b"), &imgs);
    let o = tmp.path().join("o");
    let out = run(&[
        "eval-fullref",
        "--source",
        s(&tmp.path().join("a")),
        "--adapted",
        s(&tmp.path().join("b")),
        "--out",
        s(&o),
        "--metrics",
        "mse,ssim",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = MetricReport::load(&o.join("report.csv")).unwrap();
    assert_eq!(report.metrics, ["mse", "ssim"]);
    assert_eq!(report.rows.len(), 3);
    for row in &report.rows {
        assert_eq!(row.values, [0.0, 1.0]);
    }
    let json = read_json(&o.join("report.json"));
    assert_eq!(json["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn fullref_dists_without_layers_is_user_error() {
    let tmp = tempfile::tempdir().unwrap();
    let imgs = vec![("x.png".to_string(), textured(32, 32, 1))];
    write_set(&tmp.path().join("a"), &imgs);
    write_set(&tmp.path().join("b"), &imgs);
    let out = run(&[
        "eval-fullref",
        "--source",
        s(&tmp.path().join("a")),
        "--adapted",
        s(&tmp.path().join("b")),
        "--out",
        s(&tmp.path().join("o")),
        "--metrics",
        "dists",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("vgg-multilayer"));
}

#[test]
fn fullref_missing_partner_is_user_error() {
    let tmp = tempfile::tempdir().unwrap();
    write_set(
        &tmp.path().join("a"),
        &[
            ("x.png".into(), textured(32, 32, 1)),
            ("y.png".into(), textured(32, 32, 2)),
        ],
    );
    write_set(
        &tmp.path().join("b"),
        &[("x.png".into(), textured(32, 32, 1))],
    );
    let (a, b, o) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("o"),
    );
    let args = [
        "eval-fullref",
        "--source",
        s(&a),
        "--adapted",
        s(&b),
        "--out",
        s(&o),
        "--metrics",
        "mse",
    ];
    assert_eq!(run(&args).status.code(), Some(1));
    let mut partial = args.to_vec();
    partial.push("--allow-partial");
    assert!(run(&partial).status.success());
}

#[test]
fn eval_dist_reports_baseline_improvement() {
    let tmp = tempfile::tempdir().unwrap();
    let target = toy_acts(120, 1, 0.0);
    let adapted = toy_acts(120, 2, 0.02);
    let source = toy_acts(120, 3, 0.3);
    for (name, set) in [("t.npy", &target), ("a.npy", &adapted), ("s.npy", &source)] {
        write_activations(&tmp.path().join(name), set, Dtype::F32).unwrap();
    }
    let o = tmp.path().join("o");
    let out = run(&[
        "eval-dist",
        "--adapted-acts",
        s(&tmp.path().join("a.npy")),
        "--target-acts",
        s(&tmp.path().join("t.npy")),
        "--source-acts",
        s(&tmp.path().join("s.npy")),
        "--out",
        s(&o),
        "--subsets",
        "10",
        "--subset-size",
        "50",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = read_json(&o.join("results.json"));
    assert_eq!(r["fid"]["improved"], true);
    assert_eq!(r["kid"]["improved"], true);
    assert!(r["fid"]["adapted"].as_f64().unwrap() < r["fid"]["baseline"].as_f64().unwrap());
    assert!(o.join("timing.json").exists());
}

#[test]
fn eval_dist_precisions_agree() {
    let tmp = tempfile::tempdir().unwrap();
    write_activations(
        &tmp.path().join("a.npy"),
        &toy_acts(200, 4, 0.0),
        Dtype::F64,
    )
    .unwrap();
    write_activations(
        &tmp.path().join("t.npy"),
        &toy_acts(200, 5, 0.1),
        Dtype::F64,
    )
    .unwrap();
    let fid_with = |prec: &str| {
        let o = tmp.path().join(prec);
        let out = run(&[
            "eval-dist",
            "--adapted-acts",
            s(&tmp.path().join("a.npy")),
            "--target-acts",
            s(&tmp.path().join("t.npy")),
            "--out",
            s(&o),
            "--metric",
            "fid",
            "--precision",
            prec,
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let timing = read_json(&o.join("timing.json"));
        assert!(timing["fid_adapted_seconds"].as_f64().unwrap() >= 0.0);
        assert_eq!(timing["precision"], prec);
        read_json(&o.join("results.json"))["fid"]["adapted"]
            .as_f64()
            .unwrap()
    };
    let (single, double) = (fid_with("f32"), fid_with("f64"));
    assert!((single - double).abs() < 1e-2, "{single} vs {double}");
}

#[test]
fn eval_dist_rejects_truncated_npy() {
    let tmp = tempfile::tempdir().unwrap();
    let good = tmp.path().join("t.npy");
    write_activations(&good, &toy_acts(10, 1, 0.0), Dtype::F64).unwrap();
    let bytes = std::fs::read(&good).unwrap();
    let bad = tmp.path().join("bad.npy");
    std::fs::write(&bad, &bytes[..bytes.len() - 8]).unwrap();
    let out = run(&[
        "eval-dist",
        "--adapted-acts",
        s(&bad),
        "--target-acts",
        s(&good),
        "--out",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("payload length mismatch"));
}

#[test]
fn register_recovers_imposed_shifts() {
    let tmp = tempfile::tempdir().unwrap();
    let shifts = [(2i64, -1i64), (-3, 3), (0, 4)];
    let fixed: Vec<(String, Image)> = (0..3)
        .map(|i| (format!("f{i}.png"), textured(96, 96, 20 + i)))
        .collect();
    let moving: Vec<(String, Image)> = fixed
        .iter()
        .zip(shifts)
        .map(|((n, img), (dx, dy))| (n.clone(), translate(img, dx, dy)))
        .collect();
    write_set(&tmp.path().join("fixed"), &fixed);
    write_set(&tmp.path().join("moving"), &moving);
    let o = tmp.path().join("o");
    let out = run(&[
        "register",
        "--fixed",
        s(&tmp.path().join("fixed")),
        "--moving",
        s(&tmp.path().join("moving")),
        "--out",
        s(&o),
        "--max-shift",
        "6",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let j = read_json(&o.join("shifts.json"));
    let pairs = j["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 3);
    for (p, (dx, dy)) in pairs.iter().zip(shifts) {
        assert_eq!(
            (p["dx"].as_i64().unwrap(), p["dy"].as_i64().unwrap()),
            (-dx, -dy)
        );
        assert!(p["ssim_after_cropped"].as_f64().unwrap() > p["ssim_before"].as_f64().unwrap());
        assert!(o
            .join("registered")
            .join(p["file"].as_str().unwrap())
            .exists());
    }
}

#[test]
fn correlate_gives_square_matrix_and_scatter() {
    let tmp = tempfile::tempdir().unwrap();
    let names = ["a", "b", "c", "d", "e"];
    let mut report = MetricReport::new(names);
    for r in 0..8 {
        let v: Vec<f64> = (0..5)
            .map(|k| ((r * (k + 2) + k * 3) % 7) as f64 + r as f64 * 0.1)
            .collect();
        report.push_row(format!("p{r}"), v).unwrap();
    }
    report.write_csv(&tmp.path().join("report.csv")).unwrap();
    let o = tmp.path().join("o");
    let out = run(&[
        "correlate",
        "--report",
        s(&tmp.path().join("report.csv")),
        "--out",
        s(&o),
        "--scatter",
        "a:b",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(o.join("correlation.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines.iter().all(|l| l.split(',').count() == 6));
    let scatter = std::fs::read_to_string(o.join("scatter_a_b.csv")).unwrap();
    assert_eq!(scatter.lines().count(), 9);
}

#[test]
fn distort_records_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    write_set(
        &tmp.path().join("in"),
        &[
            ("x.png".into(), textured(40, 40, 3)),
            ("y.png".into(), textured(40, 40, 4)),
        ],
    );
    let o = tmp.path().join("o");
    let out = run(&[
        "distort",
        "--input",
        s(&tmp.path().join("in")),
        "--out",
        s(&o),
        "--kind",
        "shift",
        "--dx",
        "2",
        "--dy",
        "-1",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let j = read_json(&o.join("distortions.json"));
    assert_eq!(j["files"].as_array().unwrap().len(), 2);
    assert!(o.join("x.png").exists() && o.join("y.png").exists());
}

#[test]
fn extract_toy_writes_npy_with_echo() {
    let tmp = tempfile::tempdir().unwrap();
    write_set(
        &tmp.path().join("in"),
        &[
            ("x.png".into(), textured(40, 40, 3)),
            ("y.png".into(), textured(40, 40, 4)),
        ],
    );
    let npy = tmp.path().join("acts.npy");
    let out = run(&[
        "extract-toy",
        "--input",
        s(&tmp.path().join("in")),
        "--out",
        s(&npy),
        "--dim",
        "8",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let acts = i2ieval::features::load_activations(&npy).unwrap();
    assert_eq!((acts.n(), acts.d()), (2, 8));
    assert!(tmp.path().join("acts.npy.config.json").exists());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["eval-dist"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
