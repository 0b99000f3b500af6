use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use segrel_core::ingest::{write_label_map, write_probability_map};
use segrel_core::{LabelMap, MetricReport, ProbabilityMap};
use serde_json::Value;

fn segrel(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segrel"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn segrel")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path, spec: &str) -> PathBuf {
    std::fs::write(dir.join("spec.json"), spec).unwrap();
    let o = segrel(&["synth", "--spec", "spec.json", "--out", "data"], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join("data/manifest.json")
}

const PERFECT: &str = r#"{"num_classes": 3, "height": 8, "width": 8, "num_images": 3,
    "target_accuracy": 1.0, "error_entropy_mode": "high", "seed": 1}"#;

const TYPICAL: &str = r#"{"num_classes": 4, "height": 64, "width": 64, "num_images": 10,
    "target_accuracy": 0.8, "confidence_bias": 0.0, "error_entropy_mode": "high", "seed": 3}"#;

#[test]
fn perfect_predictions_summary() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), PERFECT);
    let o = segrel(&["eval", "--manifest", "data/manifest.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    // every entropy is zero, so no pixel falls strictly below the median:
    // both conditionals have empty denominators
    assert_eq!(
        stdout(&o).trim(),
        "mIoU 1.000 | ECE 0.000 | p(acc|cer) 1.000* | p(unc|inacc) 1.000* | RSS 1.000"
    );
    let report = MetricReport::read(&dir.path().join("report.json")).unwrap();
    assert!(report.flags.p_unc_given_inacc_degenerate);
    assert_eq!(report.pixel_count, 3 * 64);
}

#[test]
fn typical_dataset_matches_generator_expectations() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), TYPICAL);
    let o = segrel(
        &[
            "eval",
            "--manifest",
            "data/manifest.json",
            "--out",
            "r.json",
            "--csv",
            "r.csv",
            "--name",
            "typ",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r = MetricReport::read(&dir.path().join("r.json")).unwrap();
    assert!(
        (r.components.miou - 0.8 / 1.2).abs() < 0.01,
        "{}",
        r.components.miou
    );
    assert!(r.components.ece < 0.02);
    assert_eq!(r.components.p_unc_given_inacc, 1.0);
    assert_eq!(r.metadata.name.as_deref(), Some("typ"));
    assert!(r.metadata.timestamp.is_some());
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("name,miou,ece,p_acc_given_cer,p_unc_given_inacc,rss,pixel_count")
    );
    assert!(lines.next().unwrap().starts_with("typ,"));
}

#[test]
fn missing_prediction_is_a_load_error_naming_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), PERFECT);
    std::fs::remove_file(dir.path().join("data/predictions/00001.npy")).unwrap();
    let o = segrel(
        &["eval", "--manifest", manifest.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("00001.npy"), "{}", stderr(&o));
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn bad_label_is_reported_with_file_and_pixel() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), PERFECT);
    let path = dir.path().join("data/labels/00002.npy");
    let mut labels = vec![0u16; 64];
    labels[8 * 5 + 6] = 7;
    write_label_map(&path, &LabelMap::new(labels, 8, 8, 255).unwrap()).unwrap();
    let o = segrel(
        &["validate", "--manifest", "data/manifest.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("00002.npy"), "{err}");
    assert!(err.contains("row 5") && err.contains("col 6"), "{err}");

    let ok = tempfile::tempdir().unwrap();
    synth(ok.path(), PERFECT);
    let o = segrel(&["validate", "--manifest", "data/manifest.json"], ok.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "OK");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), PERFECT);
    for args in [
        &["eval", "--manifest", "data/manifest.json", "--bins", "0"][..],
        &[
            "eval",
            "--manifest",
            "data/manifest.json",
            "--weights",
            "0,0,0,0",
        ][..],
        &[
            "eval",
            "--manifest",
            "data/manifest.json",
            "--weights",
            "1,1,1",
        ][..],
        &["frobnicate"][..],
    ] {
        let o = segrel(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn fully_ignored_image_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), PERFECT);
    write_label_map(
        &dir.path().join("data/labels/00000.npy"),
        &LabelMap::new(vec![255; 64], 8, 8, 255).unwrap(),
    )
    .unwrap();
    let o = segrel(&["eval", "--manifest", "data/manifest.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("synth_00000"), "{}", stderr(&o));
}

#[test]
fn renormalize_flag_accepts_unnormalized_scores() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("d")).unwrap();
    // write a valid map, then scale its payload by 1.2 in place
    let map = ProbabilityMap::from_pixels(2, 2, &vec![vec![0.5, 0.25, 0.25]; 4]).unwrap();
    write_probability_map(&dir.path().join("d/p.npy"), &map).unwrap();
    let mut bytes = std::fs::read(dir.path().join("d/p.npy")).unwrap();
    let header = bytes.len() - map.values().len() * 4;
    for (i, v) in map.values().iter().enumerate() {
        bytes[header + 4 * i..header + 4 * i + 4].copy_from_slice(&(v * 1.2).to_le_bytes());
    }
    std::fs::write(dir.path().join("d/p.npy"), bytes).unwrap();
    write_label_map(
        &dir.path().join("d/l.npy"),
        &LabelMap::new(vec![0; 4], 2, 2, 255).unwrap(),
    )
    .unwrap();
    std::fs::write(
        dir.path().join("m.json"),
        r#"{"num_classes": 3, "entries": [{"image_id": "a", "prediction_path": "d/p.npy", "label_path": "d/l.npy"}]}"#,
    )
    .unwrap();

    let o = segrel(&["eval", "--manifest", "m.json"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("renormalize"), "{}", stderr(&o));

    let o = segrel(
        &["eval", "--manifest", "m.json", "--renormalize"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r = MetricReport::read(&dir.path().join("report.json")).unwrap();
    assert_eq!(r.components.miou, 1.0);
    assert!((r.components.ece - 0.5).abs() < 1e-9);
}

fn write_report(path: &Path, miou: f64, ece: f64, weights: &str) {
    let text = format!(
        r#"{{"schema_version": 1,
            "components": {{"miou": {miou}, "ece": {ece}, "p_acc_given_cer": 0.9, "p_unc_given_inacc": 0.7}},
            "rss": 0.8, "weights": {weights}, "num_bins": 15,
            "per_class_iou": [], "num_present_classes": 0,
            "flags": {{"p_acc_given_cer_degenerate": false, "p_unc_given_inacc_degenerate": false}},
            "pixel_count": 0,
            "uncertainty_counts": {{"n_ac": 0, "n_ic": 0, "n_iu": 0, "n_au": 0}},
            "metadata": {{"name": null, "manifest": null, "timestamp": null}}}}"#
    );
    std::fs::write(path, text).unwrap();
}

const EQUAL: &str =
    r#"{"miou": 1.0, "ece": 1.0, "p_acc_given_cer": 1.0, "p_unc_given_inacc": 1.0}"#;

#[test]
fn compare_prints_shifted_values_with_deltas() {
    let dir = tempfile::tempdir().unwrap();
    write_report(&dir.path().join("a.json"), 0.736, 0.016, EQUAL);
    write_report(&dir.path().join("b.json"), 0.573, 0.063, EQUAL);
    let o = segrel(
        &[
            "compare",
            "--baseline",
            "a.json",
            "--shifted",
            "b.json",
            "--out",
            "c.json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "mIoU         0.573 (-0.163)");
    assert_eq!(lines[1], "ECE          0.063 (+0.047)");
    assert!(stderr(&o).is_empty());
    let cmp: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.json")).unwrap()).unwrap();
    assert!((cmp["deltas"]["miou"].as_f64().unwrap() + 0.163).abs() < 1e-12);
}

#[test]
fn self_comparison_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    write_report(&dir.path().join("a.json"), 0.7, 0.03, EQUAL);
    let o = segrel(
        &["compare", "--baseline", "a.json", "--shifted", "a.json"],
        dir.path(),
    );
    assert!(o.status.success());
    for line in stdout(&o).lines() {
        assert!(line.ends_with("(+0.000)"), "{line}");
    }
}

#[test]
fn compare_warns_on_mismatched_weights() {
    let dir = tempfile::tempdir().unwrap();
    write_report(&dir.path().join("a.json"), 0.7, 0.03, EQUAL);
    write_report(
        &dir.path().join("b.json"),
        0.6,
        0.05,
        r#"{"miou": 1.0, "ece": 0.5, "p_acc_given_cer": 0.5, "p_unc_given_inacc": 0.5}"#,
    );
    let o = segrel(
        &["compare", "--baseline", "a.json", "--shifted", "b.json"],
        dir.path(),
    );
    assert!(o.status.success());
    assert!(stderr(&o).starts_with("warning: "), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 5);
}

#[test]
fn compare_rejects_unknown_schema_version() {
    let dir = tempfile::tempdir().unwrap();
    write_report(&dir.path().join("a.json"), 0.7, 0.03, EQUAL);
    let text = std::fs::read_to_string(dir.path().join("a.json")).unwrap();
    std::fs::write(
        dir.path().join("b.json"),
        text.replace("\"schema_version\": 1", "\"schema_version\": 2"),
    )
    .unwrap();
    let o = segrel(
        &["compare", "--baseline", "a.json", "--shifted", "b.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("b.json"), "{}", stderr(&o));
}

#[test]
fn diagram_of_perfect_data_fills_only_the_top_bin() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), PERFECT);
    let o = segrel(
        &[
            "diagram",
            "--manifest",
            "data/manifest.json",
            "--out",
            "d.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "bin_lo,bin_hi,count,mean_conf,accuracy");
    assert_eq!(rows.len(), 16);
    for row in &rows[1..15] {
        assert!(row.ends_with(",0,,"), "{row}");
    }
    assert!(rows[15].ends_with(",192,1.0,1.0"), "{}", rows[15]);
}

#[test]
fn synth_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth(a.path(), TYPICAL);
    synth(b.path(), TYPICAL);
    for sub in [
        "manifest.json",
        "predictions/00000.npy",
        "predictions/00009.npy",
        "labels/00004.npy",
    ] {
        let x = std::fs::read(a.path().join("data").join(sub)).unwrap();
        let y = std::fs::read(b.path().join("data").join(sub)).unwrap();
        assert!(x == y, "{sub} differs");
    }
}

#[test]
fn entropy_maps_are_exported_per_image() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), TYPICAL);
    let o = segrel(
        &[
            "eval",
            "--manifest",
            "data/manifest.json",
            "--entropy-dir",
            "ent",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let map =
        segrel_core::ingest::load_entropy_map(&dir.path().join("ent/synth_00003.npy")).unwrap();
    assert_eq!((map.height(), map.width()), (64, 64));
    assert!(map
        .values()
        .iter()
        .all(|&h| (0.0..=4f64.ln() + 1e-9).contains(&h)));
}

#[test]
fn jobs_do_not_change_the_report() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), TYPICAL);
    let mut reports = Vec::new();
    for jobs in ["1", "3"] {
        let out = format!("r{jobs}.json");
        let o = segrel(
            &[
                "eval",
                "--manifest",
                "data/manifest.json",
                "--jobs",
                jobs,
                "--out",
                &out,
            ],
            dir.path(),
        );
        assert!(o.status.success());
        let mut r = MetricReport::read(&dir.path().join(out)).unwrap();
        r.metadata.timestamp = None;
        reports.push(r);
    }
    assert_eq!(reports[0], reports[1]);
}
