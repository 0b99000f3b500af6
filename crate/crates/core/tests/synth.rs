//! The synthetic generator checked against its own sampling model.

use segrel_core::synth::{generate, EntropyMode, SynthSpec};
use segrel_core::*;

fn spec(accuracy: f64, bias: f64, mode: EntropyMode) -> SynthSpec {
    SynthSpec {
        num_classes: 4,
        height: 64,
        width: 64,
        num_images: 10,
        target_accuracy: accuracy,
        confidence_bias: bias,
        error_entropy_mode: mode,
        seed: 2025,
    }
}

fn evaluate(spec: &SynthSpec) -> MetricReport {
    let images = generate(spec).unwrap();
    let (acc, _) = evaluate_images(&images, 15, 0).unwrap();
    acc.finalize(&Weights::equal(), Metadata::default())
        .unwrap()
}

fn binary_entropy(q: f64) -> f64 {
    -(q * q.ln() + (1.0 - q) * (1.0 - q).ln())
}

/// Entropy range of peaked and flat pixels for correctness probabilities in
/// `[lo, hi]` (both entropies decrease in q on this range).
fn entropy_ranges(lo: f64, hi: f64, c: usize) -> ((f64, f64), (f64, f64)) {
    let flat = |q: f64| binary_entropy(q) + (1.0 - q) * ((c - 1) as f64).ln();
    (
        (binary_entropy(hi), binary_entropy(lo)),
        (flat(hi), flat(lo)),
    )
}

#[test]
fn perfect_accuracy_is_perfect() {
    let r = evaluate(&spec(1.0, 0.0, EntropyMode::High));
    assert_eq!(r.components.miou, 1.0);
    assert_eq!(r.uncertainty_counts.n_ic, 0);
    assert_eq!(r.uncertainty_counts.n_iu, 0);
    assert_eq!(r.components.ece, 0.0);
}

#[test]
fn calibrated_high_entropy_errors_match_closed_form() {
    let s = spec(0.8, 0.0, EntropyMode::High);
    let w = s.spread();
    assert_eq!(w, 0.05);
    // peaked (correct) entropies lie strictly below flat (error) entropies,
    // so with 80% correct pixels the lower median sits in the peaked range
    // and every error is uncertain while every certain pixel is correct.
    let (peaked, flat) = entropy_ranges(0.8 - w, 0.8 + w, 4);
    assert!(peaked.1 < flat.0, "{peaked:?} {flat:?}");

    let r = evaluate(&s);
    let n = r.pixel_count as f64;
    assert_eq!(n, 40960.0);
    let c = r.uncertainty_counts;
    let accuracy = (c.n_ac + c.n_au) as f64 / n;
    let se = (0.8f64 * 0.2 / n).sqrt();
    assert!((accuracy - 0.8).abs() < 3.0 * se, "accuracy {accuracy}");

    // uniform labels and uniform wrong classes: IoU_c -> a / (2 - a)
    assert!(
        (r.components.miou - 0.8 / 1.2).abs() < 0.01,
        "mIoU {}",
        r.components.miou
    );
    // calibrated by construction; two populated bins of ~20k pixels each
    // leave an expected sampling gap of about 0.002
    assert!(r.components.ece < 0.02, "ECE {}", r.components.ece);
    assert_eq!(r.components.p_unc_given_inacc, 1.0);
    assert_eq!(r.components.p_acc_given_cer, 1.0);
    assert!(!r.flags.p_unc_given_inacc_degenerate && !r.flags.p_acc_given_cer_degenerate);
}

#[test]
fn low_entropy_errors_decouple_from_calibration() {
    let s = spec(0.8, 0.0, EntropyMode::Low);
    let (peaked, flat) = entropy_ranges(0.75, 0.85, 4);
    assert!(peaked.1 < flat.0);
    let r = evaluate(&s);
    assert!(r.components.ece < 0.05, "ECE {}", r.components.ece);
    assert!(r.components.p_unc_given_inacc < 0.5);
    assert_eq!(r.components.p_unc_given_inacc, 0.0);
}

#[test]
fn overconfidence_raises_ece() {
    let eces: Vec<f64> = [0.0, 0.05, 0.1]
        .iter()
        .map(|&b| evaluate(&spec(0.8, b, EntropyMode::High)).components.ece)
        .collect();
    assert!(eces[0] < eces[1] && eces[1] < eces[2], "{eces:?}");
    assert!(
        (eces[1] - 0.05).abs() < 0.01 && (eces[2] - 0.1).abs() < 0.01,
        "{eces:?}"
    );
}

#[test]
fn written_dataset_evaluates_like_memory() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = spec(0.7, 0.02, EntropyMode::High);
    s.num_images = 4;
    s.height = 12;
    let manifest = segrel_core::synth::write_dataset(&s, dir.path()).unwrap();
    let read = read_manifest(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(read.entries, manifest.entries);
    let (from_disk, _) = evaluate_manifest(&read, &EvalOptions::default()).unwrap();
    let (in_memory, _) = evaluate_images(&generate(&s).unwrap(), 15, 1).unwrap();
    assert_eq!(from_disk, in_memory);
}
