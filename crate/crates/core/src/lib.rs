//! Reliability-aware evaluation of semantic segmentation.
//!
//! The crate measures four things about a segmentation model's softmax
//! output and composes them into the Reliable Segmentation Score (RSS):
//!
//! * mean intersection-over-union of the argmax prediction,
//! * expected calibration error of the max-softmax confidence,
//! * p(accurate | certain) and p(uncertain | inaccurate), where a pixel is
//!   certain when its softmax entropy is below the median entropy of its
//!   image.
//!
//! RSS is the weighted harmonic mean of mIoU, 1 - ECE and the two
//! conditional probabilities, so a weak component drags the score down.
//!
//! Per-image results live in mergeable accumulators ([`ConfusionMatrix`],
//! [`CalibrationBins`], [`UncertaintyCounts`]) whose fields are exact
//! integers; datasets can be evaluated in parallel and reduced in any order
//! with bit-identical results.
//!
//! ```
//! use segrel_core::{evaluate_image, LabelMap, ProbabilityMap, Weights, Metadata};
//!
//! let probs = ProbabilityMap::from_pixels(1, 3, &[
//!     vec![0.9, 0.1], vec![0.2, 0.8], vec![0.6, 0.4],
//! ]).unwrap();
//! let labels = LabelMap::new(vec![0, 1, 1], 1, 3, 255).unwrap();
//! let eval = evaluate_image(&probs, &labels, 15).unwrap();
//! let report = eval.accumulators.finalize(&Weights::equal(), Metadata::default()).unwrap();
//! assert!(report.rss > 0.0 && report.rss <= 1.0);
//! ```

pub mod accumulators;
pub mod calibration;
pub mod error;
pub mod ingest;
pub mod maps;
pub mod pipeline;
pub mod report;
pub mod score;
pub mod segmentation;
pub mod synth;
pub mod uncertainty;

pub use accumulators::{
    merge_bins, merge_confusion, merge_uncertainty, CalibrationBins, ConfusionMatrix,
    UncertaintyCounts,
};
pub use calibration::{
    accumulate_bins, compute_ece, export_diagram, ReliabilityDiagram, DEFAULT_NUM_BINS,
};
pub use error::{Error, ErrorKind, Result};
pub use ingest::{load_label_map, load_probability_map, read_manifest, Manifest, ManifestEntry};
pub use maps::{LabelMap, ProbabilityMap, DEFAULT_IGNORE_INDEX};
pub use pipeline::{
    evaluate_image, evaluate_images, evaluate_manifest, validate_manifest, Accumulators,
    EvalOptions, EvalStats,
};
pub use report::{Components, Flags, Metadata, MetricReport, Weights, SCHEMA_VERSION};
pub use score::{assemble_report, compare_runs, compute_rss, format_with_delta, RunComparison};
pub use segmentation::{accumulate_confusion, compute_iou, IoUResult};
pub use synth::{EntropyMode, SynthSpec};
pub use uncertainty::{
    accumulate_uncertainty, compute_entropy, finalize_conditionals, median_threshold, Conditionals,
    UncertaintyMap,
};
