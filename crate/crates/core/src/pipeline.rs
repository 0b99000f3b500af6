//! Single-pass per-image evaluation and deterministic dataset reduction.

use std::borrow::Cow;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::accumulators::{CalibrationBins, ConfusionMatrix, UncertaintyCounts};
use crate::error::{Error, Result};
use crate::ingest::{load_label_map, load_probability_map, write_entropy_map, Manifest};
use crate::maps::{check_pair, LabelMap, ProbabilityMap};
use crate::report::{Metadata, MetricReport, Weights};
use crate::score::assemble_report;
use crate::segmentation::compute_iou;
use crate::uncertainty::{entropy_from_sums, lower_median, UncertaintyMap, ENTROPY_EPSILON};

/// All three accumulators for a set of pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Accumulators {
    pub confusion: ConfusionMatrix,
    pub bins: CalibrationBins,
    pub counts: UncertaintyCounts,
}

impl Accumulators {
    pub fn new(num_classes: usize, num_bins: usize) -> Result<Self> {
        Ok(Self {
            confusion: ConfusionMatrix::new(num_classes),
            bins: CalibrationBins::new(num_bins)?,
            counts: UncertaintyCounts::default(),
        })
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        self.confusion.merge(&other.confusion)?;
        self.bins.merge(&other.bins)?;
        self.counts += other.counts;
        Ok(())
    }

    pub fn pixel_count(&self) -> u64 {
        self.confusion.total()
    }

    pub fn finalize(&self, weights: &Weights, metadata: Metadata) -> Result<MetricReport> {
        let iou = compute_iou(&self.confusion)?;
        assemble_report(&iou, &self.bins, &self.counts, weights, metadata)
    }
}

#[derive(Debug, Clone)]
pub struct ImageEvaluation {
    pub accumulators: Accumulators,
    pub threshold: f64,
    pub entropy: UncertaintyMap,
}

/// Evaluates one image in a single traversal of its probabilities.
///
/// Argmax, confidence and entropy come out of one sweep over the class
/// planes; the entropies are then reused for the median threshold and the
/// certainty tallies.
pub fn evaluate_image(
    probs: &ProbabilityMap,
    labels: &LabelMap,
    num_bins: usize,
) -> Result<ImageEvaluation> {
    check_pair(probs, labels)?;
    let n = probs.num_pixels();
    let mut best: Vec<f32> = probs.plane(0).to_vec();
    let mut best_class = vec![0u16; n];
    let mut sum = vec![0.0f64; n];
    let mut plogp = vec![0.0f64; n];
    for c in 0..probs.num_classes() {
        let plane = probs.plane(c);
        for i in 0..n {
            let p = plane[i];
            let pf = p as f64;
            sum[i] += pf;
            plogp[i] += pf * pf.max(ENTROPY_EPSILON).ln();
            if p > best[i] {
                best[i] = p;
                best_class[i] = c as u16;
            }
        }
    }
    let entropy: Vec<f64> = sum
        .into_iter()
        .zip(plogp)
        .map(|(s, t)| entropy_from_sums(s, t))
        .collect();

    let mut acc = Accumulators::new(probs.num_classes(), num_bins)?;
    let mut kept = Vec::with_capacity(n);
    let ignore = labels.ignore_index();
    for (i, &label) in labels.labels().iter().enumerate() {
        if label == ignore {
            continue;
        }
        let pred = best_class[i] as usize;
        acc.confusion.record(label as usize, pred);
        acc.bins.record(best[i], pred == label as usize);
        kept.push(entropy[i]);
    }
    let threshold = lower_median(&mut kept).ok_or(Error::NoPixelsInImage)?;
    for (i, &label) in labels.labels().iter().enumerate() {
        if label == ignore {
            continue;
        }
        acc.counts.record(
            best_class[i] as usize == label as usize,
            entropy[i] < threshold,
        );
    }
    Ok(ImageEvaluation {
        accumulators: acc,
        threshold,
        entropy: UncertaintyMap::new(entropy, probs.height(), probs.width())?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalOptions {
    pub num_bins: usize,
    /// Worker threads; 0 picks the number of available cores.
    pub jobs: usize,
    /// Overrides the manifest's ignore index.
    pub ignore_index: Option<u16>,
    /// Forces renormalization on regardless of the manifest.
    pub renormalize: bool,
    /// Writes each image's entropy map to `<dir>/<image_id>.npy` when set.
    pub entropy_dir: Option<PathBuf>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            num_bins: crate::calibration::DEFAULT_NUM_BINS,
            jobs: 0,
            ignore_index: None,
            renormalize: false,
            entropy_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalStats {
    pub images: usize,
    /// Largest number of images held in memory at once.
    pub peak_in_flight: usize,
}

#[derive(Default)]
struct Gauge {
    current: AtomicUsize,
    peak: AtomicUsize,
}

impl Gauge {
    fn enter(&self) {
        let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
    }

    fn leave(&self) {
        self.current.fetch_sub(1, Ordering::SeqCst);
    }
}

/// One image handed to the evaluator: prediction, labels and an optional id
/// used in error messages. Borrowed maps are evaluated without copying.
pub type Produced<'a> = (Cow<'a, ProbabilityMap>, Cow<'a, LabelMap>, Option<String>);

/// Evaluates `count` images produced on demand by `produce`, at most `jobs` at
/// a time, and merges their accumulators.
///
/// Merging is exact integer addition, so the result does not depend on the
/// number of workers or the scheduling order. When several images fail, the
/// error of the lowest index is returned.
pub fn evaluate_indexed<'a, F>(
    count: usize,
    num_classes: usize,
    num_bins: usize,
    jobs: usize,
    produce: F,
) -> Result<(Accumulators, EvalStats)>
where
    F: Fn(usize) -> Result<Produced<'a>> + Sync,
{
    evaluate_indexed_with(count, num_classes, num_bins, jobs, produce, |_, _| Ok(()))
}

/// Like [`evaluate_indexed`], calling `inspect` with each image's id and
/// evaluation before it is dropped.
pub fn evaluate_indexed_with<'a, F, G>(
    count: usize,
    num_classes: usize,
    num_bins: usize,
    jobs: usize,
    produce: F,
    inspect: G,
) -> Result<(Accumulators, EvalStats)>
where
    F: Fn(usize) -> Result<Produced<'a>> + Sync,
    G: Fn(Option<&str>, &ImageEvaluation) -> Result<()> + Sync,
{
    let identity = Accumulators::new(num_classes, num_bins)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {jobs} workers: {e}")))?;
    let gauge = Gauge::default();

    let reduced = pool.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| -> std::result::Result<Accumulators, (usize, Error)> {
                gauge.enter();
                let out = produce(i).and_then(|(probs, labels, id)| {
                    if probs.num_classes() != num_classes {
                        return Err(Error::Shape(format!(
                            "image has {} classes, expected {num_classes}",
                            probs.num_classes()
                        )));
                    }
                    evaluate_image(&probs, &labels, num_bins)
                        .and_then(|e| {
                            inspect(id.as_deref(), &e)?;
                            Ok(e.accumulators)
                        })
                        .map_err(|e| match &id {
                            Some(id) => e.in_image(id),
                            None => e,
                        })
                });
                gauge.leave();
                out.map_err(|e| (i, e))
            })
            .reduce(
                || Ok(identity.clone()),
                |a, b| match (a, b) {
                    (Ok(mut a), Ok(b)) => {
                        a.merge(&b).map_err(|e| (usize::MAX, e))?;
                        Ok(a)
                    }
                    (Err(a), Err(b)) => Err(if a.0 <= b.0 { a } else { b }),
                    (Err(e), _) | (_, Err(e)) => Err(e),
                },
            )
    });
    let acc = reduced.map_err(|(_, e)| e)?;
    Ok((
        acc,
        EvalStats {
            images: count,
            peak_in_flight: gauge.peak.load(Ordering::SeqCst),
        },
    ))
}

/// Evaluates in-memory image pairs.
pub fn evaluate_images(
    images: &[(ProbabilityMap, LabelMap)],
    num_bins: usize,
    jobs: usize,
) -> Result<(Accumulators, EvalStats)> {
    let num_classes = images
        .first()
        .map(|(p, _)| p.num_classes())
        .ok_or(Error::NoPixels)?;
    evaluate_indexed(images.len(), num_classes, num_bins, jobs, |i| {
        let (p, l) = &images[i];
        Ok((Cow::Borrowed(p), Cow::Borrowed(l), None))
    })
}

/// Streams every manifest entry from disk through [`evaluate_image`].
pub fn evaluate_manifest(
    manifest: &Manifest,
    options: &EvalOptions,
) -> Result<(Accumulators, EvalStats)> {
    let ignore = options.ignore_index.unwrap_or(manifest.ignore_index);
    let renormalize = options.renormalize || manifest.renormalize;
    if let Some(dir) = &options.entropy_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    evaluate_indexed_with(
        manifest.entries.len(),
        manifest.num_classes,
        options.num_bins,
        options.jobs,
        |i| {
            let entry = &manifest.entries[i];
            let probs = load_probability_map(
                &manifest.prediction_path(entry),
                manifest.num_classes,
                renormalize,
            )?;
            let labels = load_label_map(&manifest.label_path(entry), manifest.num_classes, ignore)?;
            Ok((
                Cow::Owned(probs),
                Cow::Owned(labels),
                Some(entry.image_id.clone()),
            ))
        },
        |id, eval| match (&options.entropy_dir, id) {
            (Some(dir), Some(id)) => write_entropy_map(&entropy_path(dir, id), &eval.entropy),
            _ => Ok(()),
        },
    )
}

fn entropy_path(dir: &Path, image_id: &str) -> PathBuf {
    let name: String = image_id
        .chars()
        .map(|c| {
            if matches!(c, '/' | '\\' | ':') {
                '_'
            } else {
                c
            }
        })
        .collect();
    dir.join(format!("{name}.npy"))
}

/// Loads every entry once and reports the first failure in manifest order.
pub fn validate_manifest(
    manifest: &Manifest,
    ignore_index: Option<u16>,
    renormalize: bool,
) -> Result<()> {
    let ignore = ignore_index.unwrap_or(manifest.ignore_index);
    let renormalize = renormalize || manifest.renormalize;
    for entry in &manifest.entries {
        let probs = load_probability_map(
            &manifest.prediction_path(entry),
            manifest.num_classes,
            renormalize,
        )?;
        let labels = load_label_map(&manifest.label_path(entry), manifest.num_classes, ignore)?;
        check_pair(&probs, &labels).map_err(|e| e.in_image(&entry.image_id))?;
    }
    Ok(())
}
