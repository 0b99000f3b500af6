//! Confusion-matrix accumulation and intersection-over-union.

use serde::{Deserialize, Serialize};

use crate::accumulators::ConfusionMatrix;
use crate::error::{Error, Result};
use crate::maps::{argmax, check_pair, LabelMap, ProbabilityMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoUResult {
    /// `None` for classes that neither occur in the ground truth nor get predicted.
    pub per_class: Vec<Option<f64>>,
    /// Mean over the present classes.
    pub miou: f64,
    pub num_present_classes: usize,
    pub pixel_count: u64,
}

/// Tallies `counts[truth][argmax]` over every non-ignored pixel.
pub fn accumulate_confusion(probs: &ProbabilityMap, labels: &LabelMap) -> Result<ConfusionMatrix> {
    check_pair(probs, labels)?;
    let mut cm = ConfusionMatrix::new(probs.num_classes());
    for (pixel, &label) in labels.labels().iter().enumerate() {
        if label == labels.ignore_index() {
            continue;
        }
        let (pred, _) = argmax(probs, pixel);
        cm.record(label as usize, pred);
    }
    Ok(cm)
}

pub fn compute_iou(cm: &ConfusionMatrix) -> Result<IoUResult> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::NoPixels);
    }
    let per_class: Vec<Option<f64>> = (0..cm.num_classes())
        .map(|c| {
            let tp = cm.true_positives(c);
            let denom = tp + cm.false_positives(c) + cm.false_negatives(c);
            (denom > 0).then(|| tp as f64 / denom as f64)
        })
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    let miou = present.iter().sum::<f64>() / present.len() as f64;
    Ok(IoUResult {
        num_present_classes: present.len(),
        per_class,
        miou,
        pixel_count: total,
    })
}
