//! Softmax entropy, per-image median thresholds and the conditional
//! uncertainty probabilities p(accurate | certain) and p(uncertain | inaccurate).
//!
//! A pixel is certain when its entropy is strictly below the threshold and
//! uncertain otherwise. Thresholds are the lower median of the entropies of an
//! image's non-ignored pixels.

use serde::{Deserialize, Serialize};

use crate::accumulators::UncertaintyCounts;
use crate::error::{Error, Result};
use crate::maps::{argmax, check_pair, LabelMap, ProbabilityMap};

/// Floor applied inside the logarithm so zero probabilities contribute zero.
pub const ENTROPY_EPSILON: f64 = 1e-12;

/// Shannon entropy in nats for every pixel of an image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyMap {
    values: Vec<f64>,
    height: usize,
    width: usize,
}

impl UncertaintyMap {
    pub fn new(values: Vec<f64>, height: usize, width: usize) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::Shape(format!(
                "{} entropies do not fill a {height}x{width} image",
                values.len()
            )));
        }
        Ok(Self {
            values,
            height,
            width,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Every entropy multiplied by `factor` (a change of logarithm base).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            height: self.height,
            width: self.width,
        }
    }
}

/// Entropy of one discrete distribution.
///
/// The distribution is normalized by its f64 sum first, so f32 rounding in
/// the stored probabilities cannot push the result above ln C.
#[inline]
pub fn entropy<I: IntoIterator<Item = f32>>(dist: I) -> f64 {
    let (sum, plogp) = dist.into_iter().fold((0.0, 0.0), |(s, t), p| {
        let p = p as f64;
        (s + p, t + p * p.max(ENTROPY_EPSILON).ln())
    });
    entropy_from_sums(sum, plogp)
}

/// `-Σ q ln q` for `q = p / s`, from `s = Σ p` and `Σ p ln p`.
#[inline]
pub(crate) fn entropy_from_sums(sum: f64, plogp: f64) -> f64 {
    if sum <= 0.0 {
        return 0.0;
    }
    (sum.ln() - plogp / sum).max(0.0)
}

/// Entropy of every pixel, ignored ones included.
pub fn compute_entropy(probs: &ProbabilityMap) -> UncertaintyMap {
    let c = probs.num_classes();
    let values = (0..probs.num_pixels())
        .map(|pixel| entropy((0..c).map(|k| probs.get(k, pixel))))
        .collect();
    UncertaintyMap {
        values,
        height: probs.height(),
        width: probs.width(),
    }
}

/// Lower median of the entropies at non-ignored pixels.
pub fn median_threshold(umap: &UncertaintyMap, labels: &LabelMap) -> Result<f64> {
    if umap.height != labels.height() || umap.width != labels.width() {
        return Err(Error::Shape(format!(
            "entropy map is {}x{} but labels are {}x{}",
            umap.height,
            umap.width,
            labels.height(),
            labels.width()
        )));
    }
    let mut kept: Vec<f64> = umap
        .values
        .iter()
        .zip(labels.labels())
        .filter(|&(_, &l)| l != labels.ignore_index())
        .map(|(&h, _)| h)
        .collect();
    lower_median(&mut kept).ok_or(Error::NoPixelsInImage)
}

/// Lower median by selection; reorders `values`.
pub fn lower_median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let k = (values.len() - 1) / 2;
    let (_, &mut m, _) = values.select_nth_unstable_by(k, f64::total_cmp);
    Some(m)
}

/// Tallies certainty against correctness, computing entropies internally.
pub fn accumulate_uncertainty(
    probs: &ProbabilityMap,
    labels: &LabelMap,
    threshold: f64,
) -> Result<UncertaintyCounts> {
    let umap = compute_entropy(probs);
    accumulate_uncertainty_with(probs, labels, &umap, threshold)
}

/// Same as [`accumulate_uncertainty`] with precomputed entropies.
pub fn accumulate_uncertainty_with(
    probs: &ProbabilityMap,
    labels: &LabelMap,
    umap: &UncertaintyMap,
    threshold: f64,
) -> Result<UncertaintyCounts> {
    if !threshold.is_finite() || threshold < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "uncertainty threshold must be finite and non-negative, got {threshold}"
        )));
    }
    check_pair(probs, labels)?;
    if umap.values.len() != probs.num_pixels() {
        return Err(Error::Shape("entropy map does not match prediction".into()));
    }
    let mut counts = UncertaintyCounts::default();
    for (pixel, &label) in labels.labels().iter().enumerate() {
        if label == labels.ignore_index() {
            continue;
        }
        let (pred, _) = argmax(probs, pixel);
        counts.record(pred == label as usize, umap.values[pixel] < threshold);
    }
    Ok(counts)
}

/// The two conditional probabilities, with flags marking an empty denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditionals {
    pub p_acc_given_cer: f64,
    pub p_unc_given_inacc: f64,
    /// No certain pixels; `p_acc_given_cer` is defined as 1.
    pub acc_given_cer_degenerate: bool,
    /// No inaccurate pixels; `p_unc_given_inacc` is defined as 1.
    pub unc_given_inacc_degenerate: bool,
}

pub fn finalize_conditionals(counts: &UncertaintyCounts) -> Conditionals {
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            (1.0, true)
        } else {
            (num as f64 / den as f64, false)
        }
    };
    let (p_acc_given_cer, acc_given_cer_degenerate) = ratio(counts.n_ac, counts.n_ac + counts.n_ic);
    let (p_unc_given_inacc, unc_given_inacc_degenerate) =
        ratio(counts.n_iu, counts.n_iu + counts.n_ic);
    Conditionals {
        p_acc_given_cer,
        p_unc_given_inacc,
        acc_given_cer_degenerate,
        unc_given_inacc_degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_has_zero_entropy() {
        assert_eq!(entropy([0.0, 1.0, 0.0]), 0.0);
    }

    #[test]
    fn uniform_has_log_c() {
        let h = entropy(std::iter::repeat_n(1.0 / 19.0, 19));
        assert!((h - 19f64.ln()).abs() < 1e-6);
        assert!((h - 2.9444).abs() < 1e-4);
    }

    #[test]
    fn rounded_uniform_stays_below_log_c() {
        for c in 2..=256 {
            let h = entropy(std::iter::repeat_n(1.0 / c as f32, c));
            assert!(h <= (c as f64).ln() + 1e-12, "C = {c}");
        }
    }

    #[test]
    fn measured_on_the_normalized_distribution() {
        let a = entropy([0.7f32, 0.2, 0.1]);
        let b = entropy([0.7007f32, 0.2002, 0.1001]);
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn three_class_value() {
        // -(0.7 ln 0.7 + 0.2 ln 0.2 + 0.1 ln 0.1) = 0.8018185525433372
        let h = entropy([0.7f32, 0.2, 0.1]);
        assert!((h - 0.801_818_552_543_337_2).abs() < 1e-7);
    }

    fn umap(values: &[f64]) -> (UncertaintyMap, LabelMap) {
        let n = values.len();
        (
            UncertaintyMap::new(values.to_vec(), 1, n).unwrap(),
            LabelMap::new(vec![0; n], 1, n, 255).unwrap(),
        )
    }

    #[test]
    fn medians() {
        let (u, l) = umap(&[0.3, 0.1, 0.2]);
        assert_eq!(median_threshold(&u, &l).unwrap(), 0.2);
        let (u, l) = umap(&[0.4, 0.2, 0.1, 0.3]);
        assert_eq!(median_threshold(&u, &l).unwrap(), 0.2);
        let (u, l) = umap(&[0.7; 5]);
        assert_eq!(median_threshold(&u, &l).unwrap(), 0.7);
    }

    #[test]
    fn median_skips_ignored_pixels() {
        let u = UncertaintyMap::new(vec![9.0, 0.1, 0.2, 0.3], 2, 2).unwrap();
        let l = LabelMap::new(vec![255, 0, 0, 0], 2, 2, 255).unwrap();
        assert_eq!(median_threshold(&u, &l).unwrap(), 0.2);
        let l = LabelMap::new(vec![255; 4], 2, 2, 255).unwrap();
        assert!(matches!(
            median_threshold(&u, &l),
            Err(Error::NoPixelsInImage)
        ));
    }

    #[test]
    fn four_pixel_tally() {
        // entropies 0.1, 0.1, 0.9, 0.9 with correctness ✓ ✗ ✗ ✓
        let probs = ProbabilityMap::from_pixels(
            1,
            4,
            &[
                vec![0.9, 0.1],
                vec![0.9, 0.1],
                vec![0.6, 0.4],
                vec![0.6, 0.4],
            ],
        )
        .unwrap();
        let labels = LabelMap::new(vec![0, 1, 1, 0], 1, 4, 255).unwrap();
        let u = UncertaintyMap::new(vec![0.1, 0.1, 0.9, 0.9], 1, 4).unwrap();
        let c = accumulate_uncertainty_with(&probs, &labels, &u, 0.5).unwrap();
        assert_eq!(c, UncertaintyCounts::new(1, 1, 1, 1));
    }

    #[test]
    fn perfect_predictions_are_certain() {
        let probs =
            ProbabilityMap::from_pixels(1, 3, &[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]])
                .unwrap();
        let labels = LabelMap::new(vec![0, 1, 0], 1, 3, 255).unwrap();
        let c = accumulate_uncertainty(&probs, &labels, 0.3).unwrap();
        assert_eq!(c, UncertaintyCounts::new(3, 0, 0, 0));
    }

    #[test]
    fn threshold_ties_are_uncertain() {
        let probs = ProbabilityMap::uniform(3, 2, 2).unwrap();
        let labels = LabelMap::new(vec![0, 1, 2, 0], 2, 2, 255).unwrap();
        let u = compute_entropy(&probs);
        let t = median_threshold(&u, &labels).unwrap();
        let c = accumulate_uncertainty_with(&probs, &labels, &u, t).unwrap();
        assert_eq!(c.n_ac + c.n_ic, 0);
        assert_eq!(c.total(), 4);
    }

    #[test]
    fn bad_threshold() {
        let probs = ProbabilityMap::uniform(3, 1, 1).unwrap();
        let labels = LabelMap::new(vec![0], 1, 1, 255).unwrap();
        assert!(accumulate_uncertainty(&probs, &labels, f64::NAN).is_err());
        assert!(accumulate_uncertainty(&probs, &labels, -0.1).is_err());
    }

    #[test]
    fn conditionals() {
        let c = finalize_conditionals(&UncertaintyCounts::new(8, 2, 3, 0));
        assert_eq!((c.p_acc_given_cer, c.p_unc_given_inacc), (0.8, 0.6));
        assert!(!c.acc_given_cer_degenerate && !c.unc_given_inacc_degenerate);

        let c = finalize_conditionals(&UncertaintyCounts::new(10, 0, 0, 0));
        assert_eq!((c.p_acc_given_cer, c.p_unc_given_inacc), (1.0, 1.0));
        assert!(c.unc_given_inacc_degenerate && !c.acc_given_cer_degenerate);

        let c = finalize_conditionals(&UncertaintyCounts::new(0, 5, 5, 0));
        assert_eq!((c.p_acc_given_cer, c.p_unc_given_inacc), (0.0, 0.5));
    }
}
