//! Mergeable per-image tallies.
//!
//! Every accumulator here is a commutative monoid: the all-zero value is the
//! identity and `merge` is associative and commutative. All fields are exact
//! integers, including the calibration confidence sums (kept in 64.64 fixed
//! point), so reducing per-image results in any order gives bit-identical
//! totals.

use std::iter::Sum;
use std::ops::{Add, AddAssign};

use crate::error::{Error, Result};

/// `C x C` pixel counts, entry `(g, p)` = pixels of ground truth `g` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    /// Builds a matrix from row-major counts.
    pub fn from_counts(num_classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != num_classes * num_classes {
            return Err(Error::Shape(format!(
                "{} counts do not form a {num_classes}x{num_classes} matrix",
                counts.len()
            )));
        }
        Ok(Self {
            num_classes,
            counts,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    #[inline]
    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.num_classes + predicted]
    }

    #[inline]
    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.num_classes + predicted] += 1;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes).map(|c| self.get(c, c)).sum()
    }

    pub fn true_positives(&self, class: usize) -> u64 {
        self.get(class, class)
    }

    /// Pixels predicted as `class` whose ground truth is another class.
    pub fn false_positives(&self, class: usize) -> u64 {
        (0..self.num_classes)
            .filter(|&g| g != class)
            .map(|g| self.get(g, class))
            .sum()
    }

    /// Pixels of ground truth `class` predicted as another class.
    pub fn false_negatives(&self, class: usize) -> u64 {
        (0..self.num_classes)
            .filter(|&p| p != class)
            .map(|p| self.get(class, p))
            .sum()
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.num_classes != other.num_classes {
            return Err(Error::Shape(format!(
                "cannot merge confusion matrices over {} and {} classes",
                self.num_classes, other.num_classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

pub fn merge_confusion(a: &ConfusionMatrix, b: &ConfusionMatrix) -> Result<ConfusionMatrix> {
    let mut out = a.clone();
    out.merge(b)?;
    Ok(out)
}

const FIXED_ONE: f64 = 18_446_744_073_709_551_616.0; // 2^64

/// Equal-width confidence histogram backing the expected calibration error.
///
/// Bin `m` of `M` covers `[m/M, (m+1)/M)`; the last bin is closed at 1.
/// Confidence sums are stored in 64.64 fixed point. Any `f32` confidence
/// of at least `2^-41` converts exactly, so sums are exact for every valid
/// softmax maximum with fewer than `2^41` classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalibrationBins {
    num_bins: usize,
    counts: Vec<u64>,
    correct: Vec<u64>,
    confidence: Vec<u128>,
}

impl CalibrationBins {
    pub fn new(num_bins: usize) -> Result<Self> {
        if num_bins == 0 {
            return Err(Error::InvalidArgument(
                "number of bins must be at least 1".into(),
            ));
        }
        Ok(Self {
            num_bins,
            counts: vec![0; num_bins],
            correct: vec![0; num_bins],
            confidence: vec![0; num_bins],
        })
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    /// Bin receiving `confidence`: `min(floor(confidence * M), M - 1)`.
    ///
    /// The product of an `f32` and a bin count below `2^29` is exact in
    /// `f64`, so edge placement has no rounding.
    #[inline]
    pub fn bin_index(&self, confidence: f32) -> usize {
        let m = (confidence as f64 * self.num_bins as f64).floor();
        if m <= 0.0 {
            0
        } else {
            (m as usize).min(self.num_bins - 1)
        }
    }

    #[inline]
    pub fn record(&mut self, confidence: f32, correct: bool) {
        let m = self.bin_index(confidence);
        self.counts[m] += 1;
        self.correct[m] += correct as u64;
        self.confidence[m] += (confidence.clamp(0.0, 1.0) as f64 * FIXED_ONE) as u128;
    }

    pub fn count(&self, bin: usize) -> u64 {
        self.counts[bin]
    }

    pub fn correct(&self, bin: usize) -> u64 {
        self.correct[bin]
    }

    pub fn sum_confidence(&self, bin: usize) -> f64 {
        self.confidence[bin] as f64 / FIXED_ONE
    }

    /// Confidence sum of `bin` in units of `2^-64`.
    pub fn sum_confidence_fixed(&self, bin: usize) -> u128 {
        self.confidence[bin]
    }

    pub fn total_pixels(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `[lower, upper)` edges of `bin`.
    pub fn edges(&self, bin: usize) -> (f64, f64) {
        let m = self.num_bins as f64;
        (bin as f64 / m, (bin + 1) as f64 / m)
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.num_bins != other.num_bins {
            return Err(Error::Shape(format!(
                "cannot merge calibration bins with {} and {} bins",
                self.num_bins, other.num_bins
            )));
        }
        for m in 0..self.num_bins {
            self.counts[m] += other.counts[m];
            self.correct[m] += other.correct[m];
            self.confidence[m] += other.confidence[m];
        }
        Ok(())
    }
}

pub fn merge_bins(a: &CalibrationBins, b: &CalibrationBins) -> Result<CalibrationBins> {
    let mut out = a.clone();
    out.merge(b)?;
    Ok(out)
}

/// Pixel tallies by correctness and certainty.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct UncertaintyCounts {
    /// accurate and certain
    pub n_ac: u64,
    /// inaccurate and certain
    pub n_ic: u64,
    /// inaccurate and uncertain
    pub n_iu: u64,
    /// accurate and uncertain
    pub n_au: u64,
}

impl UncertaintyCounts {
    pub fn new(n_ac: u64, n_ic: u64, n_iu: u64, n_au: u64) -> Self {
        Self {
            n_ac,
            n_ic,
            n_iu,
            n_au,
        }
    }

    #[inline]
    pub fn record(&mut self, accurate: bool, certain: bool) {
        match (accurate, certain) {
            (true, true) => self.n_ac += 1,
            (false, true) => self.n_ic += 1,
            (false, false) => self.n_iu += 1,
            (true, false) => self.n_au += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.n_ac + self.n_ic + self.n_iu + self.n_au
    }
}

impl Add for UncertaintyCounts {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            n_ac: self.n_ac + rhs.n_ac,
            n_ic: self.n_ic + rhs.n_ic,
            n_iu: self.n_iu + rhs.n_iu,
            n_au: self.n_au + rhs.n_au,
        }
    }
}

impl AddAssign for UncertaintyCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sum for UncertaintyCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

pub fn merge_uncertainty(a: UncertaintyCounts, b: UncertaintyCounts) -> UncertaintyCounts {
    a + b
}
