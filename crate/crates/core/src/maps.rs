//! Per-image inputs: softmax probability fields and ground-truth label maps.

use crate::error::{Error, Result};

/// Largest tolerated deviation of a pixel's channel sum from 1.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-3;

/// Label value excluded from every metric unless overridden.
pub const DEFAULT_IGNORE_INDEX: u16 = 255;

/// Softmax output for one image, stored class-major as `(classes, height, width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    values: Vec<f32>,
    num_classes: usize,
    height: usize,
    width: usize,
}

impl ProbabilityMap {
    /// Wraps a `(C, H, W)` buffer, rejecting any value outside `[0, 1]` and any
    /// pixel whose channel sum is off by more than [`PROBABILITY_SUM_TOLERANCE`].
    pub fn new(values: Vec<f32>, num_classes: usize, height: usize, width: usize) -> Result<Self> {
        let map = Self::unchecked(values, num_classes, height, width)?;
        map.check_range()?;
        map.check_sums()?;
        Ok(map)
    }

    /// Like [`ProbabilityMap::new`] but divides every pixel by its channel sum
    /// instead of enforcing the sum tolerance.
    pub fn renormalized(
        values: Vec<f32>,
        num_classes: usize,
        height: usize,
        width: usize,
    ) -> Result<Self> {
        let mut map = Self::unchecked(values, num_classes, height, width)?;
        map.check_range()?;
        let plane = map.num_pixels();
        for pixel in 0..plane {
            let sum: f64 = (0..num_classes)
                .map(|c| map.values[c * plane + pixel] as f64)
                .sum();
            if sum <= 0.0 {
                let (row, col) = map.coords(pixel);
                return Err(Error::InvalidArgument(format!(
                    "pixel (row {row}, col {col}) has zero probability mass and cannot be renormalized"
                )));
            }
            for c in 0..num_classes {
                let v = &mut map.values[c * plane + pixel];
                *v = (*v as f64 / sum) as f32;
            }
        }
        Ok(map)
    }

    /// Builds a map from per-pixel distributions given in row-major pixel order.
    pub fn from_pixels(height: usize, width: usize, pixels: &[Vec<f32>]) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(Error::Shape(format!(
                "expected {} pixels for a {height}x{width} map, got {}",
                height * width,
                pixels.len()
            )));
        }
        let num_classes = pixels.first().map_or(0, Vec::len);
        let plane = height * width;
        let mut values = vec![0.0; num_classes * plane];
        for (p, dist) in pixels.iter().enumerate() {
            if dist.len() != num_classes {
                return Err(Error::Shape(format!(
                    "pixel {p} has {} classes, expected {num_classes}",
                    dist.len()
                )));
            }
            for (c, &v) in dist.iter().enumerate() {
                values[c * plane + p] = v;
            }
        }
        Self::new(values, num_classes, height, width)
    }

    /// Every pixel gets probability `1/C` for every class.
    pub fn uniform(num_classes: usize, height: usize, width: usize) -> Result<Self> {
        let v = 1.0 / num_classes.max(1) as f32;
        Self::new(
            vec![v; num_classes * height * width],
            num_classes,
            height,
            width,
        )
    }

    fn unchecked(
        values: Vec<f32>,
        num_classes: usize,
        height: usize,
        width: usize,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "a probability map needs at least 2 classes, got {num_classes}"
            )));
        }
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("empty image {height}x{width}")));
        }
        let expected = num_classes * height * width;
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "{} values do not fill shape ({num_classes}, {height}, {width})",
                values.len()
            )));
        }
        Ok(Self {
            values,
            num_classes,
            height,
            width,
        })
    }

    fn check_range(&self) -> Result<()> {
        let plane = self.num_pixels();
        if let Some(i) = self
            .values
            .iter()
            .position(|v| !v.is_finite() || !(0.0..=1.0).contains(v))
        {
            let (row, col) = self.coords(i % plane);
            let class = i / plane;
            let v = self.values[i];
            let what = if v.is_finite() {
                "outside [0, 1]"
            } else {
                "not finite"
            };
            return Err(Error::InvalidArgument(format!(
                "probability {v} for class {class} at pixel (row {row}, col {col}) is {what}; \
                 predictions must be softmax outputs, not logits"
            )));
        }
        Ok(())
    }

    fn check_sums(&self) -> Result<()> {
        let plane = self.num_pixels();
        for pixel in 0..plane {
            let sum: f64 = (0..self.num_classes)
                .map(|c| self.values[c * plane + pixel] as f64)
                .sum();
            if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
                let (row, col) = self.coords(pixel);
                let hint = if sum > 1.5 {
                    "; this looks like unnormalized scores or logits, apply softmax before export \
                     (renormalize only corrects small drift)"
                } else {
                    "; enable renormalize to correct small drift"
                };
                return Err(Error::InvalidArgument(format!(
                    "channel sum {sum:.6} at pixel (row {row}, col {col}) deviates from 1 by more than {PROBABILITY_SUM_TOLERANCE}{hint}"
                )));
            }
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    /// Raw `(C, H, W)` buffer.
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Probability plane of one class, row-major.
    pub fn plane(&self, class: usize) -> &[f32] {
        let n = self.num_pixels();
        &self.values[class * n..(class + 1) * n]
    }

    /// Probability of `class` at flat pixel index `pixel`.
    #[inline]
    pub fn get(&self, class: usize, pixel: usize) -> f32 {
        self.values[class * self.num_pixels() + pixel]
    }

    pub(crate) fn coords(&self, pixel: usize) -> (usize, usize) {
        (pixel / self.width, pixel % self.width)
    }
}

/// Ground-truth class indices for one image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    labels: Vec<u16>,
    height: usize,
    width: usize,
    ignore_index: u16,
}

impl LabelMap {
    pub fn new(labels: Vec<u16>, height: usize, width: usize, ignore_index: u16) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("empty image {height}x{width}")));
        }
        if labels.len() != height * width {
            return Err(Error::Shape(format!(
                "{} labels do not fill a {height}x{width} image",
                labels.len()
            )));
        }
        Ok(Self {
            labels,
            height,
            width,
            ignore_index,
        })
    }

    /// Checks that every non-ignored label is a valid class index.
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if let Some((i, &v)) = self
            .labels
            .iter()
            .enumerate()
            .find(|&(_, &v)| v != self.ignore_index && v as usize >= num_classes)
        {
            return Err(Error::InvalidArgument(format!(
                "label {v} at pixel (row {}, col {}) is neither a class index below {num_classes} nor the ignore index {}",
                i / self.width,
                i % self.width,
                self.ignore_index
            )));
        }
        Ok(())
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn ignore_index(&self) -> u16 {
        self.ignore_index
    }

    #[inline]
    pub fn is_ignored(&self, pixel: usize) -> bool {
        self.labels[pixel] == self.ignore_index
    }

    /// Number of pixels that take part in evaluation.
    pub fn num_evaluated(&self) -> usize {
        self.labels
            .iter()
            .filter(|&&l| l != self.ignore_index)
            .count()
    }
}

/// Checks that a prediction/label pair can be evaluated together.
pub fn check_pair(probs: &ProbabilityMap, labels: &LabelMap) -> Result<()> {
    if probs.height() != labels.height() || probs.width() != labels.width() {
        return Err(Error::Shape(format!(
            "prediction is {}x{} but labels are {}x{}",
            probs.height(),
            probs.width(),
            labels.height(),
            labels.width()
        )));
    }
    labels.validate(probs.num_classes())
}

/// Index of the most probable class; ties go to the lowest index.
#[inline]
pub fn argmax(probs: &ProbabilityMap, pixel: usize) -> (usize, f32) {
    let mut best = 0;
    let mut best_p = probs.get(0, pixel);
    for c in 1..probs.num_classes() {
        let p = probs.get(c, pixel);
        if p > best_p {
            best = c;
            best_p = p;
        }
    }
    (best, best_p)
}
