//! Deterministic synthetic datasets with known accuracy, calibration and
//! error-entropy structure.
//!
//! Sampling model, per pixel in row-major order:
//!
//! 1. the ground-truth label is uniform over the `C` classes;
//! 2. a correctness probability `q` is drawn uniformly from
//!    `[a - w, a + w]`, where `a` is the target accuracy and
//!    `w = min(0.05, 1 - a, a - (1/C + 0.001))` (zero when negative);
//! 3. the pixel is correct with probability `q`; an incorrect pixel predicts
//!    a uniformly chosen wrong class;
//! 4. the predicted class receives confidence `clamp(q + bias, 1/C + 0.001, 1)`;
//! 5. the remaining mass is either *peaked* (as much as possible on one
//!    runner-up class, never reaching the confidence, any rest spread evenly)
//!    or *flat* (spread evenly over the other `C - 1` classes).
//!
//! With [`EntropyMode::High`] correct pixels are peaked and errors flat, so
//! errors sit above the median entropy; [`EntropyMode::Low`] swaps the two.
//! The runner-up of a correct pixel is a random other class; the runner-up of
//! an error is the true class.
//!
//! Image `i` is drawn from a ChaCha8 stream seeded with
//! `splitmix64(seed ^ i)`, so images can be generated independently and in
//! any order.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    write_label_map, write_probability_map, Manifest, ManifestEntry, MANIFEST_SCHEMA_VERSION,
};
use crate::maps::{LabelMap, ProbabilityMap, DEFAULT_IGNORE_INDEX};

/// Largest half-width of the per-pixel correctness probability.
pub const MAX_SPREAD: f64 = 0.05;
/// Smallest gap kept between the confidence and `1/C`.
pub const CONFIDENCE_MARGIN: f64 = 1e-3;
/// Runner-up share of the confidence in a peaked distribution, when the
/// remaining mass would otherwise exceed it.
const RUNNER_UP_CAP: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyMode {
    /// Errors get peaked, low-entropy distributions.
    Low,
    /// Errors get flat, high-entropy distributions.
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub height: usize,
    pub width: usize,
    pub num_images: usize,
    pub target_accuracy: f64,
    /// Added to every confidence; positive values make the model overconfident.
    #[serde(default)]
    pub confidence_bias: f64,
    pub error_entropy_mode: EntropyMode,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidArgument(m));
        if self.num_classes < 2 || self.num_classes > u16::MAX as usize {
            return fail(format!(
                "num_classes must be in [2, 65535], got {}",
                self.num_classes
            ));
        }
        if self.height == 0 || self.width == 0 || self.num_images == 0 {
            return fail("height, width and num_images must be positive".into());
        }
        if !(self.target_accuracy > 0.0 && self.target_accuracy <= 1.0) {
            return fail(format!(
                "target_accuracy must be in (0, 1], got {}",
                self.target_accuracy
            ));
        }
        if !self.confidence_bias.is_finite() {
            return fail("confidence_bias must be finite".into());
        }
        Ok(())
    }

    /// Half-width of the uniform correctness-probability distribution.
    pub fn spread(&self) -> f64 {
        let floor = 1.0 / self.num_classes as f64 + CONFIDENCE_MARGIN;
        let a = self.target_accuracy;
        MAX_SPREAD.min(1.0 - a).min(a - floor).max(0.0)
    }

    pub fn ignore_index(&self) -> u16 {
        if self.num_classes <= DEFAULT_IGNORE_INDEX as usize {
            DEFAULT_IGNORE_INDEX
        } else {
            u16::MAX
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("invalid synth spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of the random stream for image `index`.
pub fn image_seed(seed: u64, index: usize) -> u64 {
    splitmix64(seed ^ index as u64)
}

/// Draws image `index` of the dataset described by `spec`.
pub fn generate_image(spec: &SynthSpec, index: usize) -> Result<(ProbabilityMap, LabelMap)> {
    spec.validate()?;
    let c = spec.num_classes;
    let n = spec.height * spec.width;
    let a = spec.target_accuracy;
    let w = spec.spread();
    let floor = 1.0 / c as f64 + CONFIDENCE_MARGIN;
    let mut rng = ChaCha8Rng::seed_from_u64(image_seed(spec.seed, index));

    let mut values = vec![0.0f32; c * n];
    let mut labels = Vec::with_capacity(n);
    let mut dist = vec![0.0f64; c];
    for pixel in 0..n {
        let label = rng.gen_range(0..c);
        let q = if w > 0.0 {
            rng.gen_range(a - w..=a + w)
        } else {
            a
        };
        let correct = rng.gen::<f64>() < q;
        let pred = if correct {
            label
        } else {
            other_class(&mut rng, c, label)
        };
        let conf = (q + spec.confidence_bias).clamp(floor, 1.0);

        let peaked = match spec.error_entropy_mode {
            EntropyMode::High => correct,
            EntropyMode::Low => !correct,
        };
        let runner = if correct {
            other_class(&mut rng, c, pred)
        } else {
            label
        };
        fill_distribution(&mut dist, pred, runner, conf, peaked);
        for (k, &p) in dist.iter().enumerate() {
            values[k * n + pixel] = p as f32;
        }
        labels.push(label as u16);
    }
    let probs = ProbabilityMap::new(values, c, spec.height, spec.width)?;
    let labels = LabelMap::new(labels, spec.height, spec.width, spec.ignore_index())?;
    Ok((probs, labels))
}

fn other_class(rng: &mut ChaCha8Rng, num_classes: usize, excluded: usize) -> usize {
    let r = rng.gen_range(0..num_classes - 1);
    if r >= excluded {
        r + 1
    } else {
        r
    }
}

fn fill_distribution(dist: &mut [f64], pred: usize, runner: usize, conf: f64, peaked: bool) {
    let c = dist.len();
    let rest = 1.0 - conf;
    if peaked && c > 2 {
        let top = rest.min(RUNNER_UP_CAP * conf);
        let each = (rest - top) / (c - 2) as f64;
        dist.fill(each);
        dist[runner] = top;
    } else {
        dist.fill(rest / (c - 1) as f64);
    }
    dist[pred] = conf;
}

/// Draws the whole dataset.
pub fn generate(spec: &SynthSpec) -> Result<Vec<(ProbabilityMap, LabelMap)>> {
    (0..spec.num_images)
        .map(|i| generate_image(spec, i))
        .collect()
}

/// Writes `manifest.json`, `predictions/NNNNN.npy` and `labels/NNNNN.npy`
/// under `dir` and returns the manifest.
pub fn write_dataset(spec: &SynthSpec, dir: &Path) -> Result<Manifest> {
    spec.validate()?;
    for sub in ["predictions", "labels"] {
        let d = dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut entries = Vec::with_capacity(spec.num_images);
    for i in 0..spec.num_images {
        let (probs, labels) = generate_image(spec, i)?;
        let prediction_path = PathBuf::from(format!("predictions/{i:05}.npy"));
        let label_path = PathBuf::from(format!("labels/{i:05}.npy"));
        write_probability_map(&dir.join(&prediction_path), &probs)?;
        write_label_map(&dir.join(&label_path), &labels)?;
        entries.push(ManifestEntry {
            image_id: format!("synth_{i:05}"),
            prediction_path,
            label_path,
        });
    }
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        num_classes: spec.num_classes,
        ignore_index: spec.ignore_index(),
        renormalize: false,
        entries,
        base_dir: dir.to_path_buf(),
    };
    manifest.write(&dir.join("manifest.json"))?;
    Ok(manifest)
}
