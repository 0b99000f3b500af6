//! Reliable Segmentation Score and run-to-run deltas.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::accumulators::{CalibrationBins, UncertaintyCounts};
use crate::calibration::compute_ece;
use crate::error::{Error, Result};
use crate::report::{
    Components, CountsRecord, Flags, Metadata, MetricReport, Weights, SCHEMA_VERSION,
};
use crate::segmentation::IoUResult;
use crate::uncertainty::finalize_conditionals;

/// Weighted harmonic mean of `miou`, `1 - ece`, `p_ac` and `p_ui`.
///
/// A zero term carrying positive weight yields 0, the limit of the mean.
pub fn compute_rss(miou: f64, ece: f64, p_ac: f64, p_ui: f64, weights: &Weights) -> Result<f64> {
    weights.validate()?;
    for (name, v) in [
        ("mIoU", miou),
        ("ECE", ece),
        ("p(acc|cer)", p_ac),
        ("p(unc|inacc)", p_ui),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!(
                "{name} = {v} is outside [0, 1]"
            )));
        }
    }
    let terms = [miou, 1.0 - ece, p_ac, p_ui];
    let w = weights.as_array();
    let mut total_weight = 0.0;
    let mut denom = 0.0;
    for (&t, &wi) in terms.iter().zip(&w) {
        if wi == 0.0 {
            continue;
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        total_weight += wi;
        denom += wi / t;
    }
    Ok((total_weight / denom).min(1.0))
}

/// Finalizes every component from dataset-level accumulators and composes RSS.
pub fn assemble_report(
    iou: &IoUResult,
    bins: &CalibrationBins,
    counts: &UncertaintyCounts,
    weights: &Weights,
    metadata: Metadata,
) -> Result<MetricReport> {
    let pixels = iou.pixel_count;
    if bins.total_pixels() != pixels || counts.total() != pixels {
        return Err(Error::Consistency(format!(
            "accumulators disagree on the evaluated pixel count: confusion {pixels}, calibration {}, uncertainty {}",
            bins.total_pixels(),
            counts.total()
        )));
    }
    let ece = compute_ece(bins)?;
    let cond = finalize_conditionals(counts);
    let components = Components {
        miou: iou.miou,
        ece,
        p_acc_given_cer: cond.p_acc_given_cer,
        p_unc_given_inacc: cond.p_unc_given_inacc,
    };
    let rss = components.rss(weights)?;
    Ok(MetricReport {
        schema_version: SCHEMA_VERSION,
        components,
        rss,
        weights: *weights,
        num_bins: bins.num_bins(),
        per_class_iou: iou.per_class.clone(),
        num_present_classes: iou.num_present_classes,
        flags: Flags {
            p_acc_given_cer_degenerate: cond.acc_given_cer_degenerate,
            p_unc_given_inacc_degenerate: cond.unc_given_inacc_degenerate,
        },
        pixel_count: pixels,
        uncertainty_counts: CountsRecord {
            n_ac: counts.n_ac,
            n_ic: counts.n_ic,
            n_iu: counts.n_iu,
            n_au: counts.n_au,
        },
        metadata,
    })
}

/// `shifted - baseline` for every headline metric. A positive ECE delta means
/// calibration got worse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub miou: f64,
    pub ece: f64,
    pub p_acc_given_cer: f64,
    pub p_unc_given_inacc: f64,
    pub rss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunComparison {
    pub schema_version: u32,
    pub baseline: MetricReport,
    pub shifted: MetricReport,
    pub deltas: Deltas,
    pub warnings: Vec<String>,
}

pub fn compare_runs(baseline: &MetricReport, shifted: &MetricReport) -> RunComparison {
    let (b, s) = (&baseline.components, &shifted.components);
    let deltas = Deltas {
        miou: s.miou - b.miou,
        ece: s.ece - b.ece,
        p_acc_given_cer: s.p_acc_given_cer - b.p_acc_given_cer,
        p_unc_given_inacc: s.p_unc_given_inacc - b.p_unc_given_inacc,
        rss: shifted.rss - baseline.rss,
    };
    let mut warnings = Vec::new();
    if baseline.weights != shifted.weights {
        warnings.push(format!(
            "reports use different weights ({} vs {}); RSS values are not directly comparable",
            baseline.weights, shifted.weights
        ));
    }
    if baseline.num_bins != shifted.num_bins {
        warnings.push(format!(
            "reports use different calibration bin counts ({} vs {}); ECE values are not directly comparable",
            baseline.num_bins, shifted.num_bins
        ));
    }
    RunComparison {
        schema_version: SCHEMA_VERSION,
        baseline: baseline.clone(),
        shifted: shifted.clone(),
        deltas,
        warnings,
    }
}

/// Formats `value (delta)` at three decimals with an explicit sign on the
/// delta, e.g. `0.573 (-0.163)`.
pub fn format_with_delta(value: f64, delta: f64) -> String {
    let mut d = format!("{delta:+.3}");
    if d == "-0.000" {
        d = "+0.000".into();
    }
    format!("{value:.3} ({d})")
}

impl RunComparison {
    /// Table rows of `(metric, "shifted (delta)")`.
    pub fn rows(&self) -> Vec<(&'static str, String)> {
        let s = &self.shifted.components;
        let d = &self.deltas;
        vec![
            ("mIoU", format_with_delta(s.miou, d.miou)),
            ("ECE", format_with_delta(s.ece, d.ece)),
            (
                "p(acc|cer)",
                format_with_delta(s.p_acc_given_cer, d.p_acc_given_cer),
            ),
            (
                "p(unc|inacc)",
                format_with_delta(s.p_unc_given_inacc, d.p_unc_given_inacc),
            ),
            ("RSS", format_with_delta(self.shifted.rss, d.rss)),
        ]
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Consistency(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
