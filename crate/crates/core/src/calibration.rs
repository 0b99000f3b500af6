//! Expected calibration error over equal-width confidence bins.

use std::io::Write;

use serde::Serialize;

use crate::accumulators::CalibrationBins;
use crate::error::{Error, Result};
use crate::maps::{argmax, check_pair, LabelMap, ProbabilityMap};

/// Bin count used unless configured otherwise.
pub const DEFAULT_NUM_BINS: usize = 15;

/// Fills bins with the max-softmax confidence and correctness of every
/// non-ignored pixel.
pub fn accumulate_bins(
    probs: &ProbabilityMap,
    labels: &LabelMap,
    num_bins: usize,
) -> Result<CalibrationBins> {
    check_pair(probs, labels)?;
    let mut bins = CalibrationBins::new(num_bins)?;
    for (pixel, &label) in labels.labels().iter().enumerate() {
        if label == labels.ignore_index() {
            continue;
        }
        let (pred, conf) = argmax(probs, pixel);
        bins.record(conf, pred == label as usize);
    }
    Ok(bins)
}

/// `sum_m |B_m|/N * |acc(B_m) - conf(B_m)|`, empty bins contributing nothing.
pub fn compute_ece(bins: &CalibrationBins) -> Result<f64> {
    let n = bins.total_pixels();
    if n == 0 {
        return Err(Error::NoPixels);
    }
    let n = n as f64;
    let ece = (0..bins.num_bins())
        .filter(|&m| bins.count(m) > 0)
        .map(|m| {
            let count = bins.count(m) as f64;
            let acc = bins.correct(m) as f64 / count;
            let conf = bins.sum_confidence(m) / count;
            count / n * (acc - conf).abs()
        })
        .sum::<f64>();
    Ok(ece.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: u64,
    pub mean_conf: Option<f64>,
    pub accuracy: Option<f64>,
}

/// Per-bin confidence vs. accuracy table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityDiagram {
    pub rows: Vec<DiagramRow>,
    pub total_pixels: u64,
}

impl ReliabilityDiagram {
    /// Recombines the rows into an expected calibration error.
    pub fn ece(&self) -> f64 {
        let n = self.total_pixels as f64;
        self.rows
            .iter()
            .filter_map(|r| Some(r.count as f64 / n * (r.accuracy? - r.mean_conf?).abs()))
            .sum()
    }

    /// Writes `bin_lo,bin_hi,count,mean_conf,accuracy`; empty bins leave the
    /// last two fields blank.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row).map_err(csv_error)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::io("<csv>", std::io::Error::other(e))
}

pub fn export_diagram(bins: &CalibrationBins) -> Result<ReliabilityDiagram> {
    let total_pixels = bins.total_pixels();
    if total_pixels == 0 {
        return Err(Error::NoPixels);
    }
    let rows = (0..bins.num_bins())
        .map(|m| {
            let (bin_lo, bin_hi) = bins.edges(m);
            let count = bins.count(m);
            let (mean_conf, accuracy) = if count == 0 {
                (None, None)
            } else {
                (
                    Some(bins.sum_confidence(m) / count as f64),
                    Some(bins.correct(m) as f64 / count as f64),
                )
            };
            DiagramRow {
                bin_lo,
                bin_hi,
                count,
                mean_conf,
                accuracy,
            }
        })
        .collect();
    Ok(ReliabilityDiagram { rows, total_pixels })
}
