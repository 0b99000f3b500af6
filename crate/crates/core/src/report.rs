//! Serializable evaluation results.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::compute_rss;

/// Version of the report and comparison JSON documents.
pub const SCHEMA_VERSION: u32 = 1;

/// Harmonic-mean weights for mIoU, 1 - ECE, p(acc|cer) and p(unc|inacc).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub miou: f64,
    pub ece: f64,
    pub p_acc_given_cer: f64,
    pub p_unc_given_inacc: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self::equal()
    }
}

impl Weights {
    pub fn new(miou: f64, ece: f64, p_acc_given_cer: f64, p_unc_given_inacc: f64) -> Result<Self> {
        let w = Self {
            miou,
            ece,
            p_acc_given_cer,
            p_unc_given_inacc,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn equal() -> Self {
        Self {
            miou: 1.0,
            ece: 1.0,
            p_acc_given_cer: 1.0,
            p_unc_given_inacc: 1.0,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [
            self.miou,
            self.ece,
            self.p_acc_given_cer,
            self.p_unc_given_inacc,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.as_array();
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weights must be finite and non-negative, got {self}"
            )));
        }
        if w.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidArgument(
                "at least one weight must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for Weights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{}",
            self.miou, self.ece, self.p_acc_given_cer, self.p_unc_given_inacc
        )
    }
}

impl FromStr for Weights {
    type Err = Error;

    /// Parses `w1,w2,w3,w4`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("invalid weight {p:?}")))
            })
            .collect::<Result<_>>()?;
        match parts[..] {
            [a, b, c, d] => Self::new(a, b, c, d),
            _ => Err(Error::InvalidArgument(format!(
                "expected four comma-separated weights, got {}",
                parts.len()
            ))),
        }
    }
}

/// The four metrics RSS is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub miou: f64,
    pub ece: f64,
    pub p_acc_given_cer: f64,
    pub p_unc_given_inacc: f64,
}

impl Components {
    pub fn rss(&self, weights: &Weights) -> Result<f64> {
        compute_rss(
            self.miou,
            self.ece,
            self.p_acc_given_cer,
            self.p_unc_given_inacc,
            weights,
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    /// No pixel was certain; p(acc|cer) reported as 1.
    pub p_acc_given_cer_degenerate: bool,
    /// No pixel was inaccurate; p(unc|inacc) reported as 1.
    pub p_unc_given_inacc_degenerate: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub name: Option<String>,
    pub manifest: Option<String>,
    pub timestamp: Option<String>,
}

/// Raw tallies behind the conditional uncertainty metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsRecord {
    pub n_ac: u64,
    pub n_ic: u64,
    pub n_iu: u64,
    pub n_au: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema_version: u32,
    pub components: Components,
    pub rss: f64,
    pub weights: Weights,
    pub num_bins: usize,
    pub per_class_iou: Vec<Option<f64>>,
    pub num_present_classes: usize,
    pub flags: Flags,
    pub pixel_count: u64,
    pub uncertainty_counts: CountsRecord,
    pub metadata: Metadata,
}

impl MetricReport {
    /// Recomputes RSS from the stored components and weights.
    pub fn recomputed_rss(&self) -> Result<f64> {
        self.components.rss(&self.weights)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Consistency(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("not a metric report: {e}")))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported report schema version {} (expected {SCHEMA_VERSION})",
                report.schema_version
            )));
        }
        report.weights.validate()?;
        Ok(report)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// One line with the five headline metrics to three decimals; an
    /// asterisk marks a degenerate conditional.
    pub fn summary_line(&self) -> String {
        let star = |b: bool| if b { "*" } else { "" };
        format!(
            "mIoU {:.3} | ECE {:.3} | p(acc|cer) {:.3}{} | p(unc|inacc) {:.3}{} | RSS {:.3}",
            self.components.miou,
            self.components.ece,
            self.components.p_acc_given_cer,
            star(self.flags.p_acc_given_cer_degenerate),
            self.components.p_unc_given_inacc,
            star(self.flags.p_unc_given_inacc_degenerate),
            self.rss
        )
    }
}

/// Writes one CSV row per report: `name,miou,ece,p_acc_given_cer,p_unc_given_inacc,rss,pixel_count`.
pub fn write_component_csv<W: Write>(reports: &[MetricReport], writer: W) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        name: &'a str,
        miou: f64,
        ece: f64,
        p_acc_given_cer: f64,
        p_unc_given_inacc: f64,
        rss: f64,
        pixel_count: u64,
    }
    let mut w = csv::Writer::from_writer(writer);
    for r in reports {
        w.serialize(Row {
            name: r.metadata.name.as_deref().unwrap_or(""),
            miou: r.components.miou,
            ece: r.components.ece,
            p_acc_given_cer: r.components.p_acc_given_cer,
            p_unc_given_inacc: r.components.p_unc_given_inacc,
            rss: r.rss,
            pixel_count: r.pixel_count,
        })
        .map_err(|e| Error::io("<csv>", std::io::Error::other(e)))?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}
