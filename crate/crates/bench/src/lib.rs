//! Micro-benchmark harness for the evaluation pipeline.
//!
//! Inputs are synthesized in memory before the clock starts, one warmup pass
//! is run untimed, and the timed pass goes through the same parallel
//! evaluator the command-line tool uses.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use segrel_core::synth::{generate, EntropyMode, SynthSpec};
use segrel_core::{evaluate_image, evaluate_images, Error, Result, DEFAULT_NUM_BINS};

/// Classes, height, width.
pub type Geometry = (usize, usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub geometry: Geometry,
    pub num_images: usize,
    pub jobs: usize,
    pub seconds: f64,
    pub images_per_second: f64,
    pub pixels_per_second: f64,
    /// Peak resident set size in bytes, from the kernel when available and
    /// otherwise the size of the in-memory inputs.
    pub peak_resident_bytes: u64,
    pub machine: String,
}

pub const CSV_HEADER: &str = "machine,classes,height,width,images,jobs,seconds,images_per_second,pixels_per_second,peak_resident_bytes";

impl BenchResult {
    pub fn csv_row(&self) -> String {
        let (c, h, w) = self.geometry;
        format!(
            "{},{c},{h},{w},{},{},{:.6},{:.4},{:.1},{}",
            self.machine,
            self.num_images,
            self.jobs,
            self.seconds,
            self.images_per_second,
            self.pixels_per_second,
            self.peak_resident_bytes
        )
    }
}

/// Evaluates `num_images` synthetic images of the given geometry with `jobs`
/// workers (0 = all cores).
pub fn run_bench(geometry: Geometry, num_images: usize, jobs: usize) -> Result<BenchResult> {
    let (c, h, w) = geometry;
    if num_images == 0 {
        return Err(Error::InvalidArgument(
            "benchmark needs at least one image".into(),
        ));
    }
    let spec = SynthSpec {
        num_classes: c,
        height: h,
        width: w,
        num_images,
        target_accuracy: 0.8,
        confidence_bias: 0.0,
        error_entropy_mode: EntropyMode::High,
        seed: 0x5E6_2E1,
    };
    let images = generate(&spec)?;
    let input_bytes: u64 = images
        .iter()
        .map(|(p, l)| (p.values().len() * 4 + l.labels().len() * 2) as u64)
        .sum();

    let (p, l) = &images[0];
    evaluate_image(p, l, DEFAULT_NUM_BINS)?;

    let start = Instant::now();
    evaluate_images(&images, DEFAULT_NUM_BINS, jobs)?;
    let seconds = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);

    let workers = if jobs == 0 { available_cores() } else { jobs };
    Ok(BenchResult {
        geometry,
        num_images,
        jobs: workers,
        seconds,
        images_per_second: num_images as f64 / seconds,
        pixels_per_second: (num_images * h * w) as f64 / seconds,
        peak_resident_bytes: peak_rss().unwrap_or(input_bytes),
        machine: machine_descriptor(),
    })
}

fn available_cores() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// `VmHWM` from `/proc/self/status`, in bytes.
fn peak_rss() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// `os-arch-Ncores-cpu model`, with commas stripped so it fits one CSV field.
pub fn machine_descriptor() -> String {
    let model = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_string())
        })
        .unwrap_or_else(|| "unknown cpu".into());
    format!(
        "{}-{}-{}cores-{}",
        std::env::consts::OS,
        std::env::consts::ARCH,
        available_cores(),
        model
    )
    .replace(',', " ")
}

/// Appends `result` to the CSV log at `path`, writing the header first when
/// the file is new or empty.
pub fn append_csv(path: &Path, result: &BenchResult) -> Result<()> {
    let io = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let fresh = std::fs::metadata(path)
        .map(|m| m.len() == 0)
        .unwrap_or(true);
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io)?;
    if fresh {
        writeln!(file, "{CSV_HEADER}").map_err(io)?;
    }
    writeln!(file, "{}", result.csv_row()).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_completes() {
        let r = run_bench((5, 16, 24), 3, 1).unwrap();
        assert_eq!(r.jobs, 1);
        assert!(r.images_per_second > 0.0 && r.pixels_per_second > 0.0);
        assert!(r.peak_resident_bytes > 0);
    }

    #[test]
    fn log_gets_one_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bench.csv");
        let r = run_bench((3, 4, 4), 1, 1).unwrap();
        append_csv(&path, &r).unwrap();
        append_csv(&path, &r).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1].split(',').count(), CSV_HEADER.split(',').count());
    }
}
