//! `segrel-bench`: time the evaluation pipeline on synthetic inputs and append
//! the result to a CSV log.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use segrel_bench::{append_csv, run_bench};

#[derive(Debug, Parser)]
#[command(name = "segrel-bench", version, about)]
struct Args {
    #[arg(long, default_value_t = 19)]
    classes: usize,
    #[arg(long, default_value_t = 1024)]
    height: usize,
    #[arg(long, default_value_t = 2048)]
    width: usize,
    #[arg(long, default_value_t = 10)]
    images: usize,
    /// Worker counts to run, one benchmark each; 0 uses every core.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    jobs: Vec<usize>,
    /// CSV log to append results to.
    #[arg(long, default_value = "bench_results.csv")]
    log: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    for &jobs in &args.jobs {
        let geometry = (args.classes, args.height, args.width);
        let result = match run_bench(geometry, args.images, jobs) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        };
        println!(
            "{}x{}x{} x{} jobs={}: {:.3} s, {:.2} images/s, {:.3e} pixels/s, peak RSS {:.1} MiB",
            args.classes,
            args.height,
            args.width,
            args.images,
            result.jobs,
            result.seconds,
            result.images_per_second,
            result.pixels_per_second,
            result.peak_resident_bytes as f64 / (1 << 20) as f64
        );
        if let Err(e) = append_csv(&args.log, &result) {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    ExitCode::SUCCESS
}
